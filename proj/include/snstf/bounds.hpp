#pragma once

#include <limits>

namespace snstf {

/// Capacities are capped here when the transmittance is 1 (0 dB).
inline constexpr double kCapacitySentinel = 64.0;

double plob_from_transmittance(double eta);
double tgw_from_transmittance(double eta);

/// -log2(1 - eta) with eta = 10^(-loss/10).
double plob_bound(double total_loss_db);
/// log2((1 + eta) / (1 - eta)).
double tgw_bound(double total_loss_db);

struct BoundsRow {
  double loss_db = 0.0;
  double plob_abs = 0.0;   // channel loss only, perfect detection
  double plob_cond = 0.0;  // channel loss times station and detector efficiency
  double tgw = 0.0;
  double simulated_r = std::numeric_limits<double>::quiet_NaN();
};

BoundsRow repeaterless_bounds(double fiber_loss_db, double station_efficiency,
                              double simulated_r = std::numeric_limits<double>::quiet_NaN());

}  // namespace snstf

#include "snstf/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snstf/channel.hpp"

namespace snstf {

namespace {

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("transmittance must lie in [0, 1]");
}

}  // namespace

double plob_from_transmittance(double eta) {
  check_eta(eta);
  if (eta >= 1.0) return kCapacitySentinel;
  return std::min(kCapacitySentinel, -std::log1p(-eta) / std::log(2.0));
}

double tgw_from_transmittance(double eta) {
  check_eta(eta);
  if (eta >= 1.0) return kCapacitySentinel;
  return std::min(kCapacitySentinel, (std::log1p(eta) - std::log1p(-eta)) / std::log(2.0));
}

double plob_bound(double total_loss_db) { return plob_from_transmittance(transmittance(total_loss_db)); }

double tgw_bound(double total_loss_db) { return tgw_from_transmittance(transmittance(total_loss_db)); }

BoundsRow repeaterless_bounds(double fiber_loss_db, double station_efficiency, double simulated_r) {
  if (!(station_efficiency >= 0.0 && station_efficiency <= 1.0)) {
    throw std::invalid_argument("station efficiency must lie in [0, 1]");
  }
  BoundsRow row;
  row.loss_db = fiber_loss_db;
  const double eta = transmittance(fiber_loss_db);
  row.plob_abs = plob_from_transmittance(eta);
  row.plob_cond = plob_from_transmittance(eta * station_efficiency);
  row.tgw = tgw_from_transmittance(eta);
  row.simulated_r = simulated_r;
  return row;
}

}  // namespace snstf

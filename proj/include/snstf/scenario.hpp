#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "snstf/channel.hpp"
#include "snstf/protocol.hpp"
#include "snstf/simulator.hpp"
#include "snstf/tally.hpp"

namespace snstf {

inline constexpr const char* kScenarioSchema = "scenario_v1";

/// A named operating point: source settings, channel, tracking and the
/// post-selection used when analyzing its recorded tally.
struct Scenario {
  std::string name;
  std::string source_path;
  ProtocolParams protocol;
  ChannelParams channel;
  PhaseTrackingConfig tracking;
  SecurityParams security;
  double ds_half_deg = 15.0;
  double rc = 1.0;
  std::string tally_path;               // resolved, may be empty
  std::optional<std::string> grid_path;  // resolved
  nlohmann::json reported = nlohmann::json::object();

  SimConfig sim_config() const;
  /// Loads the recorded tally; throws std::runtime_error when there is none.
  DetectionTally recorded_tally() const;
};

/// Data directory: $TFQKD_DATA_DIR when set, else the build-time default.
std::string data_dir();

/// Accepts a file path or a bare name looked up as <data>/scenarios/<name>.json.
/// Throws std::runtime_error on I/O failure and std::invalid_argument on bad
/// content.
Scenario load_scenario(const std::string& name_or_path);
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir);

// Partial overrides: only keys present in the object are applied.
void apply_protocol_json(ProtocolParams& p, const nlohmann::json& j);
void apply_channel_json(ChannelParams& c, const nlohmann::json& j);
void apply_security_json(SecurityParams& s, const nlohmann::json& j);

nlohmann::json protocol_to_json(const ProtocolParams& p);
nlohmann::json channel_to_json(const ChannelParams& c);
nlohmann::json security_to_json(const SecurityParams& s);

/// Replaces the component efficiency and the scattering noise rate with
/// values that reproduce the tally's single-arm and vacuum yields.
void calibrate_channel(ChannelParams& c, const DetectionTally& t, const ProtocolParams& p);

}  // namespace snstf

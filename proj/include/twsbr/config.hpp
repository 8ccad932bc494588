#pragma once

#include <map>
#include <string>
#include <vector>

#include "twsbr/harness.hpp"
#include "twsbr/pid.hpp"
#include "twsbr/rl.hpp"
#include "twsbr/sim.hpp"

namespace twsbr {

// Raw section -> key -> value view of an ini-style document. Lines are
// 'key = value', sections are '[name]', '#' and ';' start comments.
using ConfigDoc = std::map<std::string, std::map<std::string, std::string>>;

ConfigDoc parse_ini(const std::string& text);

// Everything the lab needs, with defaults for every field. Sections:
// [physical], [sensor], [pid], [rl], [harness]. Unknown sections or keys
// are rejected.
struct LabConfig {
    PhysicalParams physical;
    ImuConfig imu;
    double filter_alpha = 0.98;
    PidGains pid_gains = kDefaultSimGains;
    PidLoopConfig pid_loop;
    TuneConfig tune;
    TrainConfig rl;
    double dt = 0.002;
    double horizon_s = 10.0;
    double fall_threshold = 0.35;
    double settling_band = 0.017;
    DistanceMode distance_mode = DistanceMode::kDisplacementAtSettle;
    std::vector<double> compare_grid = {-0.09, -0.06, -0.03, 0.03, 0.06, 0.09};

    SimConfig sim_config(std::uint64_t seed) const;
    CompareConfig compare_config(const std::string& out_dir) const;
};

LabConfig config_from_doc(const ConfigDoc& doc);
LabConfig load_config(const std::string& path);

// Canonical text form of a config; its fnv1a hash stamps trajectories.
std::string serialize_config(const LabConfig& cfg);

}  // namespace twsbr

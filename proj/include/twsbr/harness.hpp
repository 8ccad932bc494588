#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twsbr/pid.hpp"
#include "twsbr/rl.hpp"
#include "twsbr/sim.hpp"

namespace twsbr {

// Smallest t* with |phi_true(t)| < band for every recorded t >= t*.
// Episodes that did not reach the horizon never settle.
std::optional<double> settling_time(const Trajectory& traj, double band);

enum class DistanceMode { kDisplacementAtSettle, kPathLength };

// |x(T_settle)| or the integrated |x_dot| path length up to T_settle; falls
// back to the final sample when the episode never settles.
double settle_distance(const Trajectory& traj, std::optional<double> t_settle,
                       DistanceMode mode);

struct CellResult {
    double phi0 = 0.0;
    std::optional<double> settling;  // empty = unsettled
    double distance = 0.0;
    double max_abs_phi = 0.0;
    Termination termination = Termination::kHorizon;
    std::string trajectory_file;
};

struct ControllerStats {
    std::string controller;
    std::vector<CellResult> cells;
    double mean_settling = 0.0;  // unsettled cells count as the horizon
    double mean_distance = 0.0;
    double max_abs_phi = 0.0;
    int falls = 0;
    int unsettled = 0;
};

struct ComparisonReport {
    ControllerStats pid;
    ControllerStats rl;
    double delta_settling = 0.0;  // pid mean - rl mean
    double delta_distance = 0.0;
    std::vector<double> grid;
    double settling_band = 0.0;
    double horizon_s = 0.0;
};

struct CompareConfig {
    std::vector<double> grid = {-0.09, -0.06, -0.03, 0.03, 0.06, 0.09};
    double settling_band = 0.017;
    DistanceMode distance_mode = DistanceMode::kDisplacementAtSettle;
    double position_penalty = 0.1;  // reward weight recorded in RL trajectories
    std::string out_dir;            // empty = don't write files
    std::uint64_t config_hash = 0;  // stamped into emitted trajectories
};

// Runs matched PID and RL episodes over the grid: both controllers in a
// grid cell consume the identical sensor-noise stream. Writes one
// trajectory file per run plus report.txt when out_dir is set.
ComparisonReport compare(const PidGains& gains, const PolicyModel& model,
                         const SimConfig& cfg, const CompareConfig& cc);

// Plain-text trajectory files: '#' meta lines, one column-header line, one
// sample per line in full precision.
void write_trajectory(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory(const std::string& path);

void write_report(const ComparisonReport& report, const std::string& path);

// FNV-1a 64-bit, used to stamp trajectories with their config.
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace twsbr

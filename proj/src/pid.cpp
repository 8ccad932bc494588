#include "twsbr/pid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "twsbr/harness.hpp"

namespace twsbr {

void PidGains::validate() const {
    if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(kd)) {
        throw ConfigError("pid gains must be finite");
    }
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) {
        throw ConfigError("pid gains must be non-negative");
    }
}

PidOutput pid_step(const PidState& ps, const PidGains& gains, double error,
                   double dt, double integral_limit) {
    if (!(dt > 0.0)) {
        throw ContractError("pid_step: dt must be positive");
    }

    PidOutput out;
    out.state.integral =
        std::clamp(ps.integral + error * dt, -integral_limit, integral_limit);
    const double derivative =
        ps.initialized ? (error - ps.prev_error) / dt : 0.0;
    out.state.prev_error = error;
    out.state.initialized = true;

    out.force = gains.kp * error + gains.ki * out.state.integral +
                gains.kd * derivative;
    return out;
}

double integral_limit_for(const PidGains& gains, double force_limit) {
    if (gains.ki <= 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * force_limit / gains.ki;
}

Trajectory run_pid_episode(const RobotState& initial, const PidGains& gains,
                           const Setpoint& setpoint, const SimConfig& cfg,
                           const PidLoopConfig& loop,
                           std::vector<ImuSample>* imu_log) {
    gains.validate();
    if (!initial.finite()) {
        throw ContractError("run_pid_episode: initial state must be finite");
    }

    const double integral_limit = integral_limit_for(gains, cfg.params.force_limit);
    PidState ps;

    Controller controller = [&](const LoopObservation& obs) {
        double phi_target = setpoint.target_phi;
        if (loop.position_loop) {
            // Positive pitch accelerates the cart toward -x (x_dd ~ -g*phi),
            // so lean toward the position error to close it.
            const double cmd =
                loop.position_kp * (obs.state.x - setpoint.target_x) +
                loop.position_kd * obs.state.x_dot;
            phi_target += std::clamp(cmd, -loop.position_cmd_limit,
                                     loop.position_cmd_limit);
        }
        const double error = phi_target - obs.phi_hat;
        const PidOutput out = pid_step(ps, gains, error, cfg.dt, integral_limit);
        ps = out.state;
        return out.force;
    };

    return run_episode(cfg, initial, controller, "pid", nullptr, imu_log);
}

CandidateScore evaluate_gains(const PidGains& gains,
                              const std::vector<double>& phi0_grid,
                              const SimConfig& cfg, double settling_band,
                              const TuneWeights& weights) {
    CandidateScore score;
    score.gains = gains;

    double sum_abs_phi = 0.0;
    double sum_settling = 0.0;
    for (double phi0 : phi0_grid) {
        RobotState initial;
        initial.phi = phi0;
        const Trajectory traj = run_pid_episode(initial, gains, Setpoint{}, cfg);

        double abs_phi = 0.0;
        for (const TrajectorySample& s : traj.samples) abs_phi += std::abs(s.phi_true);
        sum_abs_phi += abs_phi / static_cast<double>(traj.samples.size());

        const auto settle = settling_time(traj, settling_band);
        sum_settling += settle.value_or(cfg.horizon_s);
        if (traj.termination != Termination::kHorizon) ++score.falls;
    }

    const double n = static_cast<double>(phi0_grid.size());
    score.mean_abs_phi = sum_abs_phi / n;
    score.mean_settling = sum_settling / n;
    score.cost = weights.mean_abs_phi * score.mean_abs_phi +
                 weights.settling_time * score.mean_settling +
                 weights.fall_penalty * static_cast<double>(score.falls);
    return score;
}

TuneResult tune_pid(const std::vector<PidGains>& candidates,
                    const std::vector<double>& phi0_grid, const SimConfig& cfg,
                    double settling_band, const TuneWeights& weights) {
    if (candidates.empty()) {
        throw ConfigError("tune_pid: empty candidate set");
    }
    if (phi0_grid.empty()) {
        throw ConfigError("tune_pid: empty initial-condition grid");
    }

    TuneResult result;
    result.evaluated.reserve(candidates.size());
    for (const PidGains& gains : candidates) {
        result.evaluated.push_back(
            evaluate_gains(gains, phi0_grid, cfg, settling_band, weights));
    }
    const auto best = std::min_element(
        result.evaluated.begin(), result.evaluated.end(),
        [](const CandidateScore& a, const CandidateScore& b) {
            return a.cost < b.cost;
        });
    result.best = best->gains;
    result.best_cost = best->cost;
    return result;
}

namespace {

std::vector<double> log_spaced(const GainRange& range) {
    if (range.n < 1 || !(range.lo >= 0.0) || range.hi < range.lo) {
        throw ConfigError("tune_pid: invalid gain range");
    }
    if (range.n == 1) return {range.lo};
    std::vector<double> values;
    values.reserve(static_cast<size_t>(range.n));
    if (range.lo <= 0.0) {
        // Linear fallback when the range touches zero.
        const double step = (range.hi - range.lo) / (range.n - 1);
        for (int i = 0; i < range.n; ++i) values.push_back(range.lo + step * i);
        return values;
    }
    const double ratio = std::pow(range.hi / range.lo, 1.0 / (range.n - 1));
    double v = range.lo;
    for (int i = 0; i < range.n; ++i) {
        values.push_back(v);
        v *= ratio;
    }
    return values;
}

}  // namespace

TuneResult tune_pid(const TuneConfig& tune, const SimConfig& cfg) {
    if (tune.phi0_grid.empty()) {
        throw ConfigError("tune_pid: empty initial-condition grid");
    }
    if (tune.kp.n < 1 || tune.ki.n < 1 || tune.kd.n < 1 || tune.sweeps < 1) {
        throw ConfigError("tune_pid: empty search space");
    }

    GainRange ranges[3] = {tune.kp, tune.ki, tune.kd};
    PidGains current{std::sqrt(tune.kp.lo * std::max(tune.kp.hi, 1e-12)),
                     std::sqrt(tune.ki.lo * std::max(tune.ki.hi, 1e-12)),
                     std::sqrt(tune.kd.lo * std::max(tune.kd.hi, 1e-12))};

    TuneResult result;
    CandidateScore best = evaluate_gains(current, tune.phi0_grid, cfg,
                                         tune.settling_band, tune.weights);
    result.evaluated.push_back(best);

    for (int sweep = 0; sweep < tune.sweeps; ++sweep) {
        for (int coord = 0; coord < 3; ++coord) {
            const std::vector<double> values = log_spaced(ranges[coord]);
            for (double v : values) {
                PidGains candidate = best.gains;
                (coord == 0 ? candidate.kp
                 : coord == 1 ? candidate.ki
                              : candidate.kd) = v;
                const CandidateScore score = evaluate_gains(
                    candidate, tune.phi0_grid, cfg, tune.settling_band, tune.weights);
                result.evaluated.push_back(score);
                if (score.cost < best.cost) best = score;
            }
            // Shrink the bracket around the incumbent for the next sweep,
            // staying inside the configured bounds.
            const GainRange& bound = (coord == 0   ? tune.kp
                                      : coord == 1 ? tune.ki
                                                   : tune.kd);
            const double center = (coord == 0   ? best.gains.kp
                                   : coord == 1 ? best.gains.ki
                                                : best.gains.kd);
            if (center > 0.0 && ranges[coord].n > 1) {
                const double span =
                    std::pow(ranges[coord].hi / std::max(ranges[coord].lo, 1e-12),
                             0.25);
                ranges[coord].lo = std::max(center / span, bound.lo);
                ranges[coord].hi = std::min(center * span, bound.hi);
            }
        }
    }
    result.best = best.gains;
    result.best_cost = best.cost;
    return result;
}

void save_gains(const PidGains& gains, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("save_gains: cannot open " + path);
    }
    out.precision(17);
    out << "kp = " << gains.kp << "\n"
        << "ki = " << gains.ki << "\n"
        << "kd = " << gains.kd << "\n";
}

PidGains load_gains(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("load_gains: cannot open " + path);
    }
    PidGains gains;
    bool seen[3] = {false, false, false};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, eq;
        double value = 0.0;
        if (!(ls >> key >> eq >> value) || eq != "=") {
            throw ConfigError("load_gains: malformed line '" + line + "'");
        }
        if (key == "kp") { gains.kp = value; seen[0] = true; }
        else if (key == "ki") { gains.ki = value; seen[1] = true; }
        else if (key == "kd") { gains.kd = value; seen[2] = true; }
        else throw ConfigError("load_gains: unknown key '" + key + "'");
    }
    if (!seen[0] || !seen[1] || !seen[2]) {
        throw ConfigError("load_gains: file must define kp, ki and kd");
    }
    gains.validate();
    return gains;
}

}  // namespace twsbr

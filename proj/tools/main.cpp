// Command-line front end: simulate, tune-pid, train, evaluate, compare and
// analyze-tf subcommands over the balance lab library.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "twsbr/config.hpp"
#include "twsbr/harness.hpp"
#include "twsbr/pid.hpp"
#include "twsbr/rl.hpp"

namespace {

using namespace twsbr;

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
};

LabConfig load_or_default(const GlobalOptions& opts) {
    if (opts.config_path.empty()) return LabConfig{};
    return load_config(opts.config_path);
}

std::uint64_t config_stamp(const LabConfig& cfg) {
    return fnv1a_hash(serialize_config(cfg));
}

void print_transfer_function(const std::string& name, const TransferFunction& tf) {
    std::printf("%s numerator  :", name.c_str());
    for (double c : tf.numerator) std::printf(" %.12g", c);
    std::printf("\n%s denominator:", name.c_str());
    for (double c : tf.denominator) std::printf(" %.12g", c);
    std::printf("\n");
}

void print_poles(const std::string& name, const TransferFunction& tf) {
    const PoleSet ps = poles(tf);
    std::printf("%s poles:\n", name.c_str());
    for (const auto& pole : ps.poles) {
        std::printf("  %+.9g %+.9gi   (residual %.3g)\n", pole.real(),
                    pole.imag(), relative_residual(tf.denominator, pole));
    }
    std::printf("%s unstable poles: %d, marginal poles: %d -> %s\n",
                name.c_str(), ps.unstable_count, ps.marginal_count,
                ps.unstable_count > 0 ? "UNSTABLE" : "not unstable");
}

int cmd_analyze_tf(const GlobalOptions& opts) {
    const LabConfig cfg = load_or_default(opts);
    const TransferFunction pitch = pitch_transfer_function(cfg.physical);
    const TransferFunction yaw = yaw_transfer_function(cfg.physical);

    std::printf("q = %.12g\n", cfg.physical.q());
    print_transfer_function("pitch", pitch);
    print_poles("pitch", pitch);
    print_transfer_function("yaw", yaw);
    print_poles("yaw", yaw);

    const StateSpace ss = linearize(cfg.physical);
    std::printf("state-space eigenvalues:\n");
    for (const auto& ev : eigenvalues(ss)) {
        std::printf("  %+.9g %+.9gi\n", ev.real(), ev.imag());
    }
    return 0;
}

int cmd_simulate(const GlobalOptions& opts, const std::string& controller,
                 double phi0, double duration, bool noise,
                 const std::string& gains_file, const std::string& imu_log) {
    LabConfig cfg = load_or_default(opts);
    if (duration > 0.0) cfg.horizon_s = duration;
    if (!noise) {
        cfg.imu.noise_std_accel = 0.0;
        cfg.imu.noise_std_gyro = 0.0;
    }
    const SimConfig sim = cfg.sim_config(opts.seed);

    RobotState initial;
    initial.phi = phi0;

    std::vector<ImuSample> samples;
    std::vector<ImuSample>* sink = imu_log.empty() ? nullptr : &samples;

    Trajectory traj;
    if (controller == "none") {
        traj = run_episode(sim, initial,
                           [](const LoopObservation&) { return 0.0; }, "none",
                           nullptr, sink);
    } else if (controller == "pid") {
        PidGains gains = cfg.pid_gains;
        if (!gains_file.empty()) gains = load_gains(gains_file);
        traj = run_pid_episode(initial, gains, Setpoint{}, sim, cfg.pid_loop,
                               sink);
    } else {
        throw ConfigError("simulate: controller must be 'none' or 'pid'");
    }
    traj.config_hash = config_stamp(cfg);
    if (sink) {
        write_imu_log(samples, imu_log);
        std::printf("imu samples written to %s\n", imu_log.c_str());
    }

    if (!opts.out.empty()) {
        std::filesystem::create_directories(opts.out);
        const std::string path =
            (std::filesystem::path(opts.out) / "trajectory.txt").string();
        write_trajectory(traj, path);
        std::printf("trajectory written to %s\n", path.c_str());
    }

    const auto settle = settling_time(traj, cfg.settling_band);
    std::printf("termination: %s after %.4g s (%zu samples)\n",
                to_string(traj.termination).c_str(),
                traj.samples.back().t + sim.dt, traj.samples.size());
    if (settle) {
        std::printf("settling time (band %.4g rad): %.4g s\n", cfg.settling_band,
                    *settle);
    } else {
        std::printf("settling time (band %.4g rad): unsettled\n",
                    cfg.settling_band);
    }
    return 0;
}

int cmd_tune_pid(const GlobalOptions& opts, const std::string& out_file) {
    LabConfig cfg = load_or_default(opts);
    SimConfig sim = cfg.sim_config(opts.seed);
    sim.imu.noise_std_accel = 0.0;  // calibration runs are noise-free
    sim.imu.noise_std_gyro = 0.0;

    const TuneResult result = tune_pid(cfg.tune, sim);
    std::printf("evaluated %zu candidates\n", result.evaluated.size());
    std::printf("best gains: kp=%.6g ki=%.6g kd=%.6g (cost %.6g)\n",
                result.best.kp, result.best.ki, result.best.kd,
                result.best_cost);

    if (!out_file.empty()) {
        save_gains(result.best, out_file);
        std::printf("gains written to %s\n", out_file.c_str());
    }
    return 0;
}

int cmd_train(const GlobalOptions& opts, bool seed_given,
              const std::string& model_file, int episodes_override,
              const std::string& log_file) {
    LabConfig cfg = load_or_default(opts);
    TrainConfig train_cfg = cfg.rl;
    if (seed_given) train_cfg.seed = opts.seed;
    if (episodes_override >= 0) train_cfg.n_episodes = episodes_override;

    SimConfig sim = cfg.sim_config(train_cfg.seed);
    sim.imu.noise_std_accel = 0.0;
    sim.imu.noise_std_gyro = 0.0;

    const TrainResult result = train(sim, train_cfg);
    const double last100 = trailing_mean_reward(result.episodes, 100);
    const double max_reward = static_cast<double>(train_cfg.horizon);
    std::printf("trained %zu episodes\n", result.episodes.size());
    std::printf("mean reward over last 100 episodes: %.4g of max %.4g (%.1f%%)\n",
                last100, max_reward, 100.0 * last100 / max_reward);

    if (!log_file.empty()) {
        std::ofstream log(log_file);
        log.precision(17);
        log << "episode reward steps termination\n";
        for (size_t i = 0; i < result.episodes.size(); ++i) {
            const EpisodeLog& e = result.episodes[i];
            log << i << ' ' << e.total_reward << ' ' << e.steps << ' '
                << to_string(e.termination) << "\n";
        }
        std::printf("training log written to %s\n", log_file.c_str());
    }
    save_model(result.model, model_file);
    std::printf("model written to %s\n", model_file.c_str());
    return 0;
}

int cmd_evaluate(const GlobalOptions& opts, const std::string& model_file,
                 int episodes, double phi0, bool noise) {
    if (episodes < 1) {
        throw ConfigError("evaluate: --episodes must be at least 1");
    }
    LabConfig cfg = load_or_default(opts);
    const PolicyModel model = load_model(model_file);
    SimConfig sim = cfg.sim_config(opts.seed);
    if (!noise) {
        sim.imu.noise_std_accel = 0.0;
        sim.imu.noise_std_gyro = 0.0;
    }

    if (!opts.out.empty()) std::filesystem::create_directories(opts.out);

    double sum_reward = 0.0;
    for (int i = 0; i < episodes; ++i) {
        SimConfig episode_cfg = sim;
        episode_cfg.seed = sim.seed + static_cast<std::uint64_t>(i);
        RobotState initial;
        // Deterministic spread of initial pitches starting at the requested one.
        initial.phi = phi0 + 0.005 * static_cast<double>(i);
        Trajectory traj = run_rl_episode(model, initial, episode_cfg,
                                         cfg.rl.position_penalty);
        traj.config_hash = config_stamp(cfg);

        double total = 0.0;
        for (const TrajectorySample& s : traj.samples) total += s.reward;
        sum_reward += total;
        const auto settle = settling_time(traj, cfg.settling_band);
        std::printf("episode %d: phi0=%+.3g reward=%.4g termination=%s settling=%s\n",
                    i, initial.phi, total, to_string(traj.termination).c_str(),
                    settle ? std::to_string(*settle).c_str() : "unsettled");
        if (!opts.out.empty()) {
            write_trajectory(traj, (std::filesystem::path(opts.out) /
                                    ("eval_" + std::to_string(i) + ".txt"))
                                       .string());
        }
    }
    std::printf("mean reward over %d episodes: %.4g\n", episodes,
                sum_reward / episodes);
    return 0;
}

int cmd_compare(const GlobalOptions& opts, const std::string& model_file,
                const std::string& gains_file, bool noise) {
    LabConfig cfg = load_or_default(opts);
    const PolicyModel model = load_model(model_file);
    PidGains gains = cfg.pid_gains;
    if (!gains_file.empty()) gains = load_gains(gains_file);

    SimConfig sim = cfg.sim_config(opts.seed);
    if (!noise) {
        sim.imu.noise_std_accel = 0.0;
        sim.imu.noise_std_gyro = 0.0;
    }

    CompareConfig cc = cfg.compare_config(opts.out);
    const ComparisonReport report = compare(gains, model, sim, cc);

    std::printf("hardware reference gains: kp=%.6g ki=%.6g kd=%.6g (not used)\n",
                kHardwareReferenceGains.kp, kHardwareReferenceGains.ki,
                kHardwareReferenceGains.kd);
    std::printf("pid: mean settling %.4g s, mean distance %.4g m, falls %d\n",
                report.pid.mean_settling, report.pid.mean_distance,
                report.pid.falls);
    std::printf("rl : mean settling %.4g s, mean distance %.4g m, falls %d\n",
                report.rl.mean_settling, report.rl.mean_distance,
                report.rl.falls);
    std::printf("delta (pid - rl): settling %.4g s, distance %.4g m\n",
                report.delta_settling, report.delta_distance);
    std::printf("rl settles faster: %s; rl travels less: %s\n",
                report.delta_settling > 0.0 ? "yes" : "no",
                report.delta_distance > 0.0 ? "yes" : "no");
    if (!opts.out.empty()) {
        std::printf("report and trajectories written to %s\n", opts.out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-balancing robot simulation lab"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "Path to the ini config file");
    auto* seed_opt =
        app.add_option("--seed", opts.seed, "Master seed for all randomness");
    app.add_option("--out", opts.out, "Output directory");

    auto* analyze = app.add_subcommand(
        "analyze-tf", "Print transfer-function coefficients, poles and stability");

    auto* simulate = app.add_subcommand("simulate", "Run one open- or closed-loop episode");
    std::string controller = "pid";
    double phi0 = 0.05;
    double duration = 0.0;
    bool noise = false;
    std::string sim_gains_file;
    simulate->add_option("--controller", controller, "none | pid");
    simulate->add_option("--phi0", phi0, "Initial pitch (rad)");
    simulate->add_option("--duration", duration, "Episode length (s); 0 = config value");
    simulate->add_flag("--noise", noise, "Enable sensor noise");
    simulate->add_option("--gains-file", sim_gains_file, "Gains file for the PID controller");
    std::string sim_imu_log;
    simulate->add_option("--imu-log", sim_imu_log, "Write raw IMU samples to this file");

    auto* tune = app.add_subcommand("tune-pid", "Calibrate PID gains by coordinate descent");
    std::string tune_out;
    tune->add_option("--out,--out-gains", tune_out, "Where to write the tuned gains");

    auto* train_cmd = app.add_subcommand("train", "Train the actor-critic agent");
    std::string model_out;
    std::string train_log;
    int episodes_override = -1;
    train_cmd->add_option("--out,--out-model", model_out, "Model file to write")->required();
    train_cmd->add_option("--episodes", episodes_override, "Override the episode budget");
    train_cmd->add_option("--log", train_log, "Per-episode training log file");

    auto* evaluate = app.add_subcommand("evaluate", "Run greedy policy episodes");
    std::string eval_model;
    int eval_episodes = 5;
    double eval_phi0 = 0.05;
    evaluate->add_option("--model", eval_model, "Model file")->required();
    evaluate->add_option("--episodes", eval_episodes, "Number of episodes");
    evaluate->add_option("--phi0", eval_phi0, "Base initial pitch (rad)");
    bool eval_noise = false;
    evaluate->add_flag("--noise", eval_noise, "Enable sensor noise");

    auto* compare_cmd = app.add_subcommand(
        "compare", "PID vs RL on a matched initial-condition grid");
    std::string cmp_model;
    std::string cmp_gains;
    compare_cmd->add_option("--model", cmp_model, "Model file")->required();
    compare_cmd->add_option("--gains-file", cmp_gains, "Gains file (default: config gains)");
    bool cmp_noise = false;
    compare_cmd->add_flag("--noise", cmp_noise, "Enable sensor noise");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (analyze->parsed()) return cmd_analyze_tf(opts);
        if (simulate->parsed()) {
            return cmd_simulate(opts, controller, phi0, duration, noise,
                                sim_gains_file, sim_imu_log);
        }
        if (tune->parsed()) return cmd_tune_pid(opts, tune_out);
        if (train_cmd->parsed()) {
            return cmd_train(opts, seed_opt->count() > 0, model_out,
                             episodes_override, train_log);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(opts, eval_model, eval_episodes, eval_phi0,
                                eval_noise);
        }
        if (compare_cmd->parsed()) {
            return cmd_compare(opts, cmp_model, cmp_gains, cmp_noise);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

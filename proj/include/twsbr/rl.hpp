#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "twsbr/sim.hpp"

namespace twsbr {

// Fully connected network: tanh hidden layers, linear output. Weights are
// row-major (out x in) per layer.
struct MlpParams {
    std::vector<int> layer_sizes;              // input, hidden..., output
    std::vector<std::vector<double>> weights;  // weights[k][r*in + c]
    std::vector<std::vector<double>> biases;
    std::string activation = "tanh";

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    void validate() const;  // throws ContractError on shape inconsistencies

    bool operator==(const MlpParams&) const = default;
};

// Seeded uniform init in +/-1/sqrt(fan_in).
MlpParams make_mlp(const std::vector<int>& layer_sizes, std::mt19937_64& rng);

// Post-activation values per layer, kept for exact backprop.
struct ForwardCache {
    std::vector<std::vector<double>> activations;  // activations[0] = input
};

std::vector<double> forward(const MlpParams& net, std::span<const double> input,
                            ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

MlpGrads zero_grads(const MlpParams& net);

// Exact reverse pass for dL/dparams given dL/doutput; accumulates into
// grads (which must match the net's shapes).
void backward(const MlpParams& net, const ForwardCache& cache,
              std::span<const double> output_grad, MlpGrads& grads);

// params -= lr * grads
void sgd_step(MlpParams& net, const MlpGrads& grads, double lr);

// Actor decides the action distribution over the discrete force set; critic
// estimates the state value.
struct PolicyModel {
    MlpParams actor;   // output = action logits
    MlpParams critic;  // output = scalar value
    int obs_dim = 0;
    int n_actions = 0;
    int version = 1;

    void validate() const;
    bool operator==(const PolicyModel&) const = default;
};

inline constexpr int kObsDim = 5;     // phi_hat, gyro rate, x, x_dot, prev action
inline constexpr int kNumActions = 3; // {-force_limit, 0, +force_limit}

struct TrainConfig {
    // Desk-scale calibration. At the 500 Hz control rate the discount has to
    // reach seconds ahead (0.999 ~ 2 s) and the actor must move much slower
    // than the critic.
    double gamma = 0.999;
    double lr_actor = 1e-4;
    double lr_critic = 3e-3;
    int horizon = 300;        // max steps per episode
    int n_episodes = 2000;
    double entropy_coef = 0.001;
    std::uint64_t seed = 1;
    double position_penalty = 0.1;  // reward = upright(+1) - w*|x|
    // Episode starts draw pitch in +/-0.05 rad; pitch rate, cart position
    // and cart velocity are drawn from these ranges (0 pins them to zero).
    double init_phi_dot_range = 0.0;  // rad/s
    double init_x_range = 0.3;        // m
    double init_x_dot_range = 0.5;    // m/s
    // Tilt at which training episodes end; tighter than the evaluation fall
    // threshold. 0 falls back to the harness threshold.
    double train_fall_threshold = 0.2;  // rad
    std::vector<int> actor_hidden = {64, 64};
    std::vector<int> critic_hidden = {64, 64};

    void validate() const;
};

PolicyModel init_model(const TrainConfig& cfg);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
double entropy(std::span<const double> probs);

struct ActionChoice {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;  // critic estimate of the observation
};

// Non-finite logits raise a diverged error; explore=false is the argmax path
// and never consumes the rng.
struct TrainingDivergedError : Error {
    using Error::Error;
};

ActionChoice select_action(const PolicyModel& model, std::span<const double> obs,
                           std::mt19937_64& rng, bool explore);

struct Transition {
    std::vector<double> obs;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

struct UpdateDiagnostics {
    double td_error = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
};

// One-step advantage actor-critic update, both gradients exact:
//   td          = r + gamma * V(next (if not done)) - V(obs)
//   critic step on td^2 with the target held constant (semi-gradient)
//   actor step on -log pi(a|obs) * td - entropy_coef * H(pi(.|obs))
UpdateDiagnostics a2c_update(PolicyModel& model, const Transition& transition,
                             const TrainConfig& cfg);

// Loss values matching a2c_update's gradients exactly; used by the
// finite-difference checks.
double actor_loss_value(const MlpParams& actor, std::span<const double> obs,
                        int action, double td, double entropy_coef);
double critic_loss_value(const MlpParams& critic, std::span<const double> obs,
                         double target);

struct EpisodeLog {
    double total_reward = 0.0;
    int steps = 0;
    Termination termination = Termination::kHorizon;
};

struct TrainResult {
    PolicyModel model;
    std::vector<EpisodeLog> episodes;
};

// Episode loop: reset to a seeded random pitch in +/-0.05 rad, then per step
// observe, act (sampled), simulate one dt, reward, update. Deterministic
// under a fixed seed.
TrainResult train(const SimConfig& env_cfg, const TrainConfig& cfg);

// Mean total reward of the trailing `window` episodes of a training log.
double trailing_mean_reward(const std::vector<EpisodeLog>& episodes, int window);

// Builds the policy observation vector from a loop observation.
std::vector<double> make_observation(const LoopObservation& obs, double force_limit);

// Greedy policy rollout through the same closed-loop pipeline as the PID
// episodes; per-step rewards are recorded in the trajectory.
Trajectory run_rl_episode(const PolicyModel& model, const RobotState& initial,
                          const SimConfig& cfg, double position_penalty = 0.1);

// Versioned structured-text persistence; round trips are bit-exact.
struct ModelVersionError : Error { using Error::Error; };
struct ModelShapeError : Error { using Error::Error; };
struct ModelTruncatedError : Error { using Error::Error; };

void save_model(const PolicyModel& model, const std::string& path);
PolicyModel load_model(const std::string& path);

}  // namespace twsbr

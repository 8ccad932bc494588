#include "twsbr/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace twsbr {

namespace {

constexpr int kMaxLayerDim = 1 << 20;  // sanity bound for parsed shapes

double force_for_action(int action, double force_limit) {
    switch (action) {
        case 0: return -force_limit;
        case 1: return 0.0;
        default: return force_limit;
    }
}

}  // namespace

void MlpParams::validate() const {
    if (layer_sizes.size() < 2) {
        throw ContractError("mlp: need at least input and output layers");
    }
    for (int n : layer_sizes) {
        if (n <= 0 || n > kMaxLayerDim) {
            throw ContractError("mlp: layer sizes must be in (0, 2^20]");
        }
    }
    const size_t n_layers = layer_sizes.size() - 1;
    if (weights.size() != n_layers || biases.size() != n_layers) {
        throw ContractError("mlp: weight/bias layer count mismatch");
    }
    for (size_t k = 0; k < n_layers; ++k) {
        const size_t in = static_cast<size_t>(layer_sizes[k]);
        const size_t out = static_cast<size_t>(layer_sizes[k + 1]);
        if (weights[k].size() != in * out || biases[k].size() != out) {
            throw ContractError("mlp: parameter block size mismatch");
        }
        for (double w : weights[k]) {
            if (!std::isfinite(w)) throw ContractError("mlp: non-finite weight");
        }
        for (double b : biases[k]) {
            if (!std::isfinite(b)) throw ContractError("mlp: non-finite bias");
        }
    }
    if (activation != "tanh") {
        throw ContractError("mlp: unsupported activation '" + activation + "'");
    }
}

MlpParams make_mlp(const std::vector<int>& layer_sizes, std::mt19937_64& rng) {
    MlpParams net;
    net.layer_sizes = layer_sizes;
    const size_t n_layers = layer_sizes.size() - 1;
    net.weights.resize(n_layers);
    net.biases.resize(n_layers);
    for (size_t k = 0; k < n_layers; ++k) {
        const size_t in = static_cast<size_t>(layer_sizes[k]);
        const size_t out = static_cast<size_t>(layer_sizes[k + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        net.weights[k].resize(in * out);
        for (double& w : net.weights[k]) w = dist(rng);
        net.biases[k].assign(out, 0.0);
    }
    net.validate();
    return net;
}

std::vector<double> forward(const MlpParams& net, std::span<const double> input,
                            ForwardCache* cache) {
    if (static_cast<int>(input.size()) != net.input_dim()) {
        throw ContractError("forward: input size does not match net input dim");
    }

    std::vector<double> a(input.begin(), input.end());
    if (cache) {
        cache->activations.clear();
        cache->activations.push_back(a);
    }

    const size_t n_layers = net.layer_sizes.size() - 1;
    for (size_t k = 0; k < n_layers; ++k) {
        const size_t in = static_cast<size_t>(net.layer_sizes[k]);
        const size_t out = static_cast<size_t>(net.layer_sizes[k + 1]);
        std::vector<double> z(out);
        const std::vector<double>& w = net.weights[k];
        for (size_t r = 0; r < out; ++r) {
            double acc = net.biases[k][r];
            const double* row = w.data() + r * in;
            for (size_t c = 0; c < in; ++c) acc += row[c] * a[c];
            z[r] = acc;
        }
        if (k + 1 < n_layers) {
            for (double& v : z) v = std::tanh(v);
        }
        a = std::move(z);
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

MlpGrads zero_grads(const MlpParams& net) {
    MlpGrads g;
    g.weights.resize(net.weights.size());
    g.biases.resize(net.biases.size());
    for (size_t k = 0; k < net.weights.size(); ++k) {
        g.weights[k].assign(net.weights[k].size(), 0.0);
        g.biases[k].assign(net.biases[k].size(), 0.0);
    }
    return g;
}

void backward(const MlpParams& net, const ForwardCache& cache,
              std::span<const double> output_grad, MlpGrads& grads) {
    const size_t n_layers = net.layer_sizes.size() - 1;
    if (cache.activations.size() != n_layers + 1) {
        throw ContractError("backward: cache does not match net depth");
    }
    if (static_cast<int>(output_grad.size()) != net.output_dim()) {
        throw ContractError("backward: output grad size mismatch");
    }

    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (size_t k = n_layers; k-- > 0;) {
        const size_t in = static_cast<size_t>(net.layer_sizes[k]);
        const size_t out = static_cast<size_t>(net.layer_sizes[k + 1]);
        const std::vector<double>& a_in = cache.activations[k];
        const std::vector<double>& a_out = cache.activations[k + 1];

        // Hidden layers cached post-tanh; fold in the activation derivative.
        if (k + 1 < n_layers) {
            for (size_t r = 0; r < out; ++r) {
                delta[r] *= 1.0 - a_out[r] * a_out[r];
            }
        }

        std::vector<double>& gw = grads.weights[k];
        for (size_t r = 0; r < out; ++r) {
            double* grow = gw.data() + r * in;
            const double d = delta[r];
            for (size_t c = 0; c < in; ++c) grow[c] += d * a_in[c];
            grads.biases[k][r] += d;
        }

        if (k > 0) {
            std::vector<double> prev(in, 0.0);
            const std::vector<double>& w = net.weights[k];
            for (size_t r = 0; r < out; ++r) {
                const double d = delta[r];
                const double* row = w.data() + r * in;
                for (size_t c = 0; c < in; ++c) prev[c] += row[c] * d;
            }
            delta = std::move(prev);
        }
    }
}

void sgd_step(MlpParams& net, const MlpGrads& grads, double lr) {
    for (size_t k = 0; k < net.weights.size(); ++k) {
        for (size_t i = 0; i < net.weights[k].size(); ++i) {
            net.weights[k][i] -= lr * grads.weights[k][i];
        }
        for (size_t i = 0; i < net.biases[k].size(); ++i) {
            net.biases[k][i] -= lr * grads.biases[k][i];
        }
    }
}

void PolicyModel::validate() const {
    actor.validate();
    critic.validate();
    if (actor.input_dim() != obs_dim || critic.input_dim() != obs_dim) {
        throw ContractError("policy model: network input dims must equal obs_dim");
    }
    if (actor.output_dim() != n_actions) {
        throw ContractError("policy model: actor output dim must equal n_actions");
    }
    if (critic.output_dim() != 1) {
        throw ContractError("policy model: critic output dim must be 1");
    }
}

void TrainConfig::validate() const {
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw ConfigError("train config: gamma must be in (0, 1)");
    }
    if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
        throw ConfigError("train config: learning rates must be positive");
    }
    if (horizon < 1 || n_episodes < 0) {
        throw ConfigError("train config: horizon must be >= 1 and episodes >= 0");
    }
    if (entropy_coef < 0.0 || position_penalty < 0.0) {
        throw ConfigError("train config: entropy and position weights must be >= 0");
    }
    if (init_phi_dot_range < 0.0 || init_x_range < 0.0 ||
        init_x_dot_range < 0.0) {
        throw ConfigError("train config: init state ranges must be >= 0");
    }
    if (train_fall_threshold < 0.0) {
        throw ConfigError("train config: train_fall_threshold must be >= 0");
    }
}

PolicyModel init_model(const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    std::vector<int> actor_sizes{kObsDim};
    actor_sizes.insert(actor_sizes.end(), cfg.actor_hidden.begin(),
                       cfg.actor_hidden.end());
    actor_sizes.push_back(kNumActions);

    std::vector<int> critic_sizes{kObsDim};
    critic_sizes.insert(critic_sizes.end(), cfg.critic_hidden.begin(),
                        cfg.critic_hidden.end());
    critic_sizes.push_back(1);

    PolicyModel model;
    model.actor = make_mlp(actor_sizes, rng);
    model.critic = make_mlp(critic_sizes, rng);
    model.obs_dim = kObsDim;
    model.n_actions = kNumActions;
    model.validate();
    return model;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

ActionChoice select_action(const PolicyModel& model, std::span<const double> obs,
                           std::mt19937_64& rng, bool explore) {
    const std::vector<double> logits = forward(model.actor, obs);
    for (double v : logits) {
        if (!std::isfinite(v)) {
            throw TrainingDivergedError("select_action: non-finite actor logits");
        }
    }
    const std::vector<double> probs = softmax(logits);

    ActionChoice choice;
    if (explore) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng);
        double acc = 0.0;
        choice.action = static_cast<int>(probs.size()) - 1;
        for (size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                choice.action = static_cast<int>(i);
                break;
            }
        }
    } else {
        choice.action = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    choice.log_prob =
        std::log(std::max(probs[static_cast<size_t>(choice.action)],
                          std::numeric_limits<double>::min()));
    choice.value = forward(model.critic, obs)[0];
    return choice;
}

double actor_loss_value(const MlpParams& actor, std::span<const double> obs,
                        int action, double td, double entropy_coef) {
    const std::vector<double> logits = forward(actor, obs);
    const std::vector<double> probs = softmax(logits);
    const double log_p =
        std::log(std::max(probs[static_cast<size_t>(action)],
                          std::numeric_limits<double>::min()));
    return -log_p * td - entropy_coef * entropy(probs);
}

double critic_loss_value(const MlpParams& critic, std::span<const double> obs,
                         double target) {
    const double v = forward(critic, obs)[0];
    const double e = target - v;
    return e * e;
}

UpdateDiagnostics a2c_update(PolicyModel& model, const Transition& transition,
                             const TrainConfig& cfg) {
    if (static_cast<int>(transition.obs.size()) != model.obs_dim ||
        static_cast<int>(transition.next_obs.size()) != model.obs_dim) {
        throw ContractError("a2c_update: observation size mismatch");
    }
    if (transition.action < 0 || transition.action >= model.n_actions) {
        throw ContractError("a2c_update: action index out of range");
    }

    // Value estimates; the bootstrap target is a constant w.r.t. the update.
    ForwardCache critic_cache;
    const double v_obs = forward(model.critic, transition.obs, &critic_cache)[0];
    const double v_next =
        transition.done ? 0.0 : forward(model.critic, transition.next_obs)[0];
    const double td = transition.reward + cfg.gamma * v_next - v_obs;

    ForwardCache actor_cache;
    const std::vector<double> logits =
        forward(model.actor, transition.obs, &actor_cache);
    const std::vector<double> probs = softmax(logits);
    const double h = entropy(probs);

    UpdateDiagnostics diag;
    diag.td_error = td;
    diag.critic_loss = td * td;
    diag.actor_loss =
        -std::log(std::max(probs[static_cast<size_t>(transition.action)],
                           std::numeric_limits<double>::min())) *
            td -
        cfg.entropy_coef * h;
    if (!std::isfinite(diag.td_error) || !std::isfinite(diag.actor_loss)) {
        throw TrainingDivergedError("a2c_update: non-finite losses (td=" +
                                    std::to_string(td) + ")");
    }

    // d(td^2)/dV = -2 td; next-state value is never backpropagated.
    MlpGrads critic_grads = zero_grads(model.critic);
    const double critic_out_grad[1] = {-2.0 * td};
    backward(model.critic, critic_cache, critic_out_grad, critic_grads);

    // d(-log pi_a * td)/dz = -td (onehot - p); entropy adds p (log p + H).
    std::vector<double> actor_out_grad(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) {
        const double onehot =
            (static_cast<int>(i) == transition.action) ? 1.0 : 0.0;
        const double log_p =
            std::log(std::max(probs[i], std::numeric_limits<double>::min()));
        actor_out_grad[i] =
            -td * (onehot - probs[i]) + cfg.entropy_coef * probs[i] * (log_p + h);
    }
    MlpGrads actor_grads = zero_grads(model.actor);
    backward(model.actor, actor_cache, actor_out_grad, actor_grads);

    sgd_step(model.critic, critic_grads, cfg.lr_critic);
    sgd_step(model.actor, actor_grads, cfg.lr_actor);

    for (const auto& block : {model.actor.weights, model.critic.weights}) {
        for (const auto& layer : block) {
            for (double w : layer) {
                if (!std::isfinite(w)) {
                    throw TrainingDivergedError(
                        "a2c_update: non-finite parameter after update");
                }
            }
        }
    }
    return diag;
}

std::vector<double> make_observation(const LoopObservation& obs,
                                     double force_limit) {
    // Features scaled to O(1) over the operating envelope: pitch by the fall
    // threshold, rates and cart state by nominal full-scale values.
    return {obs.phi_hat / 0.35, obs.gyro_rate / 2.0, obs.state.x / 1.0,
            obs.state.x_dot / 1.0, obs.prev_force / force_limit};
}

namespace {

double step_reward(const RobotState& after, bool fell, double fall_threshold,
                   double position_penalty) {
    const double upright =
        (!fell && std::abs(after.phi) < fall_threshold) ? 1.0 : 0.0;
    return upright - position_penalty * std::abs(after.x);
}

}  // namespace

TrainResult train(const SimConfig& env_cfg, const TrainConfig& cfg) {
    cfg.validate();

    TrainResult result;
    result.model = init_model(cfg);
    if (cfg.n_episodes == 0) return result;

    SimConfig episode_cfg = env_cfg;
    episode_cfg.horizon_s = cfg.horizon * env_cfg.dt;
    if (cfg.train_fall_threshold > 0.0) {
        episode_cfg.fall_threshold = cfg.train_fall_threshold;
    }

    // Independent deterministic streams for resets, action sampling and
    // per-episode sensor noise.
    std::mt19937_64 reset_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 action_rng(cfg.seed ^ 0xbf58476d1ce4e5b9ULL);
    std::uniform_real_distribution<double> pitch_dist(-0.05, 0.05);
    std::uniform_real_distribution<double> phi_dot_dist(
        -cfg.init_phi_dot_range, cfg.init_phi_dot_range);
    std::uniform_real_distribution<double> x_dist(-cfg.init_x_range,
                                                  cfg.init_x_range);
    std::uniform_real_distribution<double> x_dot_dist(-cfg.init_x_dot_range,
                                                      cfg.init_x_dot_range);

    BalanceEnv env(episode_cfg);
    const double force_limit = episode_cfg.params.force_limit;
    result.episodes.reserve(static_cast<size_t>(cfg.n_episodes));

    for (int episode = 0; episode < cfg.n_episodes; ++episode) {
        RobotState start;
        start.phi = pitch_dist(reset_rng);
        start.phi_dot =
            cfg.init_phi_dot_range > 0.0 ? phi_dot_dist(reset_rng) : 0.0;
        start.x = cfg.init_x_range > 0.0 ? x_dist(reset_rng) : 0.0;
        start.x_dot = cfg.init_x_dot_range > 0.0 ? x_dot_dist(reset_rng) : 0.0;
        env.reset(start, env_cfg.seed + static_cast<std::uint64_t>(episode));

        EpisodeLog log;
        std::vector<double> obs = make_observation(env.sense(), force_limit);
        while (!env.done()) {
            const ActionChoice choice =
                select_action(result.model, obs, action_rng, /*explore=*/true);
            env.apply(force_for_action(choice.action, force_limit));
            const bool fell =
                env.done() && env.termination() == Termination::kFell;
            const double reward = step_reward(env.state(), fell,
                                              episode_cfg.fall_threshold,
                                              cfg.position_penalty);

            // Horizon truncation still bootstraps; only a fall is terminal.
            std::vector<double> next_obs =
                make_observation(env.sense(), force_limit);
            Transition tr{obs, choice.action, reward, next_obs, fell};
            a2c_update(result.model, tr, cfg);

            log.total_reward += reward;
            ++log.steps;
            obs = std::move(next_obs);
        }
        log.termination = env.termination();
        result.episodes.push_back(log);
    }
    return result;
}

double trailing_mean_reward(const std::vector<EpisodeLog>& episodes, int window) {
    if (episodes.empty() || window < 1) return 0.0;
    const size_t n = std::min(static_cast<size_t>(window), episodes.size());
    double sum = 0.0;
    for (size_t i = episodes.size() - n; i < episodes.size(); ++i) {
        sum += episodes[i].total_reward;
    }
    return sum / static_cast<double>(n);
}

Trajectory run_rl_episode(const PolicyModel& model, const RobotState& initial,
                          const SimConfig& cfg, double position_penalty) {
    model.validate();

    std::mt19937_64 unused_rng(0);
    Controller controller = [&](const LoopObservation& obs) {
        const std::vector<double> features =
            make_observation(obs, cfg.params.force_limit);
        const ActionChoice choice =
            select_action(model, features, unused_rng, /*explore=*/false);
        return force_for_action(choice.action, cfg.params.force_limit);
    };
    RewardFn reward = [&](const RobotState& after, bool fell) {
        return step_reward(after, fell, cfg.fall_threshold, position_penalty);
    };
    return run_episode(cfg, initial, controller, "rl", reward);
}

namespace {

void write_net(std::ostream& out, const std::string& name, const MlpParams& net) {
    out << "net " << name << "\n";
    out << "layers " << net.layer_sizes.size();
    for (int n : net.layer_sizes) out << ' ' << n;
    out << "\n";
    out << "activation " << net.activation << "\n";
    for (size_t k = 0; k < net.weights.size(); ++k) {
        out << "W " << k;
        for (double w : net.weights[k]) out << ' ' << w;
        out << "\n";
        out << "b " << k;
        for (double b : net.biases[k]) out << ' ' << b;
        out << "\n";
    }
}

std::string next_token(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) {
        throw ModelTruncatedError("model file: unexpected end of file");
    }
    return tok;
}

long parse_int(const std::string& tok) {
    size_t pos = 0;
    long value = 0;
    try {
        value = std::stol(tok, &pos);
    } catch (const std::exception&) {
        throw ModelShapeError("model file: expected integer, got '" + tok + "'");
    }
    if (pos != tok.size()) {
        throw ModelShapeError("model file: expected integer, got '" + tok + "'");
    }
    return value;
}

double parse_double(const std::string& tok) {
    size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ModelShapeError("model file: expected number, got '" + tok + "'");
    }
    if (pos != tok.size()) {
        throw ModelShapeError("model file: expected number, got '" + tok + "'");
    }
    return value;
}

MlpParams read_net(std::istream& in, const std::string& expected_name) {
    if (next_token(in) != "net" || next_token(in) != expected_name) {
        throw ModelShapeError("model file: expected 'net " + expected_name + "'");
    }
    if (next_token(in) != "layers") {
        throw ModelShapeError("model file: expected 'layers'");
    }
    const long count = parse_int(next_token(in));
    if (count < 2 || count > 64) {
        throw ModelShapeError("model file: implausible layer count");
    }

    MlpParams net;
    for (long i = 0; i < count; ++i) {
        const long dim = parse_int(next_token(in));
        if (dim <= 0 || dim > kMaxLayerDim) {
            throw ModelShapeError("model file: layer dim out of range");
        }
        net.layer_sizes.push_back(static_cast<int>(dim));
    }
    if (next_token(in) != "activation") {
        throw ModelShapeError("model file: expected 'activation'");
    }
    net.activation = next_token(in);

    const size_t n_layers = net.layer_sizes.size() - 1;
    net.weights.resize(n_layers);
    net.biases.resize(n_layers);
    for (size_t k = 0; k < n_layers; ++k) {
        const size_t in_dim = static_cast<size_t>(net.layer_sizes[k]);
        const size_t out_dim = static_cast<size_t>(net.layer_sizes[k + 1]);
        if (next_token(in) != "W" ||
            parse_int(next_token(in)) != static_cast<long>(k)) {
            throw ModelShapeError("model file: expected weight block " +
                                  std::to_string(k));
        }
        net.weights[k].resize(in_dim * out_dim);
        for (double& w : net.weights[k]) w = parse_double(next_token(in));
        if (next_token(in) != "b" ||
            parse_int(next_token(in)) != static_cast<long>(k)) {
            throw ModelShapeError("model file: expected bias block " +
                                  std::to_string(k));
        }
        net.biases[k].resize(out_dim);
        for (double& b : net.biases[k]) b = parse_double(next_token(in));
    }
    try {
        net.validate();
    } catch (const ContractError& e) {
        throw ModelShapeError(std::string("model file: ") + e.what());
    }
    return net;
}

}  // namespace

void save_model(const PolicyModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("save_model: cannot open " + path);
    }
    out.precision(17);
    out << "twsbr-policy " << model.version << "\n";
    out << "obs_dim " << model.obs_dim << "\n";
    out << "n_actions " << model.n_actions << "\n";
    write_net(out, "actor", model.actor);
    write_net(out, "critic", model.critic);
    out << "end\n";
    if (!out) {
        throw ConfigError("save_model: write failed for " + path);
    }
}

PolicyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("load_model: cannot open " + path);
    }

    if (next_token(in) != "twsbr-policy") {
        throw ModelVersionError("model file: bad magic");
    }
    const long version = parse_int(next_token(in));
    if (version != 1) {
        throw ModelVersionError("model file: unsupported version " +
                                std::to_string(version));
    }

    PolicyModel model;
    model.version = static_cast<int>(version);
    if (next_token(in) != "obs_dim") {
        throw ModelShapeError("model file: expected 'obs_dim'");
    }
    model.obs_dim = static_cast<int>(parse_int(next_token(in)));
    if (next_token(in) != "n_actions") {
        throw ModelShapeError("model file: expected 'n_actions'");
    }
    model.n_actions = static_cast<int>(parse_int(next_token(in)));

    model.actor = read_net(in, "actor");
    model.critic = read_net(in, "critic");
    if (next_token(in) != "end") {
        throw ModelTruncatedError("model file: missing end marker");
    }
    try {
        model.validate();
    } catch (const ContractError& e) {
        throw ModelShapeError(std::string("model file: ") + e.what());
    }
    return model;
}

}  // namespace twsbr

#include "twsbr/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace twsbr {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" +
                          value + "'");
    }
    if (pos != value.size()) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" +
                          value + "'");
    }
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' must be an unsigned integer");
    }
}

int to_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' must be an integer");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("config: key '" + key + "' must be a boolean");
}

std::vector<double> to_double_list(const std::string& key,
                                   const std::string& value) {
    std::vector<double> out;
    std::istringstream in(value);
    std::string tok;
    while (in >> tok) out.push_back(to_double(key, tok));
    if (out.empty()) {
        throw ConfigError("config: key '" + key + "' must list numbers");
    }
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::istringstream in(value);
    std::string tok;
    while (in >> tok) out.push_back(to_int(key, tok));
    if (out.empty()) {
        throw ConfigError("config: key '" + key + "' must list integers");
    }
    return out;
}

}  // namespace

ConfigDoc parse_ini(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            doc[section];
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": empty key or value");
        }
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": key outside any [section]");
        }
        doc[section][key] = value;
    }
    return doc;
}

namespace {

class SectionReader {
  public:
    SectionReader(const ConfigDoc& doc, const std::string& section)
        : section_(section) {
        const auto it = doc.find(section);
        if (it != doc.end()) entries_ = &it->second;
    }

    bool has(const std::string& key) const {
        return entries_ && entries_->count(key) > 0;
    }

    const std::string& raw(const std::string& key) {
        used_.insert(key);
        return entries_->at(key);
    }

    void number(const std::string& key, double& target) {
        if (has(key)) target = to_double(section_ + "." + key, raw(key));
    }
    void integer(const std::string& key, int& target) {
        if (has(key)) target = to_int(section_ + "." + key, raw(key));
    }
    void unsigned64(const std::string& key, std::uint64_t& target) {
        if (has(key)) target = to_u64(section_ + "." + key, raw(key));
    }
    void boolean(const std::string& key, bool& target) {
        if (has(key)) target = to_bool(section_ + "." + key, raw(key));
    }
    void numbers(const std::string& key, std::vector<double>& target) {
        if (has(key)) target = to_double_list(section_ + "." + key, raw(key));
    }
    void integers(const std::string& key, std::vector<int>& target) {
        if (has(key)) target = to_int_list(section_ + "." + key, raw(key));
    }

    void finish() const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_) {
            if (!used_.count(key)) {
                throw ConfigError("config: unknown key '" + section_ + "." + key +
                                  "'");
            }
        }
    }

  private:
    std::string section_;
    const std::map<std::string, std::string>* entries_ = nullptr;
    std::set<std::string> used_;
};

}  // namespace

LabConfig config_from_doc(const ConfigDoc& doc) {
    static const std::set<std::string> known_sections = {
        "physical", "sensor", "pid", "rl", "harness"};
    for (const auto& [section, entries] : doc) {
        if (!known_sections.count(section)) {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }

    LabConfig cfg;

    SectionReader physical(doc, "physical");
    physical.number("m1", cfg.physical.m1);
    physical.number("m2", cfg.physical.m2);
    physical.number("l", cfg.physical.l);
    physical.number("f", cfg.physical.f);
    physical.number("g", cfg.physical.g);
    physical.number("wheel_diameter", cfg.physical.wheel_diameter);
    physical.number("wheel_base", cfg.physical.wheel_base);
    physical.number("mu_s", cfg.physical.mu_s);
    physical.number("force_limit", cfg.physical.force_limit);
    // Thin-rod default tracks m2 and l unless I2 is given explicitly.
    if (physical.has("I2")) {
        physical.number("I2", cfg.physical.I2);
    } else {
        cfg.physical.I2 = cfg.physical.m2 * cfg.physical.l * cfg.physical.l / 3.0;
    }
    if (physical.has("tf_gravity_mass")) {
        const std::string& value = physical.raw("tf_gravity_mass");
        if (value == "pendulum") {
            cfg.physical.tf_gravity_mass = GravityTermMass::kPendulum;
        } else if (value == "body") {
            cfg.physical.tf_gravity_mass = GravityTermMass::kBody;
        } else {
            throw ConfigError(
                "config: physical.tf_gravity_mass must be 'pendulum' or 'body'");
        }
    }
    physical.finish();
    cfg.physical.validate();

    SectionReader sensor(doc, "sensor");
    sensor.number("offset_ax", cfg.imu.offsets.ax);
    sensor.number("offset_ay", cfg.imu.offsets.ay);
    sensor.number("offset_az", cfg.imu.offsets.az);
    sensor.number("offset_gx", cfg.imu.offsets.gx);
    sensor.number("offset_gy", cfg.imu.offsets.gy);
    sensor.number("offset_gz", cfg.imu.offsets.gz);
    sensor.number("accel_scale", cfg.imu.accel_scale);
    sensor.number("gyro_scale", cfg.imu.gyro_scale);
    sensor.number("noise_std_accel", cfg.imu.noise_std_accel);
    sensor.number("noise_std_gyro", cfg.imu.noise_std_gyro);
    sensor.unsigned64("seed", cfg.imu.seed);
    sensor.number("alpha", cfg.filter_alpha);
    sensor.finish();
    cfg.imu.gravity = cfg.physical.g;
    cfg.imu.validate();
    if (cfg.filter_alpha < 0.0 || cfg.filter_alpha > 1.0) {
        throw ConfigError("config: sensor.alpha must be in [0, 1]");
    }

    SectionReader pid(doc, "pid");
    pid.number("kp", cfg.pid_gains.kp);
    pid.number("ki", cfg.pid_gains.ki);
    pid.number("kd", cfg.pid_gains.kd);
    pid.boolean("position_loop", cfg.pid_loop.position_loop);
    pid.number("position_kp", cfg.pid_loop.position_kp);
    pid.number("position_kd", cfg.pid_loop.position_kd);
    pid.number("position_cmd_limit", cfg.pid_loop.position_cmd_limit);
    pid.number("tune_kp_min", cfg.tune.kp.lo);
    pid.number("tune_kp_max", cfg.tune.kp.hi);
    pid.integer("tune_kp_points", cfg.tune.kp.n);
    pid.number("tune_ki_min", cfg.tune.ki.lo);
    pid.number("tune_ki_max", cfg.tune.ki.hi);
    pid.integer("tune_ki_points", cfg.tune.ki.n);
    pid.number("tune_kd_min", cfg.tune.kd.lo);
    pid.number("tune_kd_max", cfg.tune.kd.hi);
    pid.integer("tune_kd_points", cfg.tune.kd.n);
    pid.integer("tune_sweeps", cfg.tune.sweeps);
    pid.numbers("tune_grid", cfg.tune.phi0_grid);
    pid.number("tune_w_mean_phi", cfg.tune.weights.mean_abs_phi);
    pid.number("tune_w_settling", cfg.tune.weights.settling_time);
    pid.number("tune_w_fall", cfg.tune.weights.fall_penalty);
    pid.finish();
    cfg.pid_gains.validate();

    SectionReader rl(doc, "rl");
    rl.number("gamma", cfg.rl.gamma);
    rl.number("lr_actor", cfg.rl.lr_actor);
    rl.number("lr_critic", cfg.rl.lr_critic);
    rl.integer("horizon", cfg.rl.horizon);
    rl.integer("episodes", cfg.rl.n_episodes);
    rl.number("entropy_coef", cfg.rl.entropy_coef);
    rl.unsigned64("seed", cfg.rl.seed);
    rl.number("position_penalty", cfg.rl.position_penalty);
    rl.number("train_fall_threshold", cfg.rl.train_fall_threshold);
    rl.number("init_phi_dot_range", cfg.rl.init_phi_dot_range);
    rl.number("init_x_range", cfg.rl.init_x_range);
    rl.number("init_x_dot_range", cfg.rl.init_x_dot_range);
    rl.integers("actor_hidden", cfg.rl.actor_hidden);
    rl.integers("critic_hidden", cfg.rl.critic_hidden);
    rl.finish();
    cfg.rl.validate();

    SectionReader harness(doc, "harness");
    harness.number("dt", cfg.dt);
    harness.number("horizon_s", cfg.horizon_s);
    harness.number("fall_threshold", cfg.fall_threshold);
    harness.number("settling_band", cfg.settling_band);
    harness.numbers("compare_grid", cfg.compare_grid);
    if (harness.has("distance_mode")) {
        const std::string& value = harness.raw("distance_mode");
        if (value == "displacement") {
            cfg.distance_mode = DistanceMode::kDisplacementAtSettle;
        } else if (value == "path_length") {
            cfg.distance_mode = DistanceMode::kPathLength;
        } else {
            throw ConfigError(
                "config: harness.distance_mode must be 'displacement' or "
                "'path_length'");
        }
    }
    harness.finish();
    if (!(cfg.dt > 0.0) || cfg.dt > 0.05) {
        throw ConfigError("config: harness.dt must be in (0, 0.05]");
    }
    if (!(cfg.horizon_s > 0.0) || !(cfg.fall_threshold > 0.0) ||
        !(cfg.settling_band > 0.0)) {
        throw ConfigError("config: harness horizons and bands must be positive");
    }
    cfg.tune.settling_band = cfg.settling_band;
    return cfg;
}

LabConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return config_from_doc(parse_ini(text.str()));
}

SimConfig LabConfig::sim_config(std::uint64_t seed) const {
    SimConfig sim;
    sim.params = physical;
    sim.imu = imu;
    sim.filter_alpha = filter_alpha;
    sim.dt = dt;
    sim.horizon_s = horizon_s;
    sim.fall_threshold = fall_threshold;
    sim.seed = seed;
    return sim;
}

CompareConfig LabConfig::compare_config(const std::string& out_dir) const {
    CompareConfig cc;
    cc.grid = compare_grid;
    cc.settling_band = settling_band;
    cc.distance_mode = distance_mode;
    cc.position_penalty = rl.position_penalty;
    cc.out_dir = out_dir;
    cc.config_hash = fnv1a_hash(serialize_config(*this));
    return cc;
}

std::string serialize_config(const LabConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[physical]\n"
        << "m1 = " << cfg.physical.m1 << "\n"
        << "m2 = " << cfg.physical.m2 << "\n"
        << "l = " << cfg.physical.l << "\n"
        << "I2 = " << cfg.physical.I2 << "\n"
        << "f = " << cfg.physical.f << "\n"
        << "g = " << cfg.physical.g << "\n"
        << "wheel_diameter = " << cfg.physical.wheel_diameter << "\n"
        << "wheel_base = " << cfg.physical.wheel_base << "\n"
        << "mu_s = " << cfg.physical.mu_s << "\n"
        << "force_limit = " << cfg.physical.force_limit << "\n"
        << "tf_gravity_mass = "
        << (cfg.physical.tf_gravity_mass == GravityTermMass::kPendulum
                ? "pendulum"
                : "body")
        << "\n";
    out << "[sensor]\n"
        << "offset_ax = " << cfg.imu.offsets.ax << "\n"
        << "offset_ay = " << cfg.imu.offsets.ay << "\n"
        << "offset_az = " << cfg.imu.offsets.az << "\n"
        << "offset_gx = " << cfg.imu.offsets.gx << "\n"
        << "offset_gy = " << cfg.imu.offsets.gy << "\n"
        << "offset_gz = " << cfg.imu.offsets.gz << "\n"
        << "accel_scale = " << cfg.imu.accel_scale << "\n"
        << "gyro_scale = " << cfg.imu.gyro_scale << "\n"
        << "noise_std_accel = " << cfg.imu.noise_std_accel << "\n"
        << "noise_std_gyro = " << cfg.imu.noise_std_gyro << "\n"
        << "seed = " << cfg.imu.seed << "\n"
        << "alpha = " << cfg.filter_alpha << "\n";
    out << "[pid]\n"
        << "kp = " << cfg.pid_gains.kp << "\n"
        << "ki = " << cfg.pid_gains.ki << "\n"
        << "kd = " << cfg.pid_gains.kd << "\n"
        << "position_loop = " << (cfg.pid_loop.position_loop ? "true" : "false")
        << "\n";
    out << "[rl]\n"
        << "gamma = " << cfg.rl.gamma << "\n"
        << "lr_actor = " << cfg.rl.lr_actor << "\n"
        << "lr_critic = " << cfg.rl.lr_critic << "\n"
        << "horizon = " << cfg.rl.horizon << "\n"
        << "episodes = " << cfg.rl.n_episodes << "\n"
        << "entropy_coef = " << cfg.rl.entropy_coef << "\n"
        << "seed = " << cfg.rl.seed << "\n"
        << "position_penalty = " << cfg.rl.position_penalty << "\n";
    out << "[harness]\n"
        << "dt = " << cfg.dt << "\n"
        << "horizon_s = " << cfg.horizon_s << "\n"
        << "fall_threshold = " << cfg.fall_threshold << "\n"
        << "settling_band = " << cfg.settling_band << "\n";
    return out.str();
}

}  // namespace twsbr

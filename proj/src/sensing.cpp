#include "twsbr/sensing.hpp"

#include <cmath>
#include <fstream>

namespace twsbr {

void ImuConfig::validate() const {
    if (!(accel_scale > 0.0) || !(gyro_scale > 0.0)) {
        throw ConfigError("imu config: scales must be positive");
    }
    if (noise_std_accel < 0.0 || noise_std_gyro < 0.0) {
        throw ConfigError("imu config: noise stds must be non-negative");
    }
    if (!(gravity > 0.0)) {
        throw ConfigError("imu config: gravity must be positive");
    }
}

ImuSample synthesize_imu(const RobotState& state, double accel,
                         const ImuConfig& config, std::mt19937_64& rng) {
    const double sin_phi = std::sin(state.phi);
    const double cos_phi = std::cos(state.phi);

    // Specific force (accel - gravity vector) resolved into body axes.
    const double ay_phys = accel * cos_phi + config.gravity * sin_phi;
    const double az_phys = -accel * sin_phi + config.gravity * cos_phi;

    ImuSample s;
    s.ax = config.offsets.ax;
    s.ay = ay_phys * config.accel_scale + config.offsets.ay;
    s.az = az_phys * config.accel_scale + config.offsets.az;
    s.gx = state.phi_dot * config.gyro_scale + config.offsets.gx;
    s.gy = config.offsets.gy;
    s.gz = config.offsets.gz;
    s.t = state.t;

    if (config.noise_std_accel > 0.0) {
        std::normal_distribution<double> accel_noise(0.0, config.noise_std_accel);
        s.ax += accel_noise(rng);
        s.ay += accel_noise(rng);
        s.az += accel_noise(rng);
    }
    if (config.noise_std_gyro > 0.0) {
        std::normal_distribution<double> gyro_noise(0.0, config.noise_std_gyro);
        s.gx += gyro_noise(rng);
        s.gy += gyro_noise(rng);
        s.gz += gyro_noise(rng);
    }
    return s;
}

ImuOffsets calibrate_offsets(std::span<const ImuSample> samples,
                             const ImuConfig& config) {
    if (samples.size() < 100) {
        throw InsufficientDataError("calibrate_offsets: need at least 100 rest samples");
    }

    // Ideal upright-rest reading: z axis carries 1 g, everything else zero.
    const double ideal_az = config.gravity * config.accel_scale;

    double sum[6] = {0, 0, 0, 0, 0, 0};
    for (const ImuSample& s : samples) {
        sum[0] += s.ax;
        sum[1] += s.ay;
        sum[2] += s.az - ideal_az;
        sum[3] += s.gx;
        sum[4] += s.gy;
        sum[5] += s.gz;
    }
    const double n = static_cast<double>(samples.size());
    return ImuOffsets{sum[0] / n, sum[1] / n, sum[2] / n,
                      sum[3] / n, sum[4] / n, sum[5] / n};
}

void write_imu_log(std::span<const ImuSample> samples,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_imu_log: cannot open " + path);
    }
    out.precision(17);
    out << "t ax ay az gx gy gz\n";
    for (const ImuSample& s : samples) {
        out << s.t << ' ' << s.ax << ' ' << s.ay << ' ' << s.az << ' ' << s.gx
            << ' ' << s.gy << ' ' << s.gz << "\n";
    }
}

FilterState filter_update(const FilterState& fs, const ImuSample& sample,
                          const ImuConfig& config, double dt) {
    if (!(dt > 0.0)) {
        throw ContractError("filter_update: dt must be positive");
    }

    const double gyro_rate = (sample.gx - config.offsets.gx) / config.gyro_scale;
    const double accel_angle = std::atan2(sample.ay - config.offsets.ay,
                                          sample.az - config.offsets.az);

    FilterState next = fs;
    next.phi_hat = fs.alpha * (fs.phi_hat + gyro_rate * dt) +
                   (1.0 - fs.alpha) * accel_angle;
    next.last_t = sample.t;
    return next;
}

}  // namespace twsbr

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "twsbr/dynamics.hpp"
#include "twsbr/errors.hpp"

namespace twsbr {

// One 6-axis IMU reading in raw counts. The body x axis is the wheel axle,
// y points forward (along +x when upright), z up along the body.
struct ImuSample {
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;
    double gx = 0.0;
    double gy = 0.0;
    double gz = 0.0;
    double t = 0.0;  // timestamp (s)
};

struct ImuOffsets {
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;
    double gx = 0.0;
    double gy = 0.0;
    double gz = 0.0;
};

// Calibrated additive biases of the reference robot's sensor (raw counts).
inline constexpr ImuOffsets kReferenceImuOffsets{-1780.0, 750.0, 2700.0,
                                                 180.0, 76.0, 61.0};

// Emulated MPU-6050-style sensor. Scales default to +/-2 g and +/-250 deg/s
// full ranges (16384 counts/g, 131 counts per deg/s) converted to SI.
struct ImuConfig {
    ImuOffsets offsets = kReferenceImuOffsets;
    double accel_scale = 16384.0 / 9.81;          // counts per m/s^2
    double gyro_scale = 131.0 * 180.0 / 3.14159265358979323846;  // counts per rad/s
    double noise_std_accel = 30.0;                // counts
    double noise_std_gyro = 5.0;                  // counts
    double gravity = 9.81;                        // 1 g reference (m/s^2)
    std::uint64_t seed = 0;

    void validate() const;
};

// Complementary-filter state. phi_hat blends the integrated gyro rate
// (weight alpha) with the accelerometer angle atan2(ay, az) (weight 1-alpha).
struct FilterState {
    double phi_hat = 0.0;  // pitch estimate (rad)
    double alpha = 0.98;   // filter coefficient in [0, 1]
    double last_t = 0.0;   // time of last update (s)
};

// Ideal body-frame specific force and angular rate for the given state and
// cart acceleration, converted to counts, bias added, then Gaussian noise
// drawn from rng (skipped entirely when the stds are zero, so noise-free
// runs never consume the stream).
ImuSample synthesize_imu(const RobotState& state, double accel,
                         const ImuConfig& config, std::mt19937_64& rng);

// Mean residual between observed samples and the ideal upright-rest reading.
// Requires at least 100 samples.
ImuOffsets calibrate_offsets(std::span<const ImuSample> samples,
                             const ImuConfig& config);

// One complementary-filter update. Offsets from config are applied to the
// raw sample internally; the gyro term integrates the corrected rate over dt.
FilterState filter_update(const FilterState& fs, const ImuSample& sample,
                          const ImuConfig& config, double dt);

// Raw-sample log: one record per line, "t ax ay az gx gy gz" in counts.
void write_imu_log(std::span<const ImuSample> samples, const std::string& path);

}  // namespace twsbr

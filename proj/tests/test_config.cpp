#include <doctest.h>

#include <fstream>

#include "twsbr/config.hpp"

using namespace twsbr;

TEST_CASE("parse_ini: sections, comments, whitespace") {
    const ConfigDoc doc = parse_ini(
        "# leading comment\n"
        "[physical]\n"
        "m1 = 0.2   ; trailing comment\n"
        "  l =   0.12\n"
        "\n"
        "[rl]\n"
        "gamma = 0.97\n");
    CHECK(doc.at("physical").at("m1") == "0.2");
    CHECK(doc.at("physical").at("l") == "0.12");
    CHECK(doc.at("rl").at("gamma") == "0.97");
}

TEST_CASE("parse_ini: malformed lines are rejected") {
    CHECK_THROWS_AS(parse_ini("[physical\nm1 = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_ini("[physical]\nm1 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_ini("m1 = 0.2\n"), ConfigError);  // no section
    CHECK_THROWS_AS(parse_ini("[physical]\n= 0.2\n"), ConfigError);
}

TEST_CASE("config_from_doc: defaults survive an empty document") {
    const LabConfig cfg = config_from_doc({});
    CHECK(cfg.physical.m1 == 0.135);
    CHECK(cfg.physical.m2 == 0.060);
    CHECK(cfg.physical.wheel_base == 0.20);
    CHECK(cfg.physical.mu_s == 1.15);
    CHECK(cfg.imu.offsets.ax == -1780.0);
    CHECK(cfg.imu.offsets.gz == 61.0);
    CHECK(cfg.filter_alpha == 0.98);
    CHECK(cfg.dt == 0.002);
    CHECK(cfg.settling_band == 0.017);
}

TEST_CASE("config_from_doc: I2 defaults to the thin-rod value of m2 and l") {
    const LabConfig base = config_from_doc(parse_ini("[physical]\nl = 0.2\n"));
    CHECK(base.physical.I2 ==
          doctest::Approx(0.060 * 0.2 * 0.2 / 3.0).epsilon(1e-12));

    const LabConfig expl =
        config_from_doc(parse_ini("[physical]\nl = 0.2\nI2 = 0.001\n"));
    CHECK(expl.physical.I2 == 0.001);
}

TEST_CASE("config_from_doc: unknown keys and sections are rejected") {
    CHECK_THROWS_AS(config_from_doc(parse_ini("[physical]\nmass = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_doc(parse_ini("[engine]\npower = 1\n")),
                    ConfigError);
}

TEST_CASE("config_from_doc: invalid values are rejected") {
    CHECK_THROWS_AS(config_from_doc(parse_ini("[physical]\nm1 = -1\n")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_doc(parse_ini("[physical]\nm1 = abc\n")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_doc(parse_ini("[rl]\ngamma = 1.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_doc(parse_ini("[sensor]\nalpha = 2\n")),
                    ConfigError);
    CHECK_THROWS_AS(
        config_from_doc(parse_ini("[physical]\ntf_gravity_mass = both\n")),
        ConfigError);
    CHECK_THROWS_AS(config_from_doc(parse_ini("[harness]\ndt = 0.2\n")),
                    ConfigError);
}

TEST_CASE("config_from_doc: gravity-term switch reaches the dynamics") {
    const LabConfig body =
        config_from_doc(parse_ini("[physical]\ntf_gravity_mass = body\n"));
    CHECK(body.physical.tf_gravity_mass == GravityTermMass::kBody);
    const LabConfig pend =
        config_from_doc(parse_ini("[physical]\ntf_gravity_mass = pendulum\n"));
    CHECK(pend.physical.tf_gravity_mass == GravityTermMass::kPendulum);
}

TEST_CASE("config_from_doc: sensor gravity tracks the physical g") {
    const LabConfig cfg = config_from_doc(parse_ini("[physical]\ng = 9.5\n"));
    CHECK(cfg.imu.gravity == 9.5);
}

TEST_CASE("load_config: file round trip with overrides") {
    const std::string path = "/tmp/twsbr_test_config.ini";
    {
        std::ofstream out(path);
        out << "[physical]\n"
               "m1 = 0.2\n"
               "force_limit = 4\n"
               "[sensor]\n"
               "noise_std_accel = 0\n"
               "noise_std_gyro = 0\n"
               "[pid]\n"
               "kp = 50\n"
               "[rl]\n"
               "episodes = 10\n"
               "[harness]\n"
               "settling_band = 0.02\n"
               "compare_grid = -0.05 0.05\n";
    }
    const LabConfig cfg = load_config(path);
    CHECK(cfg.physical.m1 == 0.2);
    CHECK(cfg.physical.force_limit == 4.0);
    CHECK(cfg.imu.noise_std_accel == 0.0);
    CHECK(cfg.pid_gains.kp == 50.0);
    CHECK(cfg.rl.n_episodes == 10);
    CHECK(cfg.settling_band == 0.02);
    CHECK(cfg.compare_grid == std::vector<double>{-0.05, 0.05});
    CHECK(cfg.tune.settling_band == 0.02);

    CHECK_THROWS_AS(load_config("/tmp/definitely_missing_config.ini"),
                    ConfigError);
}

TEST_CASE("serialize_config: stable and distinct per content") {
    const LabConfig a = config_from_doc({});
    const LabConfig b = config_from_doc(parse_ini("[physical]\nm1 = 0.2\n"));
    CHECK(serialize_config(a) == serialize_config(a));
    CHECK(serialize_config(a) != serialize_config(b));
    CHECK(fnv1a_hash(serialize_config(a)) != fnv1a_hash(serialize_config(b)));
}

TEST_CASE("sim_config: carries the harness settings and the seed") {
    LabConfig cfg = config_from_doc(parse_ini("[harness]\ndt = 0.004\n"));
    const SimConfig sim = cfg.sim_config(42);
    CHECK(sim.dt == 0.004);
    CHECK(sim.seed == 42);
    CHECK(sim.params.m1 == cfg.physical.m1);
    CHECK(sim.filter_alpha == cfg.filter_alpha);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "vivrl/baseline.hpp"

using namespace vivrl;
using namespace vivrl::baseline;

namespace {

LockOnSetup calibrated_setup() { return config::lock_on_setup(vivrl::testing::calibrated_config()); }

}  // namespace

TEST(SinusoidalReference, Examples) {
    const double v = 0.26, d = 0.0175;
    const SineCommand cmd{1.0, 2.0, 0.0};
    EXPECT_NEAR(sinusoidal_reference(0.0, cmd, v, d), 2 * v / d, 1e-12);
    EXPECT_NEAR(sinusoidal_reference(1.0 / (4 * cmd.fr_hz), cmd, v, d), 0.0, 1e-12);
    EXPECT_NEAR(sinusoidal_reference(0.0, cmd, v, d) * d / (2 * v), 1.0, 1e-12);
    const SineCommand flipped{1.0, 2.0, std::numbers::pi};
    EXPECT_NEAR(sinusoidal_reference(0.123, flipped, v, d), -sinusoidal_reference(0.123, cmd, v, d), 1e-12);
    EXPECT_THROW((void)sinusoidal_reference(0.0, cmd, 0.0, d), ParameterDomainError);
}

TEST(PidSpeedControl, Examples) {
    PidState st;
    const SpeedPidGains pi{1.0, 5.0, 0.1, 1.0};
    for (int i = 0; i < 10; ++i) EXPECT_EQ(pid_speed_control(0.3, 0.3, pi, 1e-3, st), 0.0);

    PidState p_only;
    const SpeedPidGains p{2.0, 0.0, 0.0, 1.0};
    EXPECT_NEAR(pid_speed_control(0.0, 0.1, p, 1e-3, p_only), 0.2, 1e-15);
    EXPECT_EQ(pid_speed_control(0.0, 1.0, p, 1e-3, p_only), 0.4);
    EXPECT_THROW((void)pid_speed_control(0.0, 0.1, p, 0.0, p_only), ParameterDomainError);
}

TEST(PidSpeedControl, IntegralIsClamped) {
    PidState st;
    const SpeedPidGains g{0.0, 1.0, 0.0, 0.05};
    for (int i = 0; i < 10000; ++i) (void)pid_speed_control(0.0, 1.0, g, 1e-2, st);
    EXPECT_EQ(st.integral, 0.05);
    EXPECT_NEAR(pid_speed_control(0.0, 1.0, g, 1e-2, st), 0.05, 1e-15);
}

TEST(PidSpeedControl, DerivativeTerm) {
    PidState st;
    const SpeedPidGains g{0.0, 0.0, 0.01, 1.0};
    EXPECT_EQ(pid_speed_control(0.0, 0.1, g, 0.1, st), 0.0);
    EXPECT_NEAR(pid_speed_control(0.0, 0.3, g, 0.1, st), 0.01 * (0.3 - 0.1) / 0.1, 1e-15);
}

TEST(TuneGains, ClosedLoopBandwidthFormula) {
    actuator::MotorParams m;
    const double v = 0.26, d = 0.0175, fn = 1.96;
    const SpeedPidGains g = tune_gains(m, v, d, fn, 20.0);
    const double per_duty = actuator::normalized_speed(m.omega_max_rad_per_s, v, d) / m.duty_limit;
    EXPECT_NEAR(g.kp, (2 * std::numbers::pi * 20.0 * fn * m.lag_tau_s - 1.0) / per_duty, 1e-12);
    EXPECT_NEAR(g.ki, g.kp * fn, 1e-12);
    EXPECT_EQ(g.kd, 0.0);
    EXPECT_EQ(tune_gains(m, v, d, fn, 0.5).kp, 0.0);
}

TEST(LockOnRun, TracksTwiceTheNaturalFrequency) {
    const LockOnSetup setup = calibrated_setup();
    const LockOnRun run = lock_on_run(2.0, setup);
    EXPECT_LT(run.point.tracking_rms, 0.1);
    EXPECT_NEAR(run.record.sample_interval_s, 0.01, 1e-12);
    for (const auto &s : run.record.samples) ASSERT_LE(std::abs(s.duty), setup.motor.duty_limit);
}

TEST(LockOnRun, RatioRange) {
    const LockOnSetup setup = calibrated_setup();
    EXPECT_THROW((void)lock_on_run(0.1, setup), ParameterDomainError);
    EXPECT_THROW((void)lock_on_run(3.5, setup), ParameterDomainError);
}

TEST(LockOnRun, PidPeriodMustFitThePhysicsStep) {
    LockOnSetup setup = calibrated_setup();
    setup.motor.command_interval_s = 1.5e-3;
    EXPECT_THROW(setup.validate(), ParameterDomainError);
}

TEST(FrequencySweep, EmptyAndCsv) {
    const LockOnSetup setup = calibrated_setup();
    EXPECT_TRUE(frequency_sweep({}, setup).empty());
    std::ostringstream os;
    const std::vector<LockOnPoint> pts{{1.0, 0.65, 0.01}, {1.6, 0.02, 0.03}};
    write_sweep_csv(os, pts);
    EXPECT_EQ(os.str(), "ratio,a_over_d,tracking_rms\n1,0.65,0.01\n1.6,0.02,0.03\n");
}

TEST(FrequencySweep, HighFrequencyForcingQuenchesTheLimitCycle) {
    const LockOnSetup setup = calibrated_setup();
    const std::vector<double> ratios{1.6};
    EXPECT_LT(frequency_sweep(ratios, setup).front().a_over_d, 0.1);
}

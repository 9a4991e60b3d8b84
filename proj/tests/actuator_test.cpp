#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vivrl/actuator.hpp"

using namespace vivrl;
using namespace vivrl::actuator;

TEST(ClampDuty, Examples) {
    const MotorParams p;
    EXPECT_EQ(clamp_duty(0.7, p), 0.4);
    EXPECT_EQ(clamp_duty(-0.7, p), -0.4);
    EXPECT_EQ(clamp_duty(0.0, p), 0.0);
    EXPECT_EQ(clamp_duty(-0.25, p), -0.25);
    EXPECT_THROW((void)clamp_duty(std::nan(""), p), CommandError);
}

TEST(SteadySpeed, LinearInDuty) {
    const MotorParams p;
    EXPECT_EQ(steady_speed(0.4, p), p.omega_max_rad_per_s);
    EXPECT_EQ(steady_speed(0.0, p), 0.0);
    EXPECT_NEAR(steady_speed(-0.2, p), -p.omega_max_rad_per_s / 2, 1e-12);
}

TEST(SteadySpeed, Deadband) {
    MotorParams p;
    p.deadband = 0.05;
    EXPECT_EQ(steady_speed(0.04, p), 0.0);
    EXPECT_EQ(steady_speed(0.4, p), p.omega_max_rad_per_s);
}

TEST(MotorStep, ReachesNinetyFivePercentIn200ms) {
    const MotorParams p;
    MotorState m = hold_command({}, 0.4, 0.0, p);
    for (int i = 0; i < 200; ++i) m = motor_step(m, 1e-3, p);
    EXPECT_GE(m.omega_rad_per_s, 0.95 * p.omega_max_rad_per_s);
}

TEST(MotorStep, StepResponseMatchesClosedForm) {
    const MotorParams p;
    MotorState m = hold_command({}, 0.4, 0.0, p);
    double worst = 0.0;
    for (int i = 1; i <= 500; ++i) {
        m = motor_step(m, 1e-3, p);
        const double want = p.omega_max_rad_per_s * (1.0 - std::exp(-i * 1e-3 / p.lag_tau_s));
        worst = std::max(worst, std::abs(m.omega_rad_per_s / p.omega_max_rad_per_s - want / p.omega_max_rad_per_s));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(MotorStep, ZeroDutyDecaysToRest) {
    const MotorParams p;
    MotorState m;
    m.omega_rad_per_s = 15.0;
    for (int i = 0; i < 5000; ++i) m = motor_step(m, 1e-3, p);
    EXPECT_LT(std::abs(m.omega_rad_per_s), 1e-12);
    EXPECT_THROW((void)motor_step(m, 0.0, p), ParameterDomainError);
}

TEST(HoldCommand, OnlyOnTheCommandGrid) {
    const MotorParams p;
    const MotorState m = hold_command({}, 0.3, 0.1, p);
    EXPECT_EQ(m.held_duty, 0.3);
    EXPECT_THROW((void)hold_command({}, 0.3, 0.15, p), SchedulingError);
    EXPECT_EQ(hold_command({}, 0.9, 0.2, p).held_duty, 0.4);
}

TEST(HoldCommand, TwoHoldsGiveConcatenatedExponentials) {
    const MotorParams p;
    const double tau = p.lag_tau_s;
    MotorState m = hold_command({}, 0.3, 0.0, p);
    for (int i = 0; i < 100; ++i) m = motor_step(m, 1e-3, p);
    const double w1 = steady_speed(0.3, p) * (1 - std::exp(-0.1 / tau));
    EXPECT_NEAR(m.omega_rad_per_s, w1, 1e-9);
    m = hold_command(m, -0.1, 0.1, p);
    for (int i = 0; i < 100; ++i) m = motor_step(m, 1e-3, p);
    const double target = steady_speed(-0.1, p);
    EXPECT_NEAR(m.omega_rad_per_s, target + (w1 - target) * std::exp(-0.1 / tau), 1e-9);
}

TEST(NormalizedSpeed, Examples) {
    const double v = 0.2, d = 0.0175;
    EXPECT_NEAR(normalized_speed(2 * v / d, v, d), 1.0, 1e-12);
    EXPECT_EQ(normalized_speed(0.0, v, d), 0.0);
    EXPECT_THROW((void)normalized_speed(1.0, 0.0, d), ParameterDomainError);
}

TEST(NormalizedSpeed, SpeedLimitFromTargetAlpha) {
    const double v = 6.0 * 1.96 * 0.0175, d = 0.0175;
    MotorParams p;
    p.omega_max_rad_per_s = omega_max_for_alpha(1.0, v, d);
    EXPECT_NEAR(normalized_speed(steady_speed(0.4, p), v, d), 1.0, 1e-12);
}

TEST(MotorProperties, SpeedStaysWithinLimitAndStepsAreMonotone) {
    const MotorParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> duty(-1.0, 1.0);
    MotorState m;
    for (int k = 0; k < 500; ++k) {
        m = hold_command(m, duty(rng), k * p.command_interval_s, p);
        const double target = steady_speed(m.held_duty, p);
        double prev_gap = std::abs(target - m.omega_rad_per_s);
        for (int i = 0; i < 100; ++i) {
            m = motor_step(m, 1e-3, p);
            ASSERT_LE(std::abs(m.omega_rad_per_s), p.omega_max_rad_per_s);
            const double gap = std::abs(target - m.omega_rad_per_s);
            ASSERT_LE(gap, prev_gap);
            prev_gap = gap;
        }
    }
}

TEST(RotationAfter, RateIsTheDerivativeOfSpeed) {
    const MotorParams p;
    MotorState m = hold_command({}, 0.25, 0.0, p);
    m.omega_rad_per_s = -4.0;
    const double h = 0.03, e = 1e-6;
    const double fd = (rotation_after(m, h + e, p).omega - rotation_after(m, h - e, p).omega) / (2 * e);
    EXPECT_NEAR(rotation_after(m, h, p).omega_dot, fd, 1e-6);
}

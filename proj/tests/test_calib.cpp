#include <gtest/gtest.h>

#include "zenosim/calib.hpp"
#include "zenosim/zeno.hpp"

using namespace zenosim;

TEST(SteadyState, ResonantAmplitude) {
    const cplx a = steady_state_alpha(1.3, 0.0, 0.4);
    EXPECT_NEAR(a.real(), 2.0 * 1.3 / 0.4, 1e-12);
    EXPECT_NEAR(a.imag(), 0.0, 1e-15);
    EXPECT_THROW(steady_state_alpha(1.0, 0.0, 0.0), ConfigError);
}

TEST(SteadyState, DispersiveLimit) {
    const cplx a = steady_state_alpha(1.0, 1e3, 1.0);
    EXPECT_NEAR(std::abs(a), 1e-3, 1e-9);
}

TEST(SteadyState, ZenoDetuningFromGG) {
    DeviceParams p;
    const double delta = sector_shift_mhz(p, "gg") - drive_frequencies(p).zeno_offset_mhz;
    EXPECT_NEAR(delta, 14.35, 1e-12);
    const cplx a = steady_state_alpha(mhz_to_angular(1.0), mhz_to_angular(delta), p.kappa());
    EXPECT_NEAR(std::abs(a), 1.0 / 14.35, 1e-4);
}

TEST(Rates, DegenerateLinesGiveZero) {
    DeviceParams p;
    p.chi1_mhz = p.chi2_mhz;
    const auto r = pair_rate(p, 1.0, drive_frequencies(p).zeno_offset_mhz, "eg", "ge");
    ASSERT_TRUE(r.re_mu && r.im_mu);
    EXPECT_EQ(*r.re_mu, 0.0);
    EXPECT_EQ(*r.im_mu, 0.0);
}

TEST(Rates, ResonantDriveHasNoRate) {
    DeviceParams p;
    const auto r = pair_rate(p, 1.0, sector_shift_mhz(p, "fe"), "fe", "gg");
    EXPECT_FALSE(r.re_mu.has_value());
}

TEST(Rates, SymmetricDriveCancels) {
    DeviceParams p;
    DriveConfig d;
    d.zeno_eps_mhz = 2.0;
    const auto on = cross_kerr_rates(p, d);
    const double g = *on.find(on.total, "gg", "eg").re_mu;
    const double e = *on.find(on.total, "ge", "ee").re_mu;
    EXPECT_NEAR(g / e, 1.0, 0.05);
    d.symmetric_on = false;
    const auto off = cross_kerr_rates(p, d);
    const double g0 = *off.find(off.total, "gg", "eg").re_mu;
    const double e0 = *off.find(off.total, "ge", "ee").re_mu;
    EXPECT_GT(std::abs(g0 / e0 - 1.0), 0.15);
}

TEST(Rates, DephasingScalesQuadratically) {
    DeviceParams p;
    DriveConfig d;
    d.zeno_eps_mhz = 0.5;
    const auto a = cross_kerr_rates(p, d);
    d.zeno_eps_mhz = 1.5;
    const auto b = cross_kerr_rates(p, d);
    EXPECT_NEAR(*b.find(b.total, "gg", "ee").im_mu / *a.find(a.total, "gg", "ee").im_mu, 9.0, 1e-9);
    EXPECT_THROW((void)a.find(a.total, "gg", "fg"), LabelError);
}

TEST(Labels, Validation) {
    EXPECT_EQ(pair_index("fe"), 5);
    EXPECT_THROW(pair_index("gf"), LabelError);
    EXPECT_THROW(simulated_ramsey(DeviceParams{}, DriveConfig{}, "gg", "gg"), LabelError);
}

TEST(Ramsey, NoDriveNoShift) {
    DriveConfig d;
    d.zeno_eps_mhz = 0.0;
    const auto r = simulated_ramsey(DeviceParams{}, d, "gg", "eg");
    EXPECT_TRUE(r.fit_ok);
    EXPECT_NEAR(r.shift_mhz, 0.0, 1e-3);
    EXPECT_NEAR(r.fitted_mhz, RamseyOptions{}.detuning_mhz, 1e-3);
}

TEST(Ramsey, BranchesAgreeWithSymmetricDrive) {
    DriveConfig d;
    d.zeno_eps_mhz = 1.0;
    const auto g = simulated_ramsey(DeviceParams{}, d, "gg", "eg");
    const auto e = simulated_ramsey(DeviceParams{}, d, "ge", "ee");
    ASSERT_TRUE(g.fit_ok && e.fit_ok);
    EXPECT_NEAR(g.shift_mhz / e.shift_mhz, 1.0, 0.05);
}

TEST(Ramsey, ZenoOnlyMatchesDispersiveEstimate) {
    DriveConfig d;
    d.zeno_eps_mhz = 0.5;
    d.symmetric_on = false;
    const DeviceParams p;
    const auto r = simulated_ramsey(p, d, "gg", "eg");
    const auto an = analytic_stark_shift_mhz(p, d, "gg", "eg");
    ASSERT_TRUE(an.has_value());
    EXPECT_NEAR(r.shift_mhz / *an, 1.0, 0.1);
}

TEST(StarkTable, InterpolatesInEpsSquared) {
    StarkTable t{{0.0, 1.0, 2.0}, {{}, {1.0, 2.0, 3.0}, {4.0, 8.0, 12.0}}};
    EXPECT_EQ(t.at(0.0).g1e1, 0.0);
    EXPECT_DOUBLE_EQ(t.at(2.0).ef, 12.0);
    EXPECT_NEAR(t.at(1.5).g2e2, 2.0 * 2.25, 1e-12);
    EXPECT_NEAR(t.at(0.5).g1e1, 0.25, 1e-12);
    EXPECT_THROW((void)(StarkTable{}).at(1.0), ConfigError);
}

TEST(StarkTable, CalibratedShiftsGrowQuadratically) {
    const auto t = build_stark_table(DeviceParams{}, {0.0, 0.5, 1.0}, true);
    EXPECT_EQ(t.shifts[0].g1e1, 0.0);
    EXPECT_EQ(t.shifts[0].ef, 0.0);
    EXPECT_LT(std::abs(t.shifts[1].g1e1), std::abs(t.shifts[2].g1e1));
    const double exponent = std::log(t.shifts[2].g1e1 / t.shifts[1].g1e1) / std::log(2.0);
    EXPECT_NEAR(exponent, 2.0, 0.3);
    EXPECT_THROW(build_stark_table(DeviceParams{}, {0.5}, true), ConfigError);
}

TEST(StarkTable, CalibrationImprovesGate) {
    const DeviceParams p;
    const auto qq = SpaceLayout::qutrit_qubit();
    DriveConfig d;
    d.zeno_eps_mhz = 2.0;
    d.stark = StarkShifts{};
    const GateProtocol raw{plus_state(qq), d, p, {1.0}, GateModel::full_cavity, {}};
    const double f_raw = summarize_gate_state(run_gate(raw).back()).fidelity;
    d.stark = calibrate_stark(p, d);
    const GateProtocol cal{plus_state(qq), d, p, {1.0}, GateModel::full_cavity, {}};
    const double f_cal = summarize_gate_state(run_gate(cal).back()).fidelity;
    EXPECT_GT(f_cal, f_raw);
}

#include <gtest/gtest.h>

#include <random>

#include "zenosim/device.hpp"

using namespace zenosim;

namespace {

const SpaceLayout kLayout = SpaceLayout::qutrit_qubit_cavity(6);

double diag(const DeviceParams& p, const std::string& q1, const std::string& q2, std::size_t n) {
    const auto i = static_cast<Eigen::Index>(kLayout.index({q1, q2, std::to_string(n)}));
    return build_dispersive_h(p, kLayout).matrix()(i, i).real();
}

}  // namespace

TEST(Dispersive, GroundStateOnlySelfKerr) {
    DeviceParams p;
    EXPECT_NEAR(diag(p, "g", "g", 1), mhz_to_angular(0.5 * p.self_kerr_mhz), 1e-12);
    EXPECT_NEAR(diag(p, "g", "g", 0), 0.0, 1e-12);
}

TEST(Dispersive, QutritExcitedPullsCavity) {
    DeviceParams p;
    EXPECT_NEAR(diag(p, "e", "g", 1), mhz_to_angular(-4.25 + 0.5 * p.self_kerr_mhz), 1e-12);
}

TEST(Dispersive, FeTwoPhotons) {
    DeviceParams p;
    const double expect = mhz_to_angular(2.0 * (p.chif_mhz + p.chi2_mhz) + p.alpha1_mhz + 0.5 * p.self_kerr_mhz * 4.0);
    EXPECT_NEAR(diag(p, "f", "e", 2), expect, 1e-10);
}

TEST(Dispersive, ResidualZZOnlyWhenEnabled) {
    DeviceParams p;
    const double off = diag(p, "e", "e", 0);
    p.residual_zz_on = true;
    EXPECT_NEAR(diag(p, "e", "e", 0) - off, mhz_to_angular(0.030), 1e-12);
}

TEST(Drives, DefaultOffsets) {
    DeviceParams p;
    const auto f = drive_frequencies(p);
    EXPECT_NEAR(f.zeno_offset_mhz, -14.35, 1e-12);
    EXPECT_NEAR(f.symmetric_offset_mhz, 5.65, 1e-12);
}

TEST(Drives, SymmetricLineDegenerate) {
    DeviceParams p;
    p.chif_mhz = p.chi2_mhz;
    EXPECT_NEAR(drive_frequencies(p).symmetric_offset_mhz, 0.0, 1e-15);
}

TEST(Drives, ZeroAmplitudeGivesZeroOperator) {
    DeviceParams p;
    DriveConfig d;
    d.zeno_eps_mhz = 0.0;
    EXPECT_EQ(build_drive_terms(p, d, kLayout, 0.3).matrix().norm(), 0.0);
}

TEST(Drives, InitialZenoTerm) {
    DeviceParams p;
    DriveConfig d;
    d.zeno_eps_mhz = 1.5;
    d.symmetric_on = false;
    const Matrix a = annihilation(kLayout, kCavity).matrix();
    const Matrix expect = kI * mhz_to_angular(1.5) * (a - a.adjoint());
    EXPECT_LT((build_drive_terms(p, d, kLayout, 0.0).matrix() - expect).norm(), 1e-12);
}

TEST(Drives, HermitianAtRandomTimes) {
    DeviceParams p;
    DriveConfig d;
    d.stark = StarkShifts{0.1, -0.2, 0.3};
    const auto h = full_sim_hamiltonian(p, d, kLayout);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int k = 0; k < 20; ++k) EXPECT_LT(relative_hermiticity_defect(h.matrix_at(u(rng))), 1e-12);
}

TEST(FullHamiltonian, ReducesToDispersive) {
    DeviceParams p;
    DriveConfig d;
    d.rabi_mhz = 0.0;
    d.zeno_eps_mhz = 0.0;
    const auto h = full_sim_hamiltonian(p, d, kLayout);
    EXPECT_LT((h.matrix_at(0.7) - build_dispersive_h(p, kLayout).matrix()).norm(), 1e-12);
}

TEST(FullHamiltonian, RabiMatrixElement) {
    DeviceParams p;
    DriveConfig d;
    d.rabi_mhz = 1.0;
    d.zeno_eps_mhz = 0.0;
    d.stark = StarkShifts{};
    const Matrix h = full_sim_hamiltonian(p, d, kLayout).matrix_at(0.0);
    for (std::size_t n = 0; n < 6; ++n) {
        const auto fg = static_cast<Eigen::Index>(kLayout.index({"f", "g", std::to_string(n)}));
        const auto eg = static_cast<Eigen::Index>(kLayout.index({"e", "g", std::to_string(n)}));
        EXPECT_NEAR(std::abs(h(fg, eg)), kTwoPi * 0.5, 1e-12);
    }
}

TEST(FullHamiltonian, RequiresStarkWhenDriven) {
    DeviceParams p;
    DriveConfig d;
    EXPECT_THROW(full_sim_hamiltonian(p, d, kLayout), ConfigError);
}

TEST(FullHamiltonian, FrozenStateEnergyIsReal) {
    DeviceParams p;
    DriveConfig d;
    d.stark = StarkShifts{};
    const auto h = full_sim_hamiltonian(p, d, kLayout);
    std::mt19937_64 rng(3);
    Vector psi(static_cast<Eigen::Index>(kLayout.total_dim()));
    for (auto& c : psi) c = cplx(std::normal_distribution<double>()(rng), std::normal_distribution<double>()(rng));
    psi.normalize();
    for (double t : {0.0, 0.11, 0.5, 1.37}) {
        const cplx e = psi.dot(h.matrix_at(t) * psi);
        EXPECT_LT(std::abs(e.imag()), 1e-10 * std::max(1.0, std::abs(e)));
    }
}

TEST(Collapse, InfiniteCoherenceLeavesCavityOnly) {
    const auto p = DeviceParams{}.with_infinite_coherence();
    const auto ch = collapse_channels(p, kLayout);
    ASSERT_EQ(ch.size(), 1u);
    EXPECT_EQ(ch[0].label, "cavity_decay");
    const Matrix a = annihilation(kLayout, kCavity).matrix();
    EXPECT_LT((ch[0].op.matrix() - std::sqrt(kTwoPi * 0.15) * a).norm(), 1e-12);
}

TEST(Collapse, QubitDephasingRate) {
    EXPECT_NEAR(pure_dephasing_rate(18.9, 15.7), 1.0 / 15.7 - 1.0 / 37.8, 1e-12);
    EXPECT_NEAR(pure_dephasing_rate(18.9, 15.7), 0.0372, 5e-5);
    EXPECT_EQ(pure_dephasing_rate(kInf, kInf), 0.0);
    EXPECT_THROW(pure_dephasing_rate(1.0, 3.0), ConfigError);
}

TEST(Collapse, DefaultsChannelCount) {
    const auto ch = collapse_channels(DeviceParams{}, kLayout);
    EXPECT_EQ(ch.size(), 7u);
}

TEST(Params, InvariantsChecked) {
    DeviceParams p;
    p.kappa_mhz = -1.0;
    EXPECT_THROW(p.check(), ConfigError);
    p = DeviceParams{};
    p.t1_q2_us = 0.0;
    EXPECT_THROW(p.check(), ConfigError);
    p = DeviceParams{};
    EXPECT_TRUE(p.warnings().empty());
    p.kappa_mhz = 0.5;
    EXPECT_EQ(p.warnings().size(), 2u);
    p.kappa_mhz = 1.1;
    EXPECT_EQ(p.warnings().size(), 3u);
    DriveConfig d;
    d.zeno_eps_mhz = -0.1;
    EXPECT_THROW(d.check(), ConfigError);
}

TEST(Params, GateTimeDefaultsToInverseRabi) {
    DriveConfig d;
    d.rabi_mhz = 0.1;
    EXPECT_DOUBLE_EQ(d.gate_time(), 10.0);
    d.gate_time_us = 2.0;
    EXPECT_DOUBLE_EQ(d.gate_time(), 2.0);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "zenosim/traject.hpp"
#include "zenosim/zeno.hpp"

using namespace zenosim;

namespace {

// Asymptotic Kolmogorov distribution tail with the Stephens small-sample correction.
double ks_p_value(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

std::vector<std::uint64_t> seeds(std::size_t n, std::uint64_t base = 1) {
    std::vector<std::uint64_t> s(n);
    std::iota(s.begin(), s.end(), base);
    return s;
}

EvolutionProblem driven_cavity(std::size_t n, double kappa, double drive, double t_end) {
    const auto cav = SpaceLayout::cavity(n);
    const Matrix a = annihilation(cav, 0).matrix();
    EvolutionProblem pb;
    pb.hamiltonian = TimeDependentHamiltonian(cav, drive * (a + a.adjoint()));
    pb.collapse_ops = {std::sqrt(kappa) * annihilation(cav, 0)};
    pb.initial = basis_state(cav, {std::size_t{0}});
    pb.t_end = t_end;
    pb.dt = 2e-3;
    pb.sample_times = linspace_times(0.0, t_end, 6);
    return pb;
}

}  // namespace

TEST(Trajectory, NoCollapseIsSchrodinger) {
    const auto qq = SpaceLayout::qutrit_qubit();
    auto pb = build_ideal_zeno_problem(kTwoPi, 0.0, zeno_projector(qq), plus_state(qq), 0.8);
    pb.sample_times = {0.3, 0.8};
    const auto rec = run_trajectory(pb, 42);
    EXPECT_TRUE(rec.jump_log.empty());
    EXPECT_FALSE(rec.escaped);
    const auto master = evolve_master(pb);
    ASSERT_EQ(rec.samples.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i)
        EXPECT_LT((rec.samples[i].density_matrix() - master[i].density_matrix()).norm(), 1e-9);
}

TEST(Trajectory, ExponentialJumpLaw) {
    const auto q = SpaceLayout::qubit();
    const double gamma = 1.0;
    EvolutionProblem pb;
    pb.hamiltonian = TimeDependentHamiltonian(q, Matrix::Zero(2, 2));
    pb.collapse_ops = {std::sqrt(gamma) * transition(q, 0, "g", "e")};
    pb.initial = basis_state(q, {"e"});
    pb.t_end = 12.0 / gamma;
    pb.dt = 2e-3;
    pb.sample_times = {pb.t_end};
    const auto recs = run_trajectories(pb, seeds(10000));
    std::vector<double> t;
    std::size_t censored = 0;
    for (const auto& r : recs) {
        ASSERT_LE(r.jump_log.size(), 1u);
        if (r.jump_log.empty())
            ++censored;
        else
            t.push_back(r.jump_log.front().time);
    }
    EXPECT_LT(censored, 5u);
    std::sort(t.begin(), t.end());
    const double n = static_cast<double>(recs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double cdf = 1.0 - std::exp(-gamma * t[i]);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - cdf), std::abs(static_cast<double>(i) / n - cdf)});
    }
    EXPECT_GT(ks_p_value(d, recs.size()), 0.01) << "KS statistic " << d;
}

TEST(Trajectory, CavityDecayEnsembleMatchesMaster) {
    const std::size_t n = 10;
    auto pb = driven_cavity(n, 1.0, 0.6, 3.0);
    const auto master = evolve_master(pb);
    const auto recs = run_trajectories(pb, seeds(2000, 100));
    const auto cav = SpaceLayout::cavity(n);
    const Matrix a = annihilation(cav, 0).matrix();
    const Matrix num = a.adjoint() * a;
    for (std::size_t k = 0; k < pb.sample_times.size(); ++k) {
        std::vector<double> v;
        for (const auto& r : recs) v.push_back((r.samples[k].density_matrix() * num).trace().real());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double se = std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
        const double expect = (master[k].density_matrix() * num).trace().real();
        EXPECT_LE(std::abs(mean - expect), 3.0 * se + 1e-9) << "t = " << pb.sample_times[k];
    }
}

TEST(Trajectory, DeterministicForSeedAndJobs) {
    auto pb = driven_cavity(6, 1.0, 0.8, 2.0);
    const auto a = run_trajectories(pb, seeds(16, 5), {}, 1);
    const auto b = run_trajectories(pb, seeds(16, 5), {}, 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].seed, b[i].seed);
        EXPECT_EQ(a[i].jump_log.size(), b[i].jump_log.size());
        EXPECT_EQ((a[i].final_state.density_matrix() - b[i].final_state.density_matrix()).norm(), 0.0);
    }
    const auto c = run_trajectory(pb, 5);
    EXPECT_EQ((c.final_state.density_matrix() - a[0].final_state.density_matrix()).norm(), 0.0);
}

TEST(Trajectory, MixedInitialStateSampled) {
    const auto q = SpaceLayout::qubit();
    EvolutionProblem pb;
    pb.hamiltonian = TimeDependentHamiltonian(q, Matrix::Zero(2, 2));
    pb.initial = QuantumState::mixed(q, Eigen::Vector2cd(0.3, 0.7).asDiagonal().toDenseMatrix());
    pb.t_end = 0.1;
    pb.sample_times = {0.1};
    const auto recs = run_trajectories(pb, seeds(4000));
    std::size_t excited = 0;
    for (const auto& r : recs) excited += r.final_state.population(1) > 0.5 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(excited) / 4000.0, 0.7, 0.03);
}

TEST(Ensemble, SingleRecordIsItsProjector) {
    const auto qq = SpaceLayout::qutrit_qubit();
    const auto s = plus_state(qq);
    const auto avg = ensemble_average(std::vector<QuantumState>{s}, qq);
    EXPECT_LT((avg.mean.density_matrix() - s.density_matrix()).norm(), 1e-15);
    EXPECT_EQ(avg.std_error.maxCoeff(), 0.0);
}

TEST(Ensemble, OrthogonalPairIsRankTwo) {
    const auto qq = SpaceLayout::qutrit_qubit();
    const auto avg = ensemble_average({basis_state(qq, {"g", "g"}), basis_state(qq, {"e", "e"})}, qq);
    Eigen::SelfAdjointEigenSolver<Matrix> es(avg.mean.density_matrix());
    const Eigen::VectorXd ev = es.eigenvalues();
    EXPECT_NEAR(ev(5), 0.5, 1e-15);
    EXPECT_NEAR(ev(4), 0.5, 1e-15);
    EXPECT_NEAR(ev(3), 0.0, 1e-15);
    EXPECT_THROW(ensemble_average(std::vector<QuantumState>{}, qq), ConfigError);
}

TEST(Detector, PerfectDetectionCopiesFlag) {
    TrajectoryRecord r;
    for (std::uint64_t s = 0; s < 200; ++s) {
        r.seed = s;
        r.escaped = (s % 3) == 0;
        EXPECT_EQ(escape_detector(r, 1.0), r.escaped);
    }
    EXPECT_THROW(escape_detector(r, 0.5), ConfigError);
}

TEST(Detector, FlagFractions) {
    TrajectoryRecord r;
    std::size_t hits = 0, false_pos = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        r.seed = s;
        r.escaped = true;
        hits += escape_detector(r, 0.75) ? 1 : 0;
        r.escaped = false;
        false_pos += escape_detector(r, 0.75, 9) ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(hits) / 1e4, 0.75, 0.02);
    EXPECT_NEAR(static_cast<double>(false_pos) / 1e4, 0.25, 0.02);
}

// Gate setting on a reduced cavity: the mean |fe> population of the records
// matches the master equation.
TEST(Trajectory, GateFePopulationMatchesMaster) {
    DeviceParams p;
    DriveConfig d;
    d.rabi_mhz = 1.0;
    d.zeno_eps_mhz = 1.0;
    d.stark = StarkShifts{};
    SimSettings sim;
    sim.fock = 10;
    const GateProtocol g{plus_state(SpaceLayout::qutrit_qubit()), d, p, {1.0}, GateModel::full_cavity, sim};
    const auto gp = build_gate_problem(g);
    const double master_fe = gp.reduce(evolve_master(gp.problem).back(), 1.0).population(kFE);
    TrajectoryOptions o;
    o.escape_indices = fe_manifold(gp.problem.hamiltonian.layout());
    const auto recs = run_trajectories(gp.problem, seeds(300, 77), o);
    std::vector<double> v;
    std::size_t escaped = 0;
    for (const auto& r : recs) {
        v.push_back(gp.reduce(r.final_state, 1.0).population(kFE));
        escaped += r.escaped ? 1 : 0;
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    const double se = std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    EXPECT_LE(std::abs(m - master_fe), 3.0 * se);
    EXPECT_GT(escaped, 0u);
}

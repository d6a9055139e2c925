#include <gtest/gtest.h>

#include <random>

#include "zenosim/tomo.hpp"

using namespace zenosim;

namespace {

const SpaceLayout kQQ = SpaceLayout::qutrit_qubit();

QuantumState random_full_rank(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Matrix g(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j) g(i, j) = cplx(n(rng), n(rng));
    Matrix rho = g * g.adjoint();
    return QuantumState::mixed(kQQ, rho / rho.trace().real());
}

std::size_t index_of(const ObservableSet& s, const std::string& label) {
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s.observables[k].label == label) return k;
    throw std::runtime_error("missing observable " + label);
}

}  // namespace

TEST(Observables, CountAndSpan) {
    const auto s = build_observable_set();
    EXPECT_EQ(s.size(), 36u);
    const double cond = s.gram_condition();
    EXPECT_TRUE(std::isfinite(cond));
    EXPECT_NEAR(cond, 1.5, 1e-9);
    EXPECT_EQ(s.observables.front().label, "IxI");
}

TEST(Observables, IdentityExpectationIsOne) {
    const auto s = build_observable_set();
    std::mt19937_64 rng(3);
    const auto d = exact_tomogram(random_full_rank(rng).density_matrix(), s);
    EXPECT_NEAR(d.expectations[index_of(s, "IxI")], 1.0, 1e-12);
}

TEST(Observables, PreRotationMapsTopEigenvectorToGG) {
    for (const auto& o : build_observable_set().observables) {
        const Matrix rotated = o.pre_rotation * o.op * o.pre_rotation.adjoint();
        EXPECT_NEAR(rotated(0, 0).real(), o.hi, 1e-12) << o.label;
    }
}

TEST(Simulate, ExactPopulationProbability) {
    const auto s = build_observable_set();
    const auto d = simulate_tomography(basis_state(kQQ, {"g", "g"}), s, 0, 1);
    const auto k = index_of(s, "L3xZ");
    EXPECT_DOUBLE_EQ(s.observables[k].mapped_probability(d.expectations[k]), 1.0);
    EXPECT_EQ(d.shots[k], 0u);
}

TEST(Simulate, ShotNoiseWithinBinomialBound) {
    const auto s = build_observable_set();
    std::mt19937_64 rng(5);
    const auto rho = random_full_rank(rng);
    const auto exact = exact_tomogram(rho.density_matrix(), s);
    const std::uint64_t shots = 10000;
    std::size_t inside = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto d = simulate_tomography(rho, s, shots, seed);
        for (std::size_t k = 0; k < s.size(); ++k) {
            ++total;
            if (std::abs(d.expectations[k] - exact.expectations[k]) <= 4.0 / std::sqrt(static_cast<double>(shots)))
                ++inside;
        }
    }
    EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.99);
}

TEST(Simulate, TableSchema) {
    const auto s = build_observable_set();
    const auto t = simulate_tomography(basis_state(kQQ, {"g", "e"}), s, 100, 2).to_table();
    EXPECT_EQ(t.columns, (std::vector<std::string>{"observable", "expectation", "shots"}));
    EXPECT_EQ(t.rows.size(), 36u);
}

TEST(Mle, RandomFullRankRoundTrip) {
    const auto s = build_observable_set();
    std::mt19937_64 rng(11);
    for (int k = 0; k < 5; ++k) {
        const auto rho = random_full_rank(rng);
        const auto est = mle_reconstruct(exact_tomogram(rho.density_matrix(), s));
        EXPECT_LT(trace_distance(est, rho), 1e-8);
        EXPECT_TRUE(validate(est).valid());
    }
}

TEST(Mle, PostGateStateRoundTrip) {
    const auto s = build_observable_set();
    Matrix rho = 0.97 * gate_target_state().density_matrix();
    rho(kFE, kFE) += 0.02;
    rho(kFG, kFG) += 0.01;
    const auto truth = QuantumState::mixed(kQQ, rho);
    const auto est = mle_reconstruct(exact_tomogram(rho, s));
    EXPECT_LT(trace_distance(est, truth), 1e-8);
}

TEST(Mle, TraceDeficitBecomesMixedState) {
    const auto s = build_observable_set();
    std::mt19937_64 rng(19);
    const auto rho = random_full_rank(rng);
    const auto est = mle_reconstruct(exact_tomogram(0.8 * rho.density_matrix(), s));
    const auto expect =
        QuantumState::mixed(kQQ, 0.8 * rho.density_matrix() + 0.2 / 6.0 * Matrix::Identity(6, 6));
    EXPECT_LT(trace_distance(est, expect), 0.02);
}

TEST(Mle, ShotNoisePureState) {
    const auto s = build_observable_set();
    const auto target = gate_target_state();
    const auto est = mle_reconstruct(simulate_tomography(target, s, 10000, 23));
    EXPECT_GE(state_fidelity(est, target), 0.98);
    EXPECT_TRUE(validate(est).valid());
}

TEST(Mle, RejectsNonSpanningData) {
    auto d = exact_tomogram(Matrix::Identity(6, 6) / 6.0, build_observable_set());
    d.set.observables.resize(10);
    d.expectations.resize(10);
    d.shots.resize(10);
    d.set.gram = d.set.gram.topLeftCorner(10, 10).eval();
    EXPECT_THROW(mle_reconstruct(d), ConfigError);
}

namespace {

Vector coherent(std::size_t n, cplx alpha) {
    Vector v(static_cast<Eigen::Index>(n));
    double fact = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k) fact *= static_cast<double>(k);
        v(static_cast<Eigen::Index>(k)) = std::exp(-0.5 * std::norm(alpha)) * std::pow(alpha, static_cast<double>(k)) /
                                          std::sqrt(fact);
    }
    return v;
}

}  // namespace

TEST(Truncation, ConfinedStateUnchanged) {
    const std::size_t n = 8;
    const auto l = SpaceLayout::qutrit_qubit_cavity(n);
    Vector c = Vector::Zero(static_cast<Eigen::Index>(n));
    c(0) = 0.8;
    c(2) = 0.6;
    const Vector psi = kron(gate_target_state().vector(), c);
    const auto full = QuantumState::pure(l, psi);
    const auto plain = mle_reconstruct(
        exact_tomogram(partial_trace(full, {0, 1}).density_matrix(), build_observable_set()));
    EXPECT_LT(trace_distance(truncation_model(full, 3), plain), 1e-10);
    EXPECT_LT(trace_distance(truncation_model(full, n - 1), plain), 1e-10);
}

TEST(Truncation, EscapedPhotonsRemoved) {
    const std::size_t n = 20;
    const auto l = SpaceLayout::qutrit_qubit_cavity(n);
    Vector vac = Vector::Zero(static_cast<Eigen::Index>(n));
    vac(0) = 1.0;
    Vector comp = gate_target_state().vector();
    Vector fe = Vector::Zero(6);
    fe(kFE) = 1.0;
    const Vector psi = std::sqrt(0.7) * kron(comp, vac) + std::sqrt(0.3) * kron(fe, coherent(n, 3.0));
    const auto full = QuantumState::normalized(l, psi);
    const auto whole = truncation_model(full, n - 1);
    const auto cut = truncation_model(full, 5);
    EXPECT_LT(cut.population(kFE), whole.population(kFE));
    EXPECT_LT(cut.purity(), whole.purity());
    EXPECT_LT(trace_distance(whole, partial_trace(full, {0, 1})), 1e-8);
}

namespace {

struct Synthetic {
    std::vector<QuantumState> states;
    std::vector<TrajectoryRecord> records;
};

Synthetic synthetic_ensemble(std::size_t n, double escape_rate) {
    Synthetic s;
    Matrix bad = Matrix::Zero(6, 6);
    bad(kFE, kFE) = 0.6;
    bad(kGG, kGG) = 0.4;
    for (std::size_t i = 0; i < n; ++i) {
        TrajectoryRecord r;
        r.seed = splitmix64(i);
        r.escaped = static_cast<double>(i % 100) < 100.0 * escape_rate;
        s.states.push_back(r.escaped ? QuantumState::mixed(kQQ, bad) : gate_target_state().as_mixed());
        s.records.push_back(r);
    }
    return s;
}

}  // namespace

TEST(Postselect, ZeroFractionIsUnselected) {
    const auto e = synthetic_ensemble(400, 0.2);
    std::vector<bool> flags;
    for (const auto& r : e.records) flags.push_back(r.escaped);
    const auto t = postselect_analysis(e.states, e.records, flags, gate_target_state(), {0.0});
    const auto avg = ensemble_average(e.states, kQQ).mean;
    EXPECT_EQ(t.columns, (std::vector<std::string>{"discard_fraction", "kept", "fidelity", "concurrence"}));
    EXPECT_NEAR(t.number(0, "fidelity"), state_fidelity(avg, gate_target_state()), 1e-14);
    EXPECT_EQ(t.number(0, "kept"), 400.0);
}

TEST(Postselect, PerfectDetectorBeatsNoisyDetector) {
    const auto e = synthetic_ensemble(2000, 0.2);
    const std::vector<double> fractions{0.0, 0.1, 0.2, 0.3};
    auto run = [&](double fd) {
        std::vector<bool> flags;
        for (const auto& r : e.records) flags.push_back(escape_detector(r, fd, 1));
        return postselect_analysis(e.states, e.records, flags, gate_target_state(), fractions);
    };
    const auto ideal = run(1.0);
    const auto noisy = run(0.75);
    EXPECT_GT(ideal.number(2, "fidelity"), ideal.number(0, "fidelity"));
    EXPECT_NEAR(ideal.number(2, "fidelity"), 1.0, 1e-12);
    EXPECT_GT(noisy.number(2, "fidelity"), noisy.number(0, "fidelity"));
    EXPECT_LT(noisy.number(3, "fidelity"), ideal.number(3, "fidelity"));
    EXPECT_THROW(postselect_analysis(e.states, e.records, std::vector<bool>(2000, false), gate_target_state(), {1.0}),
                 ConfigError);
}

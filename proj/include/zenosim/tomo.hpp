#pragma once

// Simulated qutrit x qubit tomography, maximum-likelihood reconstruction,
// the Fock-cutoff mapping model and post-selection analysis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zenosim/metrics.hpp"
#include "zenosim/qcore.hpp"
#include "zenosim/sweep.hpp"
#include "zenosim/traject.hpp"
#include "zenosim/zeno.hpp"

namespace zenosim {

struct Observable {
    std::string label;
    Matrix op;
    Matrix pre_rotation;  // maps the top eigenvector to |gg>, the rest in descending eigenvalue order
    double lo = 0.0;      // spectral range
    double hi = 0.0;

    /// Probability of the binary outcome with effect (O - lo)/(hi - lo).
    [[nodiscard]] double mapped_probability(double expectation) const {
        if (hi - lo < 1e-12) return 1.0;
        return std::clamp((expectation - lo) / (hi - lo), 0.0, 1.0);
    }
};

struct ObservableSet {
    std::vector<Observable> observables;
    Eigen::MatrixXd gram;  // Hilbert-Schmidt inner products

    [[nodiscard]] std::size_t size() const { return observables.size(); }
    [[nodiscard]] double gram_condition() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    }
};

namespace detail {

inline std::vector<std::pair<std::string, Matrix>> gell_mann3() {
    const auto e = [](int i, int j) {
        Matrix m = Matrix::Zero(3, 3);
        m(i, j) = 1.0;
        return m;
    };
    std::vector<std::pair<std::string, Matrix>> out;
    out.emplace_back("I", Matrix::Identity(3, 3));
    out.emplace_back("L1", e(0, 1) + e(1, 0));
    out.emplace_back("L2", -kI * e(0, 1) + kI * e(1, 0));
    out.emplace_back("L3", e(0, 0) - e(1, 1));
    out.emplace_back("L4", e(0, 2) + e(2, 0));
    out.emplace_back("L5", -kI * e(0, 2) + kI * e(2, 0));
    out.emplace_back("L6", e(1, 2) + e(2, 1));
    out.emplace_back("L7", -kI * e(1, 2) + kI * e(2, 1));
    out.emplace_back("L8", (e(0, 0) + e(1, 1) - 2.0 * e(2, 2)) / std::sqrt(3.0));
    return out;
}

inline std::vector<std::pair<std::string, Matrix>> pauli() {
    Matrix x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, -kI, kI, 0;
    z << 1, 0, 0, -1;
    return {{"I", Matrix::Identity(2, 2)}, {"X", x}, {"Y", y}, {"Z", z}};
}

}  // namespace detail

/// Gell-Mann (qutrit) x Pauli (qubit), 36 operators including the identity.
inline ObservableSet build_observable_set() {
    ObservableSet set;
    for (const auto& [la, a] : detail::gell_mann3())
        for (const auto& [lb, b] : detail::pauli()) {
            Observable o;
            o.label = la + "x" + lb;
            o.op = kron(a, b);
            Eigen::SelfAdjointEigenSolver<Matrix> es(o.op);
            o.lo = es.eigenvalues()(0);
            o.hi = es.eigenvalues()(5);
            o.pre_rotation = es.eigenvectors().rowwise().reverse().adjoint();
            set.observables.push_back(std::move(o));
        }
    const auto n = static_cast<Eigen::Index>(set.size());
    set.gram.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            set.gram(i, j) =
                (set.observables[static_cast<std::size_t>(i)].op * set.observables[static_cast<std::size_t>(j)].op)
                    .trace()
                    .real();
    return set;
}

struct TomogramData {
    ObservableSet set;
    std::vector<double> expectations;
    std::vector<std::uint64_t> shots;  // 0 means exact
    double postselect_fraction = 0.0;

    [[nodiscard]] SweepResult to_table() const {
        SweepResult t({"observable", "expectation", "shots"});
        for (std::size_t k = 0; k < set.size(); ++k)
            t.add_row({set.observables[k].label, expectations[k], static_cast<std::int64_t>(shots[k])});
        return t;
    }
};

/// Expectations tr(O rho) of a possibly trace-deficient 6x6 matrix.
inline TomogramData exact_tomogram(const Matrix& rho, const ObservableSet& set) {
    if (rho.rows() != 6 || rho.cols() != 6) throw DimensionError("tomography expects a qutrit x qubit matrix");
    TomogramData d;
    d.set = set;
    for (const auto& o : set.observables) {
        d.expectations.push_back((o.op * rho).trace().real());
        d.shots.push_back(0);
    }
    return d;
}

inline TomogramData simulate_tomography(const QuantumState& rho, const ObservableSet& set, std::uint64_t shots,
                                        std::uint64_t seed) {
    if (rho.layout().dims() != std::vector<std::size_t>{3, 2})
        throw DimensionError("tomography expects a qutrit x qubit state");
    auto d = exact_tomogram(rho.density_matrix(), set);
    if (shots == 0) return d;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto& o = set.observables[k];
        const double p = o.mapped_probability(d.expectations[k]);
        std::binomial_distribution<std::uint64_t> bin(shots, p);
        const double freq = static_cast<double>(bin(rng)) / static_cast<double>(shots);
        d.expectations[k] = o.hi - o.lo < 1e-12 ? o.hi : o.lo + (o.hi - o.lo) * freq;
        d.shots[k] = shots;
    }
    return d;
}

struct MleOptions {
    double dilution = 0.1;
    double tol = 1e-10;
    std::size_t max_iterations = 10000;
    double eigen_floor = 1e-6;
};

struct MleResult {
    QuantumState state;
    std::size_t iterations = 0;
    double log_likelihood = 0.0;
};

namespace detail {

inline std::vector<double> tomo_weights(const TomogramData& d) {
    std::vector<double> w;
    for (std::size_t k = 0; k < d.set.size(); ++k) {
        if (d.shots[k] == 0) {
            w.push_back(1.0);
            continue;
        }
        const auto& o = d.set.observables[k];
        const double p = std::clamp(o.mapped_probability(d.expectations[k]), 0.5 / static_cast<double>(d.shots[k]),
                                    1.0 - 0.5 / static_cast<double>(d.shots[k]));
        const double var = (o.hi - o.lo) * (o.hi - o.lo) * p * (1.0 - p) / static_cast<double>(d.shots[k]);
        w.push_back(var > 0.0 ? 1.0 / var : 1.0);
    }
    return w;
}

inline double tomo_log_likelihood(const TomogramData& d, const std::vector<double>& w, const Matrix& rho) {
    double l = 0.0;
    for (std::size_t k = 0; k < d.set.size(); ++k) {
        const double r = d.expectations[k] - (d.set.observables[k].op * rho).trace().real();
        l -= 0.5 * w[k] * r * r;
    }
    return l;
}

}  // namespace detail

/// Gaussian-likelihood estimate over density matrices. Starts from linear inversion with the
/// trace deficit filled by I/6, projected to the positive cone when needed, then runs the
/// diluted R rho R ascent.
inline MleResult mle_reconstruct_detailed(const TomogramData& data, const MleOptions& o = {}) {
    const auto& set = data.set;
    if (set.size() != data.expectations.size() || set.size() != data.shots.size())
        throw DimensionError("tomogram size mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(set.gram);
    if (set.size() < 36 || lu.rank() < 36) throw ConfigError("observables do not span the operator space");

    const auto n = static_cast<Eigen::Index>(set.size());
    Eigen::VectorXd e(n);
    for (Eigen::Index k = 0; k < n; ++k) e(k) = data.expectations[static_cast<std::size_t>(k)];
    const Eigen::VectorXd c = lu.solve(e);
    Matrix rho = Matrix::Zero(6, 6);
    for (Eigen::Index k = 0; k < n; ++k) rho += c(k) * set.observables[static_cast<std::size_t>(k)].op;
    rho = 0.5 * (rho + rho.adjoint());
    rho += (1.0 - rho.trace().real()) / 6.0 * Matrix::Identity(6, 6);

    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    if (es.eigenvalues().minCoeff() < 0.0) {
        // Roundoff-level negatives come from rank-deficient data and are clipped to zero;
        // genuinely negative estimates get a floor so the iteration can move off the boundary.
        const double floor = es.eigenvalues().minCoeff() > -1e-12 ? 0.0 : o.eigen_floor;
        const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
        rho = es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
        rho /= rho.trace().real();
    }

    const auto w = detail::tomo_weights(data);
    MleResult res;
    double ll = detail::tomo_log_likelihood(data, w, rho);
    double step = -1.0;
    for (; res.iterations < o.max_iterations; ++res.iterations) {
        Matrix g = Matrix::Zero(6, 6);
        for (std::size_t k = 0; k < set.size(); ++k) {
            const double r = data.expectations[k] - (set.observables[k].op * rho).trace().real();
            g += (w[k] * r) * set.observables[k].op;
        }
        const double gn = spectral_norm(g);
        if (gn < 1e-300) break;
        if (step < 0.0) step = o.dilution / gn;
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            const Matrix r = Matrix::Identity(6, 6) + step * g;
            Matrix next = r * rho * r.adjoint();
            next /= next.trace().real();
            next = 0.5 * (next + next.adjoint());
            const double ll_next = detail::tomo_log_likelihood(data, w, next);
            if (ll_next >= ll) {
                const double gain = ll_next - ll;
                rho = std::move(next);
                ll = ll_next;
                accepted = true;
                step *= 1.5;
                if (gain < o.tol) {
                    res.state = QuantumState::unchecked(SpaceLayout::qutrit_qubit(), rho);
                    res.log_likelihood = ll;
                    return res;
                }
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) break;  // no ascent direction left at machine precision
    }
    if (!std::isfinite(ll)) throw NumericalError("likelihood iteration diverged");
    res.state = QuantumState::unchecked(SpaceLayout::qutrit_qubit(), rho);
    res.log_likelihood = ll;
    return res;
}

inline QuantumState mle_reconstruct(const TomogramData& data) { return mle_reconstruct_detailed(data).state; }

/// Drops cavity components above n_cut, traces the cavity out, and reconstructs the
/// trace-deficient qutrit x qubit data. frame_phase rotates the f level as in the gate runs.
inline QuantumState truncation_model(const QuantumState& full, std::size_t n_cut, double frame_phase = 0.0) {
    const auto& layout = full.layout();
    if (layout.rank() != 3 || layout.dims()[0] != 3 || layout.dims()[1] != 2)
        throw DimensionError("truncation model expects a qutrit x qubit x cavity state");
    const auto nf = layout.dims()[2];
    Matrix rho = full.density_matrix();
    for (std::size_t i = 0; i < layout.total_dim(); ++i)
        if (layout.levels(i)[2] > n_cut) {
            rho.row(static_cast<Eigen::Index>(i)).setZero();
            rho.col(static_cast<Eigen::Index>(i)).setZero();
        }
    Matrix red = Matrix::Zero(6, 6);
    for (Eigen::Index a = 0; a < 6; ++a)
        for (Eigen::Index b = 0; b < 6; ++b)
            for (std::size_t n = 0; n < nf; ++n)
                red(a, b) += rho(a * static_cast<Eigen::Index>(nf) + static_cast<Eigen::Index>(n),
                                 b * static_cast<Eigen::Index>(nf) + static_cast<Eigen::Index>(n));
    red = rabi_frame_correction(red, frame_phase);
    return mle_reconstruct(exact_tomogram(red, build_observable_set()));
}

/// Fidelity and concurrence of post-selected ensembles. For each discard fraction the flagged
/// records go first, then unflagged ones, each group in seed order.
inline SweepResult postselect_analysis(const std::vector<QuantumState>& states,
                                       const std::vector<TrajectoryRecord>& records, const std::vector<bool>& flags,
                                       const QuantumState& target, const std::vector<double>& fractions) {
    if (states.size() != records.size() || flags.size() != records.size())
        throw DimensionError("states, records and flags must have equal length");
    if (states.empty()) throw ConfigError("no records to post-select");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (flags[a] != flags[b]) return static_cast<bool>(flags[a]);
        return records[a].seed < records[b].seed;
    });
    SweepResult out({"discard_fraction", "kept", "fidelity", "concurrence"});
    for (double f : fractions) {
        if (f < 0.0 || f > 1.0) throw ConfigError("discard fraction must lie in [0, 1]");
        const auto drop = static_cast<std::size_t>(std::llround(f * static_cast<double>(records.size())));
        if (drop >= records.size()) throw ConfigError("all records discarded");
        std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
        std::sort(kept.begin(), kept.end());
        std::vector<QuantumState> sel;
        sel.reserve(kept.size());
        for (auto i : kept) sel.push_back(states[i]);
        const auto avg = ensemble_average(sel, target.layout()).mean;
        out.add_row({f, static_cast<std::int64_t>(kept.size()), state_fidelity(avg, target),
                     concurrence(computational_projection(avg))});
    }
    return out;
}

}  // namespace zenosim

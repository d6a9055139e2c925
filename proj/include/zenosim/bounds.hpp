#pragma once

// Diamond-norm error bounds for the Zeno gate and a sampled lower estimate.
//
// Convention: unnormalized diamond norm, so the distance between two CPTP maps
// lies in [0, 2]. The sampled estimate reports both the trace-norm value in that
// convention and the trace distance (half of it).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "zenosim/lindblad.hpp"
#include "zenosim/qcore.hpp"
#include "zenosim/traject.hpp"
#include "zenosim/zeno.hpp"

namespace zenosim {

struct BoundInput {
    double h_norm = 0.0;  // rad/us
    double gamma = 0.0;   // 1/us
    double t = 0.0;       // us
};

inline double analytic_bound(const BoundInput& in) {
    if (!(in.h_norm > 0.0 && in.gamma > 0.0 && in.t > 0.0)) throw ConfigError("bound inputs must be positive");
    const double decay = std::exp(-in.t * in.gamma / 2.0);
    return 16.0 * in.h_norm / in.gamma * (1.0 + in.t * in.h_norm + (1.0 - decay) / 2.0) + decay;
}

/// Gate form: ||H|| = W/2, t = 2 pi / W, in terms of r = W / Gamma.
inline double gate_bound(double ratio) {
    if (!(ratio > 0.0)) throw ConfigError("ratio must be positive");
    const double decay = std::exp(-kPi / ratio);
    return 8.0 * ratio * (1.0 + kPi + (1.0 - decay) / 2.0) + decay;
}

inline double loosened_bound(double ratio) {
    if (!(ratio > 0.0)) throw ConfigError("ratio must be positive");
    return 38.0 * ratio;
}

/// Linear map on d x d matrices acting on column-stacked vectors: vec(S(X)) = S vec(X).
struct Superoperator {
    std::size_t dim = 0;
    Matrix s;

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        const auto d = static_cast<Eigen::Index>(dim);
        const Vector v = s * Eigen::Map<const Vector>(x.data(), d * d);
        return Eigen::Map<const Matrix>(v.data(), d, d);
    }

    /// sum_ij |i><j| x S(|i><j|), system factor first.
    [[nodiscard]] Matrix choi() const {
        const auto d = static_cast<Eigen::Index>(dim);
        Matrix c = Matrix::Zero(d * d, d * d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) c.block(i * d, j * d, d, d) = s.col(j * d + i).reshaped(d, d);
        return c;
    }
};

inline Superoperator unitary_channel(const Matrix& u) {
    if ((u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).norm() > 1e-9)
        throw InvariantError("matrix is not unitary");
    return {static_cast<std::size_t>(u.rows()), kron(u.conjugate(), u)};
}

/// Fully depolarizing channel X -> tr(X) I/d.
inline Superoperator depolarizing_channel(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix s = Matrix::Zero(n * n, n * n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) s(a * n + a, b * n + b) = 1.0 / static_cast<double>(d);
    return {d, std::move(s)};
}

/// Propagator of a master-equation problem from t_start to t_end. Each |i><j| is
/// recovered from the evolution of valid density matrices by polarization.
inline Superoperator channel_from_problem(EvolutionProblem pb) {
    const auto& layout = pb.hamiltonian.layout();
    const auto d = static_cast<Eigen::Index>(layout.total_dim());
    if (d > 6) throw DimensionError("channel estimates support dimension <= 6");
    pb.sample_times = {pb.t_end};
    auto run = [&](const Vector& psi) {
        pb.initial = QuantumState::pure(layout, psi);
        return evolve_master(pb).back().density_matrix();
    };
    std::vector<Matrix> diag(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) diag[static_cast<std::size_t>(i)] = run(Vector::Unit(d, i));
    Matrix s(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            Matrix out;
            if (i == j) {
                out = diag[static_cast<std::size_t>(i)];
            } else {
                const double r = 1.0 / std::sqrt(2.0);
                Vector plus = Vector::Zero(d), plus_i = Vector::Zero(d);
                plus(i) = r;
                plus(j) = r;
                plus_i(i) = r;
                plus_i(j) = kI * r;
                // |i><j| = P(+) + i P(+i) - (1 + i)/2 (|i><i| + |j><j|), with P(+i) built from |i> + i|j>.
                out = run(plus) + kI * run(plus_i) -
                      cplx(0.5, 0.5) * (diag[static_cast<std::size_t>(i)] + diag[static_cast<std::size_t>(j)]);
            }
            s.col(j * d + i) = out.reshaped();
        }
    return {static_cast<std::size_t>(d), std::move(s)};
}

inline void check_cptp(const Superoperator& ch, double tol = 1e-9) {
    const auto d = static_cast<Eigen::Index>(ch.dim);
    if (ch.s.rows() != d * d || ch.s.cols() != d * d) throw DimensionError("superoperator shape mismatch");
    const Matrix c = ch.choi();
    if ((c - c.adjoint()).norm() > tol) throw InvariantError("map is not Hermiticity preserving");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c + c.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw InvariantError("map is not completely positive");
    Matrix tr_out = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) tr_out(i, j) = c.block(i * d, j * d, d, d).trace();
    if ((tr_out - Matrix::Identity(d, d)).norm() > tol) throw InvariantError("map is not trace preserving");
}

struct LowerEstimateOptions {
    std::size_t samples = 512;
    std::size_t refine_steps = 64;
    std::uint64_t seed = 1;
    double cptp_tol = 1e-9;
    std::vector<Eigen::Index> input_support;  // system basis states allowed in the input; empty means all
};

struct LowerEstimate {
    double diamond = 0.0;         // || (A - B) x 1 (psi) ||_1, in [0, 2]
    double trace_distance = 0.0;  // diamond / 2
    Vector best_input;
};

namespace detail {

inline Vector gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    Vector v(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // Box-Muller on portable uniforms.
        const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
        const double r = std::sqrt(-2.0 * std::log(u1));
        v(k) = cplx(r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2));
    }
    return v;
}

/// Trace norm of ((A - B) x 1)(|psi><psi|) with psi on system x ancilla (system index slow).
inline double extended_output_norm(const Matrix& delta, Eigen::Index d, const Vector& psi) {
    // psi = sum_{s,a} m(s, a) |s>|a>; block (a, b) of the output is Delta(m_a m_b^dagger).
    const Matrix m = Eigen::Map<const Matrix>(psi.data(), d, d).transpose();
    Matrix out(d * d, d * d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
            const Matrix x = m.col(a) * m.col(b).adjoint();
            const Vector y = delta * x.reshaped();
            const Matrix blk = y.reshaped(d, d);
            for (Eigen::Index s = 0; s < d; ++s)
                for (Eigen::Index t = 0; t < d; ++t) out(s * d + a, t * d + b) = blk(s, t);
        }
    return trace_norm(out);
}

}  // namespace detail

/// Maximum over sampled ancilla-extended pure inputs, then a local random search around
/// the best one. The maximally entangled input is always included.
inline LowerEstimate numeric_lower_estimate(const Superoperator& a, const Superoperator& b,
                                            const LowerEstimateOptions& o = {}) {
    if (a.dim != b.dim) throw DimensionError("channels act on different dimensions");
    if (a.dim > 6) throw DimensionError("lower estimate supports dimension <= 6");
    check_cptp(a, o.cptp_tol);
    check_cptp(b, o.cptp_tol);
    const auto d = static_cast<Eigen::Index>(a.dim);
    const Matrix delta = a.s - b.s;
    std::mt19937_64 rng(o.seed);

    std::vector<Eigen::Index> support = o.input_support;
    if (support.empty())
        for (Eigen::Index i = 0; i < d; ++i) support.push_back(i);
    for (auto i : support)
        if (i < 0 || i >= d) throw DimensionError("input support index out of range");
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(d * d);
    for (auto i : support) mask.segment(i * d, d).setOnes();
    auto restrict_input = [&](const Vector& v) { return Vector(v.cwiseProduct(mask.cast<cplx>()).normalized()); };

    LowerEstimate best;
    auto consider = [&](const Vector& psi) {
        const double v = detail::extended_output_norm(delta, d, psi);
        if (v > best.diamond) {
            best.diamond = v;
            best.best_input = psi;
            return true;
        }
        return false;
    };
    Vector me = Vector::Zero(d * d);
    for (auto i : support) me(i * d + i) = 1.0;
    best.best_input = me.normalized();
    consider(best.best_input);
    for (std::size_t k = 0; k < o.samples; ++k) consider(restrict_input(detail::gaussian_vector(d * d, rng)));

    double step = 0.1;
    for (std::size_t k = 0; k < o.refine_steps; ++k) {
        const Vector trial = restrict_input(best.best_input + step * detail::gaussian_vector(d * d, rng));
        if (!consider(trial)) step *= 0.8;
    }
    best.diamond = std::min(best.diamond, 2.0);
    best.trace_distance = best.diamond / 2.0;
    return best;
}

/// Measurement-model channel (rate gamma, projector 1 - |fe><fe|) against the ideal
/// Zeno unitary, both over one gate period 2 pi / W. Inputs are restricted to the
/// Zeno subspace unless the options name a support.
inline LowerEstimate gate_lower_estimate(double rabi, double gamma, LowerEstimateOptions o = {}) {
    const auto qq = SpaceLayout::qutrit_qubit();
    const double t = kTwoPi / rabi;
    auto pb = build_ideal_zeno_problem(rabi, gamma, zeno_projector(qq), basis_state(qq, {"g", "g"}), t);
    const auto noisy = channel_from_problem(pb);
    const auto ideal = unitary_channel(ideal_gate_unitary(rabi, 1).matrix());
    if (o.input_support.empty())
        for (Eigen::Index i = 0; i < 6; ++i)
            if (i != kFE) o.input_support.push_back(i);
    return numeric_lower_estimate(noisy, ideal, o);
}

}  // namespace zenosim

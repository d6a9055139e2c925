#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "zenosim/qcore.hpp"

namespace zenosim {

/// Indices of the computational kets in the qutrit x qubit layout.
enum CompIndex : Eigen::Index { kGG = 0, kGE = 1, kEG = 2, kEE = 3, kFG = 4, kFE = 5 };

/// Overlap <t|rho|t> with a pure target.
inline double state_fidelity(const QuantumState& rho, const QuantumState& target) {
    if (!target.is_pure()) throw InvariantError("fidelity target must be a pure state");
    if (!(rho.layout() == target.layout())) throw DimensionError("state and target layouts differ");
    const Vector& t = target.vector();
    if (rho.is_pure()) return std::norm(t.dot(rho.vector()));
    return std::clamp(t.dot(rho.density_matrix() * t).real(), 0.0, 1.0);
}

struct ComputationalState {
    Matrix rho;  // 4x4 over (gg, ge, eg, ee)
    double subspace_weight = 0.0;
};

/// Drops the qutrit |f> rows and columns and renormalizes.
inline ComputationalState computational_projection(const QuantumState& state) {
    if (state.layout().dims() != std::vector<std::size_t>{3, 2})
        throw DimensionError("computational projection needs a qutrit x qubit state");
    const Matrix rho = state.density_matrix();
    ComputationalState c;
    c.rho = rho.topLeftCorner(4, 4);
    c.subspace_weight = c.rho.trace().real();
    if (!(c.subspace_weight > 1e-14)) throw InvariantError("state has no weight in the computational subspace");
    c.rho /= c.subspace_weight;
    c.rho = 0.5 * (c.rho + c.rho.adjoint());
    return c;
}

/// Wootters concurrence of a two-qubit density matrix.
inline double concurrence(const Matrix& rho, double tol = 1e-8) {
    if (rho.rows() != 4 || rho.cols() != 4) throw DimensionError("concurrence needs a 4x4 density matrix");
    const Matrix h = 0.5 * (rho + rho.adjoint());
    if (relative_hermiticity_defect(rho) > tol || std::abs(h.trace() - cplx(1.0)) > tol)
        throw InvariantError("concurrence input is not a density matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.eigenvalues().minCoeff() < -tol) throw InvariantError("concurrence input is not positive");

    // sqrt(rho) (sy x sy) rho* (sy x sy) sqrt(rho) is Hermitian with the same spectrum as R.
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix sqrt_rho = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    Matrix yy = Matrix::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Matrix tilde = yy * h.conjugate() * yy;
    Matrix m = sqrt_rho * tilde * sqrt_rho;
    m = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> ms(m, Eigen::EigenvaluesOnly);
    // Eigenvalues at roundoff level would otherwise surface as ~1e-8 after the square root.
    const double cut = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, ms.eigenvalues().maxCoeff());
    Eigen::VectorXd lam = ms.eigenvalues().unaryExpr([cut](double x) { return x > cut ? std::sqrt(x) : 0.0; });
    std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
    return std::max(0.0, lam(0) - lam(1) - lam(2) - lam(3));
}

inline double concurrence(const ComputationalState& c) { return concurrence(c.rho); }

inline double purity(const QuantumState& s) { return s.purity(); }

/// Diagonal in the labelled basis.
inline std::vector<std::pair<std::string, double>> populations(const QuantumState& s) {
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < s.dim(); ++i) out.emplace_back(s.layout().label_of(i), s.population(i));
    return out;
}

/// (1 - 2|eg><eg|)|++> on the qutrit x qubit space.
inline QuantumState gate_target_state() {
    const auto layout = SpaceLayout::qutrit_qubit();
    Vector v = Vector::Zero(6);
    v(kGG) = 0.5;
    v(kGE) = 0.5;
    v(kEG) = -0.5;
    v(kEE) = 0.5;
    return QuantumState::pure(layout, v);
}

}  // namespace zenosim

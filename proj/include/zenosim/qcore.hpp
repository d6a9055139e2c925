#pragma once

// Dense complex linear algebra on composite Hilbert spaces.
//
// Index convention: row-major over factors, the first factor is the most
// significant digit. For a layout (3, 2, N) the basis ket |q1, q2, n> has
// index (q1 * 2 + q2) * N + n.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <complex>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "zenosim/errors.hpp"

namespace zenosim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr cplx kI{0.0, 1.0};

/// Frequencies are configured as cyclic MHz and used internally as rad/us.
inline constexpr double mhz_to_angular(double mhz) { return kTwoPi * mhz; }
inline constexpr double angular_to_mhz(double w) { return w / kTwoPi; }

/// Default invariant tolerances. Individual call sites may pass their own.
struct Tolerances {
    double hermitian = 1e-12;   // relative Frobenius norm of (A - A^dagger)
    double trace = 1e-10;
    double positivity = 1e-10;  // allowed negative eigenvalue magnitude
    double norm = 1e-10;        // pure-state norm defect
};

inline std::size_t& max_total_dimension() {
    static std::size_t cap = 4096;
    return cap;
}

class SpaceLayout {
public:
    SpaceLayout() = default;

    SpaceLayout(std::vector<std::size_t> dims, std::vector<std::vector<std::string>> labels = {})
        : dims_(std::move(dims)), labels_(std::move(labels)) {
        if (dims_.empty()) throw DimensionError("layout needs at least one factor");
        for (auto d : dims_)
            if (d == 0) throw DimensionError("factor dimensions must be positive");
        if (labels_.empty()) {
            for (auto d : dims_) labels_.push_back(numeric_labels(d));
        }
        if (labels_.size() != dims_.size()) throw DimensionError("one label list per factor required");
        for (std::size_t f = 0; f < dims_.size(); ++f)
            if (labels_[f].size() != dims_[f])
                throw DimensionError("label count does not match factor " + std::to_string(f));
        total_ = 1;
        for (auto d : dims_) {
            if (total_ > max_total_dimension() / d)
                throw DimensionError("total dimension exceeds the configured maximum");
            total_ *= d;
        }
        if (total_ > max_total_dimension())
            throw DimensionError("total dimension exceeds the configured maximum");
    }

    static SpaceLayout qutrit() { return SpaceLayout({3}, {{"g", "e", "f"}}); }
    static SpaceLayout qubit() { return SpaceLayout({2}, {{"g", "e"}}); }
    static SpaceLayout cavity(std::size_t n_fock) { return SpaceLayout({n_fock}, {numeric_labels(n_fock)}); }
    static SpaceLayout qutrit_qubit() { return qutrit().concat(qubit()); }
    static SpaceLayout qutrit_qubit_cavity(std::size_t n_fock) {
        return qutrit().concat(qubit()).concat(cavity(n_fock));
    }

    [[nodiscard]] std::size_t rank() const { return dims_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t factor) const { return dims_.at(factor); }
    [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
    [[nodiscard]] std::size_t total_dim() const { return total_; }
    [[nodiscard]] const std::vector<std::string>& labels(std::size_t factor) const { return labels_.at(factor); }

    [[nodiscard]] std::size_t level_of(std::size_t factor, const std::string& label) const {
        const auto& l = labels_.at(factor);
        auto it = std::find(l.begin(), l.end(), label);
        if (it == l.end())
            throw LabelError("unknown level '" + label + "' for factor " + std::to_string(factor));
        return static_cast<std::size_t>(it - l.begin());
    }

    [[nodiscard]] std::size_t index(std::span<const std::size_t> levels) const {
        if (levels.size() != dims_.size()) throw LabelError("one level per factor required");
        std::size_t idx = 0;
        for (std::size_t f = 0; f < dims_.size(); ++f) {
            if (levels[f] >= dims_[f]) throw LabelError("level out of range for factor " + std::to_string(f));
            idx = idx * dims_[f] + levels[f];
        }
        return idx;
    }

    [[nodiscard]] std::size_t index(const std::vector<std::string>& labels) const {
        if (labels.size() != dims_.size()) throw LabelError("one label per factor required");
        std::vector<std::size_t> levels(labels.size());
        for (std::size_t f = 0; f < labels.size(); ++f) levels[f] = level_of(f, labels[f]);
        return index(levels);
    }

    [[nodiscard]] std::vector<std::size_t> levels(std::size_t index) const {
        if (index >= total_) throw LabelError("basis index out of range");
        std::vector<std::size_t> out(dims_.size());
        for (std::size_t f = dims_.size(); f-- > 0;) {
            out[f] = index % dims_[f];
            index /= dims_[f];
        }
        return out;
    }

    [[nodiscard]] std::string label_of(std::size_t index) const {
        auto lv = levels(index);
        std::string s;
        for (std::size_t f = 0; f < lv.size(); ++f) {
            if (f && labels_[f][lv[f]].size() > 1) s += ',';
            s += labels_[f][lv[f]];
        }
        return s;
    }

    [[nodiscard]] SpaceLayout concat(const SpaceLayout& other) const {
        auto d = dims_;
        auto l = labels_;
        d.insert(d.end(), other.dims_.begin(), other.dims_.end());
        l.insert(l.end(), other.labels_.begin(), other.labels_.end());
        return SpaceLayout(std::move(d), std::move(l));
    }

    [[nodiscard]] SpaceLayout subset(const std::vector<std::size_t>& factors) const {
        std::vector<std::size_t> d;
        std::vector<std::vector<std::string>> l;
        for (auto f : factors) {
            d.push_back(dims_.at(f));
            l.push_back(labels_.at(f));
        }
        return SpaceLayout(std::move(d), std::move(l));
    }

    friend bool operator==(const SpaceLayout& a, const SpaceLayout& b) {
        return a.dims_ == b.dims_ && a.labels_ == b.labels_;
    }

private:
    static std::vector<std::string> numeric_labels(std::size_t d) {
        std::vector<std::string> l(d);
        for (std::size_t i = 0; i < d; ++i) l[i] = std::to_string(i);
        return l;
    }

    std::vector<std::size_t> dims_;
    std::vector<std::vector<std::string>> labels_;
    std::size_t total_ = 0;
};

inline double relative_hermiticity_defect(const Matrix& m) {
    const double n = m.norm();
    if (n == 0.0) return 0.0;
    return (m - m.adjoint()).norm() / n;
}

class Operator {
public:
    Operator() = default;
    Operator(SpaceLayout layout, Matrix matrix) : layout_(std::move(layout)), matrix_(std::move(matrix)) {
        const auto d = static_cast<Eigen::Index>(layout_.total_dim());
        if (matrix_.rows() != d || matrix_.cols() != d)
            throw DimensionError("operator matrix does not match layout dimension");
    }

    /// Builds a Hamiltonian; rejects matrices that are not Hermitian.
    static Operator hamiltonian(SpaceLayout layout, Matrix matrix, double tol = Tolerances{}.hermitian) {
        Operator op(std::move(layout), std::move(matrix));
        if (relative_hermiticity_defect(op.matrix_) > tol)
            throw InvariantError("Hamiltonian is not Hermitian");
        op.hamiltonian_ = true;
        return op;
    }

    static Operator identity(const SpaceLayout& layout) {
        const auto d = static_cast<Eigen::Index>(layout.total_dim());
        return Operator(layout, Matrix::Identity(d, d));
    }
    static Operator zero(const SpaceLayout& layout) {
        const auto d = static_cast<Eigen::Index>(layout.total_dim());
        return Operator(layout, Matrix::Zero(d, d));
    }

    [[nodiscard]] const SpaceLayout& layout() const { return layout_; }
    [[nodiscard]] const Matrix& matrix() const { return matrix_; }
    [[nodiscard]] std::size_t dim() const { return layout_.total_dim(); }
    [[nodiscard]] bool is_hamiltonian() const { return hamiltonian_; }
    [[nodiscard]] bool is_hermitian(double tol = Tolerances{}.hermitian) const {
        return relative_hermiticity_defect(matrix_) <= tol;
    }
    [[nodiscard]] Operator adjoint() const { return Operator(layout_, matrix_.adjoint()); }

    cplx operator()(Eigen::Index r, Eigen::Index c) const { return matrix_(r, c); }

    friend Operator operator+(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(a.layout_, a.matrix_ + b.matrix_);
    }
    friend Operator operator-(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(a.layout_, a.matrix_ - b.matrix_);
    }
    friend Operator operator*(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(a.layout_, a.matrix_ * b.matrix_);
    }
    friend Operator operator*(cplx s, const Operator& a) { return Operator(a.layout_, s * a.matrix_); }
    friend Operator operator*(double s, const Operator& a) { return Operator(a.layout_, s * a.matrix_); }

private:
    static void check_same(const Operator& a, const Operator& b) {
        if (!(a.layout_ == b.layout_)) throw DimensionError("operator layouts differ");
    }

    SpaceLayout layout_;
    Matrix matrix_;
    bool hamiltonian_ = false;
};

enum class StateKind { pure, mixed };

class QuantumState {
public:
    QuantumState() = default;

    /// Pure state; the vector must have unit norm.
    static QuantumState pure(SpaceLayout layout, Vector psi, double tol = Tolerances{}.norm) {
        if (psi.size() != static_cast<Eigen::Index>(layout.total_dim()))
            throw DimensionError("state vector does not match layout dimension");
        if (std::abs(psi.norm() - 1.0) > tol) throw InvariantError("pure state is not normalized");
        QuantumState s;
        s.layout_ = std::move(layout);
        s.kind_ = StateKind::pure;
        s.psi_ = std::move(psi);
        return s;
    }

    /// Pure state from an arbitrary nonzero vector.
    static QuantumState normalized(SpaceLayout layout, const Vector& psi) {
        const double n = psi.norm();
        if (n == 0.0) throw InvariantError("cannot normalize the zero vector");
        return pure(std::move(layout), psi / n);
    }

    /// Mixed state; checks Hermiticity, unit trace and positivity.
    static QuantumState mixed(SpaceLayout layout, Matrix rho, const Tolerances& tol = {});

    /// Mixed state without invariant checks, for diagnostics and intermediate results.
    static QuantumState unchecked(SpaceLayout layout, Matrix rho) {
        const auto d = static_cast<Eigen::Index>(layout.total_dim());
        if (rho.rows() != d || rho.cols() != d) throw DimensionError("density matrix does not match layout");
        QuantumState s;
        s.layout_ = std::move(layout);
        s.kind_ = StateKind::mixed;
        s.rho_ = std::move(rho);
        return s;
    }

    static QuantumState maximally_mixed(const SpaceLayout& layout) {
        const auto d = static_cast<Eigen::Index>(layout.total_dim());
        return unchecked(layout, Matrix::Identity(d, d) / static_cast<double>(d));
    }

    [[nodiscard]] const SpaceLayout& layout() const { return layout_; }
    [[nodiscard]] StateKind kind() const { return kind_; }
    [[nodiscard]] bool is_pure() const { return kind_ == StateKind::pure; }
    [[nodiscard]] std::size_t dim() const { return layout_.total_dim(); }

    [[nodiscard]] const Vector& vector() const {
        if (!is_pure()) throw InvariantError("mixed state has no state vector");
        return psi_;
    }

    [[nodiscard]] Matrix density_matrix() const {
        if (is_pure()) return psi_ * psi_.adjoint();
        return rho_;
    }

    [[nodiscard]] QuantumState as_mixed() const {
        if (!is_pure()) return *this;
        return unchecked(layout_, density_matrix());
    }

    [[nodiscard]] double purity() const {
        if (is_pure()) return 1.0;
        return (rho_ * rho_).trace().real();
    }

    [[nodiscard]] double population(std::size_t index) const {
        if (is_pure()) return std::norm(psi_(static_cast<Eigen::Index>(index)));
        return rho_(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)).real();
    }

    [[nodiscard]] cplx expectation(const Operator& op) const {
        if (!(op.layout() == layout_)) throw DimensionError("operator and state layouts differ");
        if (is_pure()) return psi_.dot(op.matrix() * psi_);
        return (op.matrix() * rho_).trace();
    }

private:
    SpaceLayout layout_;
    StateKind kind_ = StateKind::mixed;
    Vector psi_;
    Matrix rho_;
};

/// Invariant diagnostics of a state. Never throws.
struct StateDiagnostics {
    double hermiticity_defect = 0.0;
    double trace_defect = 0.0;
    double min_eigenvalue = 0.0;
    double norm_defect = 0.0;
    bool hermitian_ok = true;
    bool trace_ok = true;
    bool positive_ok = true;

    [[nodiscard]] bool valid() const { return hermitian_ok && trace_ok && positive_ok; }
};

inline StateDiagnostics validate(const QuantumState& state, const Tolerances& tol = {}) {
    StateDiagnostics d;
    if (state.is_pure()) {
        d.norm_defect = std::abs(state.vector().norm() - 1.0);
        d.trace_defect = std::abs(state.vector().squaredNorm() - 1.0);
        d.trace_ok = d.norm_defect <= tol.norm;
        d.min_eigenvalue = 0.0;
        return d;
    }
    const Matrix rho = state.density_matrix();
    d.hermiticity_defect = relative_hermiticity_defect(rho);
    d.trace_defect = std::abs(rho.trace() - cplx(1.0, 0.0));
    const Matrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    d.hermitian_ok = d.hermiticity_defect <= tol.hermitian;
    d.trace_ok = d.trace_defect <= tol.trace;
    d.positive_ok = d.min_eigenvalue >= -tol.positivity;
    return d;
}

inline QuantumState QuantumState::mixed(SpaceLayout layout, Matrix rho, const Tolerances& tol) {
    auto s = unchecked(std::move(layout), std::move(rho));
    const auto d = validate(s, tol);
    if (!d.hermitian_ok) throw InvariantError("density matrix is not Hermitian");
    if (!d.trace_ok) throw InvariantError("density matrix trace differs from 1");
    if (!d.positive_ok) throw InvariantError("density matrix has a negative eigenvalue");
    return s;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

inline Operator tensor_product(const Operator& a, const Operator& b) {
    auto layout = a.layout().concat(b.layout());
    return Operator(std::move(layout), kron(a.matrix(), b.matrix()));
}

inline QuantumState tensor_product(const QuantumState& a, const QuantumState& b) {
    auto layout = a.layout().concat(b.layout());
    if (a.is_pure() && b.is_pure()) return QuantumState::pure(std::move(layout), kron(a.vector(), b.vector()));
    return QuantumState::unchecked(std::move(layout), kron(a.density_matrix(), b.density_matrix()));
}

/// Embeds a single-factor operator into the full layout.
inline Operator embed(const SpaceLayout& layout, std::size_t factor, const Matrix& local) {
    const auto d = static_cast<Eigen::Index>(layout.dim(factor));
    if (local.rows() != d || local.cols() != d) throw DimensionError("local operator has the wrong dimension");
    Matrix m = Matrix::Identity(1, 1);
    for (std::size_t f = 0; f < layout.rank(); ++f) {
        const auto df = static_cast<Eigen::Index>(layout.dim(f));
        m = kron(m, f == factor ? local : Matrix::Identity(df, df));
    }
    return Operator(layout, std::move(m));
}

/// |i><j| on one factor, identity elsewhere.
inline Operator transition(const SpaceLayout& layout, std::size_t factor, const std::string& to,
                           const std::string& from) {
    const auto d = static_cast<Eigen::Index>(layout.dim(factor));
    Matrix local = Matrix::Zero(d, d);
    local(static_cast<Eigen::Index>(layout.level_of(factor, to)),
          static_cast<Eigen::Index>(layout.level_of(factor, from))) = 1.0;
    return embed(layout, factor, local);
}

inline Operator annihilation(const SpaceLayout& layout, std::size_t factor) {
    const auto d = static_cast<Eigen::Index>(layout.dim(factor));
    Matrix local = Matrix::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) local(n - 1, n) = std::sqrt(static_cast<double>(n));
    return embed(layout, factor, local);
}

/// Projector onto a set of basis indices.
inline Operator basis_projector(const SpaceLayout& layout, const std::vector<std::size_t>& indices) {
    auto p = Operator::zero(layout);
    Matrix m = p.matrix();
    for (auto i : indices) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    return Operator(layout, std::move(m));
}

using Level = std::variant<std::string, std::size_t>;

inline QuantumState basis_state(const SpaceLayout& layout, const std::vector<Level>& levels) {
    if (levels.size() != layout.rank()) throw LabelError("one level per factor required");
    std::vector<std::size_t> lv(levels.size());
    for (std::size_t f = 0; f < levels.size(); ++f) {
        if (const auto* s = std::get_if<std::string>(&levels[f]))
            lv[f] = layout.level_of(f, *s);
        else
            lv[f] = std::get<std::size_t>(levels[f]);
    }
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    psi(static_cast<Eigen::Index>(layout.index(lv))) = 1.0;
    return QuantumState::pure(layout, std::move(psi));
}

/// Normalized superposition of labelled basis kets with the given amplitudes.
inline QuantumState superposition(const SpaceLayout& layout,
                                  const std::vector<std::pair<std::vector<std::string>, cplx>>& terms) {
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    for (const auto& [labels, amp] : terms) psi(static_cast<Eigen::Index>(layout.index(labels))) += amp;
    return QuantumState::normalized(layout, psi);
}

/// |+> = (|g> + |e>)/sqrt(2) on every qubit-like factor of a qutrit/qubit layout.
inline QuantumState plus_state(const SpaceLayout& layout) {
    Vector psi = Vector::Ones(1);
    for (std::size_t f = 0; f < layout.rank(); ++f) {
        Vector local = Vector::Zero(static_cast<Eigen::Index>(layout.dim(f)));
        local(0) = 1.0 / std::sqrt(2.0);
        local(1) = 1.0 / std::sqrt(2.0);
        psi = kron(psi, local);
    }
    return QuantumState::pure(layout, psi);
}

inline QuantumState partial_trace(const QuantumState& state, const std::vector<std::size_t>& keep) {
    const auto& layout = state.layout();
    if (keep.empty()) throw DimensionError("partial trace must keep at least one factor");
    std::set<std::size_t> kept(keep.begin(), keep.end());
    for (auto f : kept)
        if (f >= layout.rank()) throw DimensionError("invalid factor index " + std::to_string(f));
    std::vector<std::size_t> kept_list(kept.begin(), kept.end());
    std::vector<std::size_t> traced;
    for (std::size_t f = 0; f < layout.rank(); ++f)
        if (!kept.count(f)) traced.push_back(f);

    auto reduced_layout = layout.subset(kept_list);
    const std::size_t dk = reduced_layout.total_dim();
    std::size_t dt = 1;
    for (auto f : traced) dt *= layout.dim(f);

    // full_index[k * dt + t] for kept multi-index k and traced multi-index t.
    std::vector<Eigen::Index> full_index(dk * dt);
    for (std::size_t full = 0; full < layout.total_dim(); ++full) {
        auto lv = layout.levels(full);
        std::size_t k = 0, t = 0;
        for (auto f : kept_list) k = k * layout.dim(f) + lv[f];
        for (auto f : traced) t = t * layout.dim(f) + lv[f];
        full_index[k * dt + t] = static_cast<Eigen::Index>(full);
    }

    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
    if (state.is_pure()) {
        const Vector& psi = state.vector();
        for (std::size_t t = 0; t < dt; ++t)
            for (std::size_t i = 0; i < dk; ++i) {
                const cplx a = psi(full_index[i * dt + t]);
                if (a == cplx{}) continue;
                for (std::size_t j = 0; j < dk; ++j)
                    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                        a * std::conj(psi(full_index[j * dt + t]));
            }
    } else {
        const Matrix rho = state.density_matrix();
        for (std::size_t i = 0; i < dk; ++i)
            for (std::size_t j = 0; j < dk; ++j) {
                cplx acc{};
                for (std::size_t t = 0; t < dt; ++t) acc += rho(full_index[i * dt + t], full_index[j * dt + t]);
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
            }
    }
    return QuantumState::unchecked(std::move(reduced_layout), std::move(out));
}

/// Hermitian matrix function via eigen-decomposition: exp(-i H t).
inline Matrix unitary_propagator(const Matrix& h, double t) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
    const Eigen::VectorXd w = es.eigenvalues();
    Vector phases(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) phases(i) = std::exp(-kI * w(i) * t);
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Trace norm of a Hermitian matrix.
inline double trace_norm(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const QuantumState& a, const QuantumState& b) {
    if (!(a.layout() == b.layout())) throw DimensionError("states live on different layouts");
    return 0.5 * trace_norm(a.density_matrix() - b.density_matrix());
}

inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

}  // namespace zenosim

#pragma once

// GKLS master-equation integration.
//
// The diagonal of the static Hamiltonian, D, is removed exactly by working in
// the interaction picture rho_I = e^{iDt} rho e^{-iDt}. Every remaining
// operator is stored as a sparse list of entries whose time dependence is a
// single phase e^{i f t}, and the RK4 step only has to resolve the drive
// amplitudes and the slow detunings. States are transformed back to the frame
// of the input Hamiltonian at the sample times.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "zenosim/device.hpp"
#include "zenosim/qcore.hpp"
#include "zenosim/td_hamiltonian.hpp"

namespace zenosim {

using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SolverOptions {
    double max_norm_dt = 0.05;      // bound on ||V(t)|| dt, rad
    double max_rate_dt = 0.5;       // bound on (largest decay rate) dt
    double max_phase_dt = 1.5707963267948966;  // bound on |f| dt for every phase factor
    bool refine_dt = false;         // shrink dt to satisfy the guards instead of throwing
    double positivity_abort = 1e-6;
    bool check_positivity = true;
    bool reduce_subspace = true;
};

struct EvolutionProblem {
    TimeDependentHamiltonian hamiltonian;
    std::vector<Operator> collapse_ops;
    QuantumState initial;
    double t_start = 0.0;
    double t_end = 0.0;
    double dt = 1e-3;
    std::vector<double> sample_times;
    SolverOptions options;

    void check() const {
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (!(t_end >= t_start)) throw ConfigError("t_span must be ordered");
        if (!(initial.layout() == hamiltonian.layout())) throw DimensionError("initial state layout mismatch");
        for (const auto& c : collapse_ops)
            if (!(c.layout() == hamiltonian.layout())) throw DimensionError("collapse operator layout mismatch");
        double prev = -kInf;
        for (double t : sample_times) {
            if (t < t_start - 1e-12 || t > t_end + 1e-12) throw ConfigError("sample time outside t_span");
            if (t < prev) throw ConfigError("sample times must be sorted");
            prev = t;
        }
    }
};

struct EvolutionDiagnostics {
    double dt_used = 0.0;
    std::size_t steps = 0;
    std::size_t subspace_dim = 0;
    double max_trace_defect = 0.0;
    double min_eigenvalue = 0.0;
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<QuantumState> states;
    EvolutionDiagnostics diagnostics;
};

namespace detail {

struct Entry {
    int row = 0;
    int col = 0;
    cplx value{};
    int phase = 0;  // index into the frequency table
};

class FrequencyTable {
public:
    int index(double f) {
        std::uint64_t key;
        std::memcpy(&key, &f, sizeof key);
        auto [it, inserted] = lookup_.try_emplace(key, static_cast<int>(freqs_.size()));
        if (inserted) freqs_.push_back(f);
        return it->second;
    }
    [[nodiscard]] const std::vector<double>& freqs() const { return freqs_; }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double f : freqs_) m = std::max(m, std::abs(f));
        return m;
    }
    void evaluate(double t, std::vector<cplx>& out) const {
        out.resize(freqs_.size());
        for (std::size_t i = 0; i < freqs_.size(); ++i) {
            const double ph = freqs_[i] * t;
            out[i] = cplx(std::cos(ph), std::sin(ph));
        }
    }

private:
    std::unordered_map<std::uint64_t, int> lookup_;
    std::vector<double> freqs_;
};

struct CollapseEntries {
    std::vector<Entry> entries;
    bool diagonal = true;
};

/// Sparse interaction-picture model restricted to a closed subspace.
struct CompiledModel {
    std::vector<int> sub;            // reduced index -> full index
    std::vector<int> full_to_sub;    // -1 when outside
    Eigen::VectorXd d;               // static diagonal on the subspace
    FrequencyTable hamiltonian_freqs;
    FrequencyTable jump_freqs;
    std::vector<Entry> heff;         // off-diagonal part of V - (i/2) K_nd, time-dependent phases
    Eigen::VectorXcd heff_diag;      // time-independent diagonal of -(i/2) K (all channels)
    std::vector<CollapseEntries> collapse;  // in input order
    RowMatrix w;                     // elementwise dissipator factor
    double v_norm_bound = 0.0;
    double max_rate = 0.0;

    [[nodiscard]] int dim() const { return static_cast<int>(sub.size()); }
};

inline constexpr double kDropTol = 0.0;

inline std::vector<int> reachable_subspace(const TimeDependentHamiltonian& h, const std::vector<Operator>& cops,
                                           const std::vector<int>& seeds) {
    const auto dim = static_cast<int>(h.dim());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(dim));
    auto add_undirected = [&](const Matrix& m) {
        for (int j = 0; j < dim; ++j)
            for (int l = 0; l < dim; ++l)
                if (j != l && m(j, l) != cplx{}) {
                    adj[static_cast<std::size_t>(j)].push_back(l);
                    adj[static_cast<std::size_t>(l)].push_back(j);
                }
    };
    add_undirected(h.static_part());
    for (const auto& d : h.drives()) add_undirected(d.op);
    for (const auto& c : cops) {
        const Matrix& m = c.matrix();
        for (int j = 0; j < dim; ++j)
            for (int l = 0; l < dim; ++l)
                if (j != l && m(j, l) != cplx{}) adj[static_cast<std::size_t>(l)].push_back(j);
        add_undirected(m.adjoint() * m);
    }
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    std::deque<int> queue;
    for (int s : seeds)
        if (!seen[static_cast<std::size_t>(s)]) {
            seen[static_cast<std::size_t>(s)] = 1;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        const int j = queue.front();
        queue.pop_front();
        for (int l : adj[static_cast<std::size_t>(j)])
            if (!seen[static_cast<std::size_t>(l)]) {
                seen[static_cast<std::size_t>(l)] = 1;
                queue.push_back(l);
            }
    }
    std::vector<int> out;
    for (int j = 0; j < dim; ++j)
        if (seen[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

inline std::vector<int> support_of(const Matrix& rho) {
    std::vector<int> s;
    for (Eigen::Index j = 0; j < rho.rows(); ++j)
        if (std::abs(rho(j, j)) > 0.0) s.push_back(static_cast<int>(j));
    return s;
}

inline CompiledModel compile(const TimeDependentHamiltonian& h, const std::vector<Operator>& cops,
                             const std::vector<int>& seeds, bool reduce) {
    CompiledModel m;
    const int full = static_cast<int>(h.dim());
    if (reduce) {
        m.sub = reachable_subspace(h, cops, seeds);
    } else {
        m.sub.resize(static_cast<std::size_t>(full));
        for (int j = 0; j < full; ++j) m.sub[static_cast<std::size_t>(j)] = j;
    }
    m.full_to_sub.assign(static_cast<std::size_t>(full), -1);
    for (int i = 0; i < m.dim(); ++i) m.full_to_sub[static_cast<std::size_t>(m.sub[static_cast<std::size_t>(i)])] = i;
    const int n = m.dim();

    const Matrix& hs = h.static_part();
    m.d.resize(n);
    for (int i = 0; i < n; ++i) m.d(i) = hs(m.sub[static_cast<std::size_t>(i)], m.sub[static_cast<std::size_t>(i)]).real();

    // Coefficients keyed by (row, col, frequency) so coincident terms are merged.
    std::unordered_map<std::uint64_t, cplx> acc;
    auto key = [n](int r, int c, int p) {
        return (static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(r)) *
                   static_cast<std::uint64_t>(n) +
               static_cast<std::uint64_t>(c);
    };
    auto add_h = [&](int r, int c, cplx v, double f) {
        const int p = m.hamiltonian_freqs.index(f + m.d(r) - m.d(c));
        acc[key(r, c, p)] += v;
    };

    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (r != c) {
                const cplx v = hs(m.sub[static_cast<std::size_t>(r)], m.sub[static_cast<std::size_t>(c)]);
                if (v != cplx{}) add_h(r, c, v, 0.0);
            }
    for (const auto& dr : h.drives()) {
        const cplx c0 = dr.amplitude * std::exp(-kI * dr.frequency * dr.t0);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const cplx a = dr.op(m.sub[static_cast<std::size_t>(r)], m.sub[static_cast<std::size_t>(c)]);
                if (a == cplx{}) continue;
                add_h(r, c, c0 * a, dr.frequency);
                add_h(c, r, std::conj(c0 * a), -dr.frequency);
            }
        m.v_norm_bound += 2.0 * std::abs(dr.amplitude) * spectral_norm(dr.op);
    }
    {
        Matrix off = hs;
        off.diagonal().setZero();
        m.v_norm_bound += spectral_norm(off);
    }

    m.heff_diag = Eigen::VectorXcd::Zero(n);
    m.w = RowMatrix::Zero(n, n);
    Matrix k_nd = Matrix::Zero(n, n);
    for (const auto& cop : cops) {
        CollapseEntries ce;
        Matrix local(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                local(r, c) = cop.matrix()(m.sub[static_cast<std::size_t>(r)], m.sub[static_cast<std::size_t>(c)]);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (local(r, c) != cplx{}) {
                    ce.entries.push_back({r, c, local(r, c), m.jump_freqs.index(m.d(r) - m.d(c))});
                    if (r != c) ce.diagonal = false;
                }
        if (ce.diagonal) {
            const Eigen::VectorXcd l = local.diagonal();
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    m.w(j, k) += l(j) * std::conj(l(k)) - 0.5 * (std::norm(l(j)) + std::norm(l(k)));
            for (int j = 0; j < n; ++j) m.heff_diag(j) += -0.5 * kI * std::norm(l(j));
        } else {
            const Matrix kk = local.adjoint() * local;
            k_nd += kk;
            for (int j = 0; j < n; ++j) m.heff_diag(j) += -0.5 * kI * kk(j, j);
        }
        m.collapse.push_back(std::move(ce));
    }
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m.w(j, k) += -0.5 * (k_nd(j, j) + k_nd(k, k));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (r != c && k_nd(r, c) != cplx{}) add_h(r, c, -0.5 * kI * k_nd(r, c), 0.0);

    m.heff.reserve(acc.size());
    for (const auto& [k, v] : acc) {
        if (std::abs(v) <= kDropTol) continue;
        const auto c = static_cast<int>(k % static_cast<std::uint64_t>(n));
        const auto r = static_cast<int>((k / static_cast<std::uint64_t>(n)) % static_cast<std::uint64_t>(n));
        const auto p = static_cast<int>(k / (static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n)));
        m.heff.push_back({r, c, v, p});
    }
    // Deterministic order: row-major, then by phase index.
    std::sort(m.heff.begin(), m.heff.end(), [](const Entry& a, const Entry& b) {
        if (a.row != b.row) return a.row < b.row;
        if (a.col != b.col) return a.col < b.col;
        return a.phase < b.phase;
    });

    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m.max_rate = std::max(m.max_rate, std::abs(m.w(j, k)));
    return m;
}

// std::complex multiplication goes through the NaN-aware libgcc path unless
// -fcx-limited-range is set; the kernels spell it out instead.
inline cplx mul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

/// y += c x over n complex values.
inline void axpy(int n, cplx c, const cplx* x, cplx* y) {
    const double cr = c.real(), ci = c.imag();
    const double* xd = reinterpret_cast<const double*>(x);
    double* yd = reinterpret_cast<double*>(y);
    for (int k = 0; k < 2 * n; k += 2) {
        const double a = xd[k], b = xd[k + 1];
        yd[k] += cr * a - ci * b;
        yd[k + 1] += cr * b + ci * a;
    }
}

/// Right-hand side of the interaction-picture master equation.
class MasterRhs {
public:
    explicit MasterRhs(const CompiledModel& m) : m_(m), x_(m.dim(), m.dim()) {}

    void operator()(double t, const RowMatrix& rho, RowMatrix& out) {
        const int n = m_.dim();
        m_.hamiltonian_freqs.evaluate(t, hph_);
        m_.jump_freqs.evaluate(t, jph_);

        // X = H_eff rho, then the coherent and anticommutator part is -i (X - X^dagger).
        x_.setZero();
        const auto& hs = m_.heff;
        for (std::size_t i = 0; i < hs.size();) {
            const int row = hs[i].row, col = hs[i].col;
            cplx c{};
            for (; i < hs.size() && hs[i].row == row && hs[i].col == col; ++i)
                c += mul(hs[i].value, hph_[static_cast<std::size_t>(hs[i].phase)]);
            axpy(n, c, rho.data() + static_cast<std::ptrdiff_t>(col) * n, x_.data() + static_cast<std::ptrdiff_t>(row) * n);
        }
        out.resize(n, n);
        for (int j = 0; j < n; ++j) {
            const cplx* xr = x_.data() + static_cast<std::ptrdiff_t>(j) * n;
            const cplx* wr = m_.w.data() + static_cast<std::ptrdiff_t>(j) * n;
            const cplx* rr = rho.data() + static_cast<std::ptrdiff_t>(j) * n;
            cplx* o = out.data() + static_cast<std::ptrdiff_t>(j) * n;
            for (int k = 0; k < n; ++k) {
                const cplx xt = x_.data()[static_cast<std::ptrdiff_t>(k) * n + j];
                const double dr = xr[k].real() - xt.real();
                const double di = xr[k].imag() + xt.imag();
                const cplx wr_k = mul(wr[k], rr[k]);
                o[k] = cplx(di + wr_k.real(), -dr + wr_k.imag());
            }
        }
        for (const auto& ce : m_.collapse) {
            if (ce.diagonal) continue;
            const auto& es = ce.entries;
            lv_.resize(es.size());
            for (std::size_t p = 0; p < es.size(); ++p)
                lv_[p] = mul(es[p].value, jph_[static_cast<std::size_t>(es[p].phase)]);
            for (std::size_t p = 0; p < es.size(); ++p) {
                const cplx lp = lv_[p];
                const cplx* rr = rho.data() + static_cast<std::ptrdiff_t>(es[p].col) * n;
                cplx* o = out.data() + static_cast<std::ptrdiff_t>(es[p].row) * n;
                for (std::size_t q = 0; q < es.size(); ++q)
                    o[es[q].row] += mul(mul(lp, std::conj(lv_[q])), rr[es[q].col]);
            }
        }
    }

private:
    const CompiledModel& m_;
    RowMatrix x_;
    std::vector<cplx> hph_, jph_, lv_;
};

inline void hermitize(RowMatrix& rho) {
    const Eigen::Index n = rho.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        rho(j, j) = rho(j, j).real();
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const cplx v = 0.5 * (rho(j, k) + std::conj(rho(k, j)));
            rho(j, k) = v;
            rho(k, j) = std::conj(v);
        }
    }
}

/// Largest dt satisfying the solver guards.
inline double guarded_dt(const CompiledModel& m, const SolverOptions& o) {
    double dt = kInf;
    if (m.v_norm_bound > 0.0) dt = std::min(dt, o.max_norm_dt / m.v_norm_bound);
    if (m.max_rate > 0.0) dt = std::min(dt, o.max_rate_dt / m.max_rate);
    const double fmax = m.hamiltonian_freqs.max_abs();
    if (fmax > 0.0) dt = std::min(dt, o.max_phase_dt / fmax);
    return dt;
}

inline double min_eigenvalue(const RowMatrix& rho) {
    if (rho.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(rho), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Integrates the problem and returns states at the sample times with diagnostics.
inline EvolutionResult evolve_master_detailed(const EvolutionProblem& pb) {
    pb.check();
    const auto& layout = pb.hamiltonian.layout();
    const Matrix rho0_full = pb.initial.density_matrix();
    {
        const auto diag = validate(pb.initial.as_mixed(), Tolerances{1e-10, 1e-8, 1e-8, 1e-8});
        if (!diag.valid()) throw InvariantError("initial state is not a valid density matrix");
    }

    const auto model = detail::compile(pb.hamiltonian, pb.collapse_ops, detail::support_of(rho0_full),
                                       pb.options.reduce_subspace);
    const int n = model.dim();

    const double guard = detail::guarded_dt(model, pb.options);
    double dt = pb.dt;
    if (dt > guard * (1.0 + 1e-12)) {
        if (!pb.options.refine_dt) {
            std::ostringstream os;
            os << "step size " << dt << " us violates the solver guard (max " << guard << " us; ||V|| bound "
               << model.v_norm_bound << " rad/us)";
            throw StepSizeError(os.str());
        }
        dt = guard;
    }

    // Interaction picture at t_start.
    RowMatrix rho(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            rho(j, k) = rho0_full(model.sub[static_cast<std::size_t>(j)], model.sub[static_cast<std::size_t>(k)]) *
                        std::exp(kI * (model.d(j) - model.d(k)) * pb.t_start);

    EvolutionResult res;
    res.diagnostics.subspace_dim = static_cast<std::size_t>(n);
    res.diagnostics.dt_used = dt;
    res.diagnostics.min_eigenvalue = kInf;

    detail::MasterRhs rhs(model);
    RowMatrix k1, k2, k3, k4, tmp;
    double t = pb.t_start;

    auto emit = [&](double ts) {
        const auto full = static_cast<Eigen::Index>(layout.total_dim());
        Matrix out = Matrix::Zero(full, full);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out(model.sub[static_cast<std::size_t>(j)], model.sub[static_cast<std::size_t>(k)]) =
                    rho(j, k) * std::exp(-kI * (model.d(j) - model.d(k)) * ts);
        const double tr_defect = std::abs(rho.trace() - cplx(1.0, 0.0));
        res.diagnostics.max_trace_defect = std::max(res.diagnostics.max_trace_defect, tr_defect);
        if (pb.options.check_positivity) {
            const double lmin = detail::min_eigenvalue(rho);
            res.diagnostics.min_eigenvalue = std::min(res.diagnostics.min_eigenvalue, lmin);
            if (lmin < -pb.options.positivity_abort) {
                std::ostringstream os;
                os << "positivity lost at t = " << ts << " us: min eigenvalue " << lmin << ", trace defect "
                   << tr_defect << ", dt " << dt << " us";
                throw PositivityError(os.str());
            }
        }
        res.times.push_back(ts);
        res.states.push_back(QuantumState::unchecked(layout, std::move(out)));
    };

    for (double ts : pb.sample_times) {
        const double span = ts - t;
        if (span > 1e-15) {
            const auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
            const double h = span / static_cast<double>(steps);
            for (std::size_t s = 0; s < steps; ++s) {
                const double t0 = t + static_cast<double>(s) * h;
                rhs(t0, rho, k1);
                tmp = rho + (0.5 * h) * k1;
                rhs(t0 + 0.5 * h, tmp, k2);
                tmp = rho + (0.5 * h) * k2;
                rhs(t0 + 0.5 * h, tmp, k3);
                tmp = rho + h * k3;
                rhs(t0 + h, tmp, k4);
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                detail::hermitize(rho);
            }
            res.diagnostics.steps += steps;
            t = ts;
        }
        emit(ts);
    }
    if (res.diagnostics.min_eigenvalue == kInf) res.diagnostics.min_eigenvalue = 0.0;
    return res;
}

inline std::vector<QuantumState> evolve_master(const EvolutionProblem& pb) {
    return evolve_master_detailed(pb).states;
}

/// Regular sample grid from t0 to t1 inclusive with the given count of intervals.
inline std::vector<double> linspace_times(double t0, double t1, std::size_t intervals) {
    std::vector<double> ts;
    if (intervals == 0) return {t1};
    for (std::size_t i = 0; i <= intervals; ++i)
        ts.push_back(t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(intervals));
    return ts;
}

/// Ideal continuous-measurement model on the qutrit x qubit space: H = i(W/2)(|a><b| - |b><a|) x 1,
/// collapse sqrt(gamma) P. Rates in rad/us and 1/us.
inline EvolutionProblem build_ideal_zeno_problem(double rabi, double gamma, const Operator& projector,
                                                 const QuantumState& initial, double duration,
                                                 RabiTransition transition_kind = RabiTransition::ef) {
    const SpaceLayout layout = SpaceLayout::qutrit_qubit();
    if (!(projector.layout() == layout)) throw DimensionError("projector must act on the qutrit x qubit space");
    const Matrix& p = projector.matrix();
    if ((p * p - p).norm() > 1e-12 || relative_hermiticity_defect(p) > 1e-12)
        throw InvariantError("collapse operator is not a projector");
    if (gamma < 0.0) throw ConfigError("measurement rate must be >= 0");

    const char* lo = transition_kind == RabiTransition::ef ? "e" : "g";
    const char* hi = transition_kind == RabiTransition::ef ? "f" : "e";
    const Operator up = transition(layout, kQutrit, lo, hi);
    const Matrix h = kI * (0.5 * rabi) * (up.matrix() - up.matrix().adjoint());

    EvolutionProblem pb;
    pb.hamiltonian = TimeDependentHamiltonian(layout, h);
    if (gamma > 0.0) pb.collapse_ops.push_back(std::sqrt(gamma) * projector);
    pb.initial = initial;
    pb.t_start = 0.0;
    pb.t_end = duration;
    pb.dt = 1e-3;
    pb.sample_times = {duration};
    pb.options.refine_dt = true;
    return pb;
}

}  // namespace zenosim

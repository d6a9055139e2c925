#pragma once

// Quantum-jump unraveling of an EvolutionProblem.
//
// Uses the same interaction-picture model as the master-equation solver. The
// unnormalized state evolves under H_eff with RK4; a jump occurs at the end of
// the first step whose squared norm falls below a uniform threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "zenosim/lindblad.hpp"
#include "zenosim/parallel.hpp"
#include "zenosim/qcore.hpp"

namespace zenosim {

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct JumpEvent {
    double time = 0.0;
    std::size_t channel = 0;
};

struct TrajectoryRecord {
    QuantumState final_state;
    std::vector<QuantumState> samples;  // at the problem's sample times
    std::vector<JumpEvent> jump_log;
    bool escaped = false;
    std::uint64_t seed = 0;
};

struct TrajectoryOptions {
    std::vector<std::size_t> escape_indices;  // basis indices of the flagged manifold
    double escape_threshold = 0.5;
    double escape_check_interval_us = 0.01;   // population checks between sample times
    bool keep_samples = true;
};

/// Basis indices of qutrit |f> x qubit |e> for any cavity size.
inline std::vector<std::size_t> fe_manifold(const SpaceLayout& layout) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layout.total_dim(); ++i) {
        const auto lv = layout.levels(i);
        if (lv.size() >= 2 && lv[0] == 2 && lv[1] == 1) out.push_back(i);
    }
    return out;
}

class TrajectorySolver {
public:
    TrajectorySolver(const EvolutionProblem& pb, TrajectoryOptions opts = {}) : pb_(pb), opts_(std::move(opts)) {
        pb_.check();
        // All states in the initial support may be drawn, so compile on that support.
        model_ = detail::compile(pb_.hamiltonian, pb_.collapse_ops, detail::support_of(pb_.initial.density_matrix()),
                                 pb_.options.reduce_subspace);
        const double guard = detail::guarded_dt(model_, pb_.options);
        dt_ = pb_.dt;
        if (dt_ > guard * (1.0 + 1e-12)) {
            if (!pb_.options.refine_dt) throw StepSizeError("trajectory step size violates the solver guard");
            dt_ = guard;
        }
        const int n = model_.dim();
        flagged_.assign(static_cast<std::size_t>(n), 0);
        for (auto i : opts_.escape_indices) {
            const int s = model_.full_to_sub.at(i);
            if (s >= 0) flagged_[static_cast<std::size_t>(s)] = 1;
        }
        // Initial ensemble decomposition in the reduced basis.
        const Matrix rho0 = pb_.initial.density_matrix();
        Matrix r(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                r(j, k) = rho0(model_.sub[static_cast<std::size_t>(j)], model_.sub[static_cast<std::size_t>(k)]);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (r + r.adjoint()));
        double acc = 0.0;
        for (Eigen::Index i = es.eigenvalues().size(); i-- > 0;) {
            const double w = es.eigenvalues()(i);
            if (w <= 1e-14) continue;
            acc += w;
            weights_.push_back(acc);
            vectors_.push_back(es.eigenvectors().col(i));
        }
        for (auto& w : weights_) w /= acc;
        build_schedule();
    }

    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] const detail::CompiledModel& model() const { return model_; }

    TrajectoryRecord run(std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        TrajectoryRecord rec;
        rec.seed = seed;
        const int n = model_.dim();

        Vector psi = vectors_.front();
        if (vectors_.size() > 1) {
            const double u = uniform01(rng);
            std::size_t k = 0;
            while (k + 1 < weights_.size() && u >= weights_[k]) ++k;
            psi = vectors_[k];
        }
        // Into the interaction picture at t_start.
        for (int j = 0; j < n; ++j) psi(j) *= std::exp(kI * model_.d(j) * pb_.t_start);

        double threshold = uniform01(rng);
        std::vector<cplx> ph0, ph_half, ph1, step_half, jph;
        Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
        std::size_t sample_i = 0;

        for (const auto& seg : schedule_) {
            const double h = seg.h;
            model_.hamiltonian_freqs.evaluate(seg.t0, ph0);
            step_factors(h / 2.0, step_half);
            for (std::size_t s = 0; s < seg.steps; ++s) {
                const double t = seg.t0 + static_cast<double>(s) * h;
                if (s % kResync == 0 && s) model_.hamiltonian_freqs.evaluate(t, ph0);
                ph_half.resize(ph0.size());
                ph1.resize(ph0.size());
                for (std::size_t i = 0; i < ph0.size(); ++i) {
                    ph_half[i] = detail::mul(ph0[i], step_half[i]);
                    ph1[i] = detail::mul(ph_half[i], step_half[i]);
                }
                apply_heff(ph0, psi, k1);
                tmp = psi + (0.5 * h) * k1;
                apply_heff(ph_half, tmp, k2);
                tmp = psi + (0.5 * h) * k2;
                apply_heff(ph_half, tmp, k3);
                tmp = psi + h * k3;
                apply_heff(ph1, tmp, k4);
                psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                std::swap(ph0, ph1);

                if (psi.squaredNorm() < threshold) {
                    jump(t + h, psi, rng, rec, jph);
                    threshold = uniform01(rng);
                }
            }
            const double t_end = seg.t0 + static_cast<double>(seg.steps) * h;
            const double norm2 = psi.squaredNorm();
            if (seg.check_escape && !rec.escaped && flagged_population(psi) / norm2 > opts_.escape_threshold)
                rec.escaped = true;
            if (seg.sample) {
                if (opts_.keep_samples || sample_i + 1 == pb_.sample_times.size())
                    rec.samples.push_back(lab_state(psi, t_end));
                ++sample_i;
            }
        }
        if (!rec.samples.empty()) rec.final_state = rec.samples.back();
        if (!opts_.keep_samples && !rec.samples.empty()) rec.samples.clear();
        return rec;
    }

private:
    static constexpr std::size_t kResync = 1024;

    struct Segment {
        double t0 = 0.0;
        double h = 0.0;
        std::size_t steps = 0;
        bool sample = false;
        bool check_escape = false;
    };

    void build_schedule() {
        // Segment boundaries at sample times and at the escape-check grid.
        std::vector<std::pair<double, bool>> marks;
        for (double t : pb_.sample_times) marks.emplace_back(t, true);
        if (!opts_.escape_indices.empty() && opts_.escape_check_interval_us > 0.0) {
            const double last = pb_.sample_times.empty() ? pb_.t_end : pb_.sample_times.back();
            for (double t = pb_.t_start + opts_.escape_check_interval_us; t < last - 1e-12;
                 t += opts_.escape_check_interval_us)
                marks.emplace_back(t, false);
        }
        std::sort(marks.begin(), marks.end());
        double t = pb_.t_start;
        for (const auto& [tm, is_sample] : marks) {
            Segment s;
            s.t0 = t;
            const double span = tm - t;
            s.steps = span > 1e-15 ? static_cast<std::size_t>(std::ceil(span / dt_ - 1e-9)) : 0;
            s.h = s.steps ? span / static_cast<double>(s.steps) : 0.0;
            s.sample = is_sample;
            s.check_escape = !opts_.escape_indices.empty();
            schedule_.push_back(s);
            t = std::max(t, tm);
        }
    }

    void step_factors(double h, std::vector<cplx>& out) const {
        const auto& f = model_.hamiltonian_freqs.freqs();
        out.resize(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = cplx(std::cos(f[i] * h), std::sin(f[i] * h));
    }

    // out = -i H_eff psi
    void apply_heff(const std::vector<cplx>& ph, const Vector& psi, Vector& out) const {
        const int n = model_.dim();
        out.resize(n);
        for (int j = 0; j < n; ++j) out(j) = detail::mul(model_.heff_diag(j), psi(j));
        for (const auto& e : model_.heff)
            out(e.row) += detail::mul(detail::mul(e.value, ph[static_cast<std::size_t>(e.phase)]), psi(e.col));
        for (int j = 0; j < n; ++j) out(j) = cplx(out(j).imag(), -out(j).real());
    }

    void apply_collapse(std::size_t k, double t, const Vector& psi, Vector& out, std::vector<cplx>& jph) const {
        model_.jump_freqs.evaluate(t, jph);
        out.setZero(model_.dim());
        for (const auto& e : model_.collapse[k].entries)
            out(e.row) += detail::mul(detail::mul(e.value, jph[static_cast<std::size_t>(e.phase)]), psi(e.col));
    }

    double flagged_population(const Vector& psi) const {
        double s = 0.0;
        for (int j = 0; j < psi.size(); ++j)
            if (flagged_[static_cast<std::size_t>(j)]) s += std::norm(psi(j));
        return s;
    }

    void jump(double t, Vector& psi, std::mt19937_64& rng, TrajectoryRecord& rec, std::vector<cplx>& jph) const {
        const std::size_t nc = model_.collapse.size();
        if (nc == 0) return;
        std::vector<Vector> outs(nc);
        std::vector<double> w(nc);
        double total = 0.0;
        for (std::size_t k = 0; k < nc; ++k) {
            apply_collapse(k, t, psi, outs[k], jph);
            w[k] = outs[k].squaredNorm();
            total += w[k];
        }
        if (!(total > 0.0)) {
            psi.normalize();
            return;
        }
        const double u = uniform01(rng) * total;
        std::size_t k = 0;
        double acc = w[0];
        while (k + 1 < nc && u >= acc) acc += w[++k];
        if (!opts_.escape_indices.empty()) {
            Vector proj = psi;
            for (int j = 0; j < proj.size(); ++j)
                if (!flagged_[static_cast<std::size_t>(j)]) proj(j) = 0.0;
            Vector lp;
            apply_collapse(k, t, proj, lp, jph);
            if (w[k] > 0.0 && lp.squaredNorm() / w[k] > opts_.escape_threshold) rec.escaped = true;
        }
        psi = outs[k] / std::sqrt(w[k]);
        rec.jump_log.push_back({t, k});
    }

    QuantumState lab_state(const Vector& psi_i, double t) const {
        const auto& layout = pb_.hamiltonian.layout();
        Vector full = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
        const double nrm = psi_i.norm();
        for (int j = 0; j < model_.dim(); ++j)
            full(model_.sub[static_cast<std::size_t>(j)]) = psi_i(j) * std::exp(-kI * model_.d(j) * t) / nrm;
        return QuantumState::pure(layout, full, 1e-8);
    }

    EvolutionProblem pb_;
    TrajectoryOptions opts_;
    detail::CompiledModel model_;
    double dt_ = 0.0;
    std::vector<char> flagged_;
    std::vector<double> weights_;
    std::vector<Vector> vectors_;
    std::vector<Segment> schedule_;
};

inline TrajectoryRecord run_trajectory(const EvolutionProblem& pb, std::uint64_t seed,
                                       const TrajectoryOptions& opts = {}) {
    return TrajectorySolver(pb, opts).run(seed);
}

inline std::vector<TrajectoryRecord> run_trajectories(const EvolutionProblem& pb,
                                                      const std::vector<std::uint64_t>& seeds,
                                                      const TrajectoryOptions& opts = {}, std::size_t jobs = 1) {
    const TrajectorySolver solver(pb, opts);
    return parallel_map(seeds.size(), jobs, [&](std::size_t i) { return solver.run(seeds[i]); });
}

struct EnsembleAverage {
    QuantumState mean;
    Eigen::MatrixXd std_error;  // per-entry standard error of the mean
};

/// Mean of |psi><psi| over the records, summed in record order.
inline EnsembleAverage ensemble_average(const std::vector<QuantumState>& states, const SpaceLayout& layout) {
    if (states.empty()) throw ConfigError("ensemble average needs at least one record");
    const auto d = static_cast<Eigen::Index>(layout.total_dim());
    Matrix sum = Matrix::Zero(d, d);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(d, d);
    for (const auto& s : states) {
        if (!(s.layout() == layout)) throw DimensionError("record layout mismatch");
        const Matrix r = s.density_matrix();
        sum += r;
        sum2 += r.cwiseAbs2();
    }
    const double m = static_cast<double>(states.size());
    EnsembleAverage out;
    Matrix mean = sum / m;
    Eigen::MatrixXd var = (sum2 / m - mean.cwiseAbs2()).cwiseMax(0.0);
    out.std_error = Eigen::MatrixXd::Zero(d, d);
    if (m > 1) out.std_error = (var / (m - 1.0)).cwiseSqrt();
    out.mean = QuantumState::unchecked(layout, std::move(mean));
    return out;
}

inline EnsembleAverage ensemble_average(const std::vector<TrajectoryRecord>& records, const SpaceLayout& layout) {
    std::vector<QuantumState> finals;
    finals.reserve(records.size());
    for (const auto& r : records) finals.push_back(r.final_state);
    return ensemble_average(finals, layout);
}

/// Binary symmetric channel on the escape flag, seeded from the record seed.
inline bool escape_detector(const TrajectoryRecord& record, double detection_fidelity, std::uint64_t salt = 0) {
    if (!(detection_fidelity > 0.5 && detection_fidelity <= 1.0))
        throw ConfigError("detection fidelity must lie in (0.5, 1]");
    std::mt19937_64 rng(splitmix64(record.seed ^ splitmix64(salt + 0xD1B54A32D192ED03ULL)));
    const bool flip = uniform01(rng) >= detection_fidelity;
    return flip ? !record.escaped : record.escaped;
}

}  // namespace zenosim

#pragma once

// Protocols: ideal Zeno algebra, the gate, and the blocking and amplitude sweeps.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zenosim/calib.hpp"
#include "zenosim/cavity_prep.hpp"
#include "zenosim/device.hpp"
#include "zenosim/lindblad.hpp"
#include "zenosim/metrics.hpp"
#include "zenosim/parallel.hpp"
#include "zenosim/sweep.hpp"

namespace zenosim {

/// Qutrit followed by n qubits.
inline SpaceLayout zeno_layout(std::size_t n_qubits) {
    if (n_qubits < 1) throw ConfigError("need at least one qubit");
    if (n_qubits > 3) throw DimensionError("ideal model supports at most 3 qubits");
    auto l = SpaceLayout::qutrit();
    for (std::size_t i = 0; i < n_qubits; ++i) l = l.concat(SpaceLayout::qubit());
    return l;
}

/// 1 - |f e...e><f e...e|.
inline Operator zeno_projector(const SpaceLayout& layout) {
    std::vector<std::string> labels{"f"};
    for (std::size_t i = 1; i < layout.rank(); ++i) labels.push_back("e");
    auto p = Operator::identity(layout);
    Matrix m = p.matrix();
    const auto k = static_cast<Eigen::Index>(layout.index(labels));
    m(k, k) = 0.0;
    return Operator(layout, std::move(m));
}

/// P H P with H = i(W/2)(|e><f| - |f><e|) on the qutrit; W in rad/us.
inline Operator ideal_zeno_hamiltonian(double rabi, std::size_t n_qubits) {
    const auto layout = zeno_layout(n_qubits);
    const Operator up = transition(layout, kQutrit, "e", "f");
    const Matrix h = kI * (0.5 * rabi) * (up.matrix() - up.matrix().adjoint());
    const Matrix p = zeno_projector(layout).matrix();
    return Operator::hamiltonian(layout, p * h * p);
}

/// exp(-i H_Zeno t) with t = 2 pi / W (one full Rabi cycle).
inline Operator ideal_gate_unitary(double rabi, std::size_t n_qubits) {
    const auto h = ideal_zeno_hamiltonian(rabi, n_qubits);
    return Operator(h.layout(), unitary_propagator(h.matrix(), kTwoPi / rabi));
}

/// Indices of kets with the qutrit in g or e.
inline std::vector<Eigen::Index> computational_indices(const SpaceLayout& layout) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < layout.total_dim(); ++i)
        if (layout.levels(i)[0] < 2) idx.push_back(static_cast<Eigen::Index>(i));
    return idx;
}

inline Matrix computational_block(const Operator& op) {
    const auto idx = computational_indices(op.layout());
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = op.matrix()(idx[i], idx[j]);
    return out;
}

enum class GateModel { full_cavity, ideal_markovian, ideal_unitary };

inline std::string to_string(GateModel m) {
    switch (m) {
        case GateModel::full_cavity: return "full-cavity";
        case GateModel::ideal_markovian: return "ideal-markovian";
        case GateModel::ideal_unitary: return "ideal-unitary";
    }
    return "?";
}

inline GateModel parse_gate_model(const std::string& s) {
    if (s == "full-cavity") return GateModel::full_cavity;
    if (s == "ideal-markovian") return GateModel::ideal_markovian;
    if (s == "ideal-unitary") return GateModel::ideal_unitary;
    throw ConfigError("unknown model '" + s + "'");
}

/// Measurement rate of the continuous-measurement limit, 4 eps^2 / kappa, 1/us.
inline double markovian_gamma(const DeviceParams& p, double eps_mhz) {
    const double eps = mhz_to_angular(eps_mhz);
    return 4.0 * eps * eps / p.kappa();
}

/// Qutrit and qubit decoherence channels without the cavity.
inline std::vector<Operator> qubit_collapse_ops(const DeviceParams& p) {
    const auto full = SpaceLayout::qutrit_qubit_cavity(2);
    const auto qq = SpaceLayout::qutrit_qubit();
    std::vector<Operator> out;
    for (const auto& c : collapse_channels(p, full)) {
        if (c.label == "cavity_decay") continue;
        Matrix m(6, 6);
        for (Eigen::Index i = 0; i < 6; ++i)
            for (Eigen::Index j = 0; j < 6; ++j) m(i, j) = c.op.matrix()(2 * i, 2 * j);
        out.emplace_back(qq, std::move(m));
    }
    return out;
}

struct GateProtocol {
    QuantumState initial;  // qutrit x qubit
    DriveConfig drives;
    DeviceParams params;
    std::vector<double> sample_times;  // measured from the start of the Rabi pulse, us
    GateModel model = GateModel::full_cavity;
    SimSettings sim;
    bool ideal_with_decoherence = false;
};

struct GateRun {
    std::vector<double> times;            // local times
    std::vector<QuantumState> reduced;    // qutrit x qubit, f level in the Rabi frame
    std::vector<QuantumState> full;       // with cavity; empty for the ideal models
    EvolutionDiagnostics diagnostics;
    double t_prep = 0.0;
    double rabi_frame_freq = 0.0;  // rad/us, f-level frame used for the reduced states
};

/// Moves the qutrit f level into the frame of the Rabi tone.
inline Matrix rabi_frame_correction(const Matrix& rho6, double phase) {
    Matrix r = rho6;
    const cplx u = std::exp(kI * phase);
    for (Eigen::Index i = 4; i < 6; ++i) {
        r.row(i) *= u;
        r.col(i) *= std::conj(u);
    }
    return r;
}

/// Full-cavity problem of a gate protocol: cavity ring-up with the qubits in |gg>,
/// then the Rabi pulse from t_prep. Sample times are shifted by t_prep.
struct GateProblem {
    EvolutionProblem problem;
    double t_prep = 0.0;
    double rabi_frame_freq = 0.0;  // rad/us

    /// Qutrit x qubit state at local time t with the f level in the Rabi frame.
    [[nodiscard]] QuantumState reduce(const QuantumState& full, double t_local) const {
        Matrix red = partial_trace(full, {kQutrit, kQubit}).density_matrix();
        return QuantumState::unchecked(SpaceLayout::qutrit_qubit(), rabi_frame_correction(red, rabi_frame_freq * t_local));
    }
};

inline GateProblem build_gate_problem(const GateProtocol& g) {
    if (!g.drives.stark) throw ConfigError("full-cavity gate needs Stark shifts (calibrated or explicit zeros)");
    std::vector<double> ts = g.sample_times;
    if (ts.empty()) ts = {g.drives.gate_time()};
    const auto prep = prepare_cavity_state(g.params, g.drives, "g", "g", g.sim);
    DriveConfig drives = g.drives;
    drives.rabi_t0_us = prep.t_prep;
    const auto layout = SpaceLayout::qutrit_qubit_cavity(g.sim.fock);

    GateProblem gp;
    gp.t_prep = prep.t_prep;
    auto& pb = gp.problem;
    pb.hamiltonian = full_sim_hamiltonian(g.params, drives, layout);
    pb.collapse_ops = build_collapse_ops(g.params, layout);
    pb.initial = attach_cavity(g.initial, prep.rho_cav);
    pb.t_start = prep.t_prep;
    pb.t_end = prep.t_prep + ts.back();
    pb.dt = g.sim.dt_us;
    pb.options.refine_dt = g.sim.refine_dt;
    for (double t : ts) pb.sample_times.push_back(prep.t_prep + t);
    gp.rabi_frame_freq = drives.rabi_transition == RabiTransition::ef
                             ? mhz_to_angular(g.params.alpha1_mhz + drives.stark->ef)
                             : 0.0;
    return gp;
}

inline GateRun run_gate_detailed(const GateProtocol& g) {
    if (g.initial.layout().dims() != std::vector<std::size_t>{3, 2})
        throw DimensionError("gate input must be a qutrit x qubit state");
    g.drives.check();
    std::vector<double> ts = g.sample_times;
    if (ts.empty()) ts = {g.drives.gate_time()};
    for (double t : ts)
        if (t < 0.0) throw ConfigError("sample times must be >= 0");
    const double rabi = mhz_to_angular(g.drives.rabi_mhz);
    const auto qq = SpaceLayout::qutrit_qubit();

    GateRun run;
    run.times = ts;
    if (g.model == GateModel::ideal_unitary) {
        const Matrix h = ideal_zeno_hamiltonian(rabi, 1).matrix();
        const Matrix rho0 = g.initial.density_matrix();
        for (double t : ts) {
            const Matrix u = unitary_propagator(h, t);
            run.reduced.push_back(QuantumState::unchecked(qq, u * rho0 * u.adjoint()));
        }
        return run;
    }
    if (g.model == GateModel::ideal_markovian) {
        auto pb = build_ideal_zeno_problem(rabi, markovian_gamma(g.params, g.drives.zeno_eps_mhz),
                                           zeno_projector(qq), g.initial, ts.back(), g.drives.rabi_transition);
        if (g.ideal_with_decoherence)
            for (auto& c : qubit_collapse_ops(g.params)) pb.collapse_ops.push_back(c);
        pb.sample_times = ts;
        pb.dt = g.sim.dt_us;
        auto res = evolve_master_detailed(pb);
        run.reduced = std::move(res.states);
        run.diagnostics = res.diagnostics;
        return run;
    }

    const auto gp = build_gate_problem(g);
    run.t_prep = gp.t_prep;
    run.rabi_frame_freq = gp.rabi_frame_freq;
    auto res = evolve_master_detailed(gp.problem);
    run.diagnostics = res.diagnostics;
    for (std::size_t i = 0; i < ts.size(); ++i) run.reduced.push_back(gp.reduce(res.states[i], ts[i]));
    run.full = std::move(res.states);
    return run;
}

inline std::vector<QuantumState> run_gate(const GateProtocol& g) { return run_gate_detailed(g).reduced; }

/// Conditional phase (phi_ee - phi_eg) - (phi_ge - phi_gg) read off a qutrit x qubit state.
inline double entangling_phase(const QuantumState& rho6) {
    const Matrix r = rho6.density_matrix();
    return std::arg(r(kEE, kEG) * std::conj(r(kGE, kGG)));
}

struct GateSummary {
    double fidelity = 0.0;
    double concurrence = 0.0;
    double p_fe = 0.0;
    double comp_weight = 0.0;
    double phase_eg_gg = 0.0;
};

inline GateSummary summarize_gate_state(const QuantumState& rho6) {
    GateSummary s;
    s.fidelity = state_fidelity(rho6, gate_target_state());
    const auto comp = computational_projection(rho6);
    s.concurrence = concurrence(comp);
    s.comp_weight = comp.subspace_weight;
    s.p_fe = rho6.population(kFE);
    s.phase_eg_gg = std::arg(rho6.density_matrix()(kEG, kGG));
    return s;
}

/// P(gg) after a g-e Rabi pi pulse under a Zeno tone on the |eg> cavity line.
inline double blocking_point(const DeviceParams& p, double rabi_mhz, double eps_mhz, GateModel model,
                             const SimSettings& sim) {
    const auto qq = SpaceLayout::qutrit_qubit();
    const double duration = 0.5 / rabi_mhz;
    if (model == GateModel::ideal_markovian) {
        Matrix proj = Matrix::Identity(6, 6);
        proj(kEG, kEG) = 0.0;
        auto pb = build_ideal_zeno_problem(mhz_to_angular(rabi_mhz), markovian_gamma(p, eps_mhz),
                                           Operator(qq, proj), basis_state(qq, {"g", "g"}), duration,
                                           RabiTransition::ge);
        for (auto& c : qubit_collapse_ops(p)) pb.collapse_ops.push_back(c);
        pb.dt = sim.dt_us;
        return evolve_master(pb).back().population(kGG);
    }
    if (model != GateModel::full_cavity) throw ConfigError("blocking supports full-cavity and ideal-markovian");
    DriveConfig d;
    d.rabi_mhz = rabi_mhz;
    d.zeno_eps_mhz = eps_mhz;
    d.symmetric_on = false;
    d.zeno_target = ZenoTarget::eg;
    d.rabi_transition = RabiTransition::ge;
    d.stark = StarkShifts{};
    d.gate_time_us = duration;
    GateProtocol g{basis_state(qq, {"g", "g"}), d, p, {duration}, GateModel::full_cavity, sim};
    return run_gate(g).back().population(kGG);
}

inline SweepResult blocking_experiment(const DeviceParams& p, const std::vector<double>& rabi_list,
                                       const std::vector<double>& eps_list, GateModel model,
                                       const SimSettings& sim = {}, std::size_t jobs = 1) {
    struct Point {
        double rabi, eps;
    };
    std::vector<Point> pts;
    for (double r : rabi_list)
        for (double e : eps_list) pts.push_back({r, e});
    const auto vals = parallel_map(pts.size(), jobs, [&](std::size_t i) {
        return blocking_point(p, pts[i].rabi, pts[i].eps, model, sim);
    });
    SweepResult out({"rabi_mhz", "eps_mhz", "model", "p_gg"});
    for (std::size_t i = 0; i < pts.size(); ++i) out.add_row({pts[i].rabi, pts[i].eps, to_string(model), vals[i]});
    return out;
}

enum class Coherence { finite, infinite };

struct EpsilonSweepOptions {
    SimSettings sim;
    RamseyOptions ramsey;
    std::optional<StarkTable> stark_table;  // calibrated per point when empty
    bool calibrate = true;                   // false drives at the bare frequencies
    std::size_t jobs = 1;
};

inline SweepResult epsilon_sweep(DeviceParams p, double rabi_mhz, const std::vector<double>& eps_list,
                                 Coherence coherence, const EpsilonSweepOptions& o = {}) {
    if (coherence == Coherence::infinite) p = p.with_infinite_coherence();
    const auto qq = SpaceLayout::qutrit_qubit();
    const auto vals = parallel_map(eps_list.size(), o.jobs, [&](std::size_t i) {
        DriveConfig d;
        d.rabi_mhz = rabi_mhz;
        d.zeno_eps_mhz = eps_list[i];
        if (!o.calibrate)
            d.stark = StarkShifts{};
        else if (o.stark_table)
            d.stark = o.stark_table->at(eps_list[i]);
        else {
            RamseyOptions ro = o.ramsey;
            ro.sim = o.sim;
            d.stark = calibrate_stark(p, d, ro);
        }
        GateProtocol g{plus_state(qq), d, p, {d.gate_time()}, GateModel::full_cavity, o.sim};
        const auto s = summarize_gate_state(run_gate(g).back());
        return std::pair{s, *d.stark};
    });
    SweepResult out({"eps_mhz", "fidelity", "concurrence", "p_fe", "comp_weight", "stark_g1e1_mhz",
                     "stark_g2e2_mhz", "stark_ef_mhz"});
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const auto& [s, st] = vals[i];
        out.add_row({eps_list[i], s.fidelity, s.concurrence, s.p_fe, s.comp_weight, st.g1e1, st.g2e2, st.ef});
    }
    return out;
}

}  // namespace zenosim

#pragma once

// Subcommand dispatch and output files (CSV tables plus a JSON metadata record).

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "zenosim/bounds.hpp"
#include "zenosim/calib.hpp"
#include "zenosim/cli/spec.hpp"
#include "zenosim/sweep.hpp"
#include "zenosim/tomo.hpp"
#include "zenosim/traject.hpp"
#include "zenosim/zeno.hpp"

namespace zenosim::cli {

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

inline std::string spec_hash(const ExperimentSpec& s) { return sha256_hex(to_json(s).dump()); }

/// Named tables produced by one subcommand, in output order.
struct CommandOutput {
    std::vector<std::pair<std::string, SweepResult>> tables;
    std::map<std::string, std::string> metadata;
};

inline const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> n{"block-sweep",    "gate-evolve", "eps-sweep", "bound-table",
                                            "tomo-roundtrip", "postselect",  "calibrate", "trajectories"};
    return n;
}

namespace detail {

inline std::string file_stem(const std::string& name) {
    std::string s = name;
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

inline QuantumState input_state(const std::string& label) {
    const auto qq = SpaceLayout::qutrit_qubit();
    if (label.size() != 2) throw ConfigError("gate input must be two characters from g, e, +, -");
    auto amps = [](char c) -> std::pair<cplx, cplx> {
        const double r = 1.0 / std::sqrt(2.0);
        switch (c) {
            case 'g': return {1.0, 0.0};
            case 'e': return {0.0, 1.0};
            case '+': return {r, r};
            case '-': return {r, -r};
            default: throw ConfigError(std::string("unknown input symbol '") + c + "'");
        }
    };
    const auto [a0, a1] = amps(label[0]);
    const auto [b0, b1] = amps(label[1]);
    Vector v = Vector::Zero(6);
    v(kGG) = a0 * b0;
    v(kGE) = a0 * b1;
    v(kEG) = a1 * b0;
    v(kEE) = a1 * b1;
    return QuantumState::pure(qq, v);
}

inline RamseyOptions ramsey_options(const ExperimentSpec& s) {
    RamseyOptions o = s.ramsey;
    o.sim = s.sim;
    return o;
}

inline StarkShifts resolve_stark(const ExperimentSpec& s, const DeviceParams& p, const DriveConfig& d) {
    if (s.stark.mode == "zero") return {};
    if (s.stark.mode == "explicit") return s.stark.values;
    return calibrate_stark(p, d, ramsey_options(s));
}

inline double nan_if_empty(const std::optional<double>& v) {
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

inline const char* comp_label(Eigen::Index i) {
    static const char* labels[] = {"gg", "ge", "eg", "ee", "fg", "fe"};
    return labels[i];
}

inline void add_rho_rows(SweepResult& out, double t, const Matrix& rho) {
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j)
            out.add_row({t, std::string(comp_label(i)), std::string(comp_label(j)), rho(i, j).real(), rho(i, j).imag()});
}

inline double safe_concurrence(const QuantumState& rho6) {
    try {
        return concurrence(computational_projection(rho6));
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

inline GateProtocol gate_protocol(const ExperimentSpec& s, std::vector<double> times) {
    DriveConfig d = s.drives;
    if (parse_gate_model(s.gate_evolve.model) == GateModel::full_cavity) d.stark = resolve_stark(s, s.device, d);
    return GateProtocol{input_state(s.gate_evolve.input), d, s.device, std::move(times),
                        parse_gate_model(s.gate_evolve.model), s.sim, s.gate_evolve.ideal_with_decoherence};
}

inline std::vector<std::uint64_t> trajectory_seeds(std::uint64_t base, std::size_t n) {
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = splitmix64(base + i);
    return seeds;
}

struct TrajectoryEnsemble {
    GateProblem gate;
    std::vector<TrajectoryRecord> records;
    std::vector<QuantumState> reduced;
};

inline TrajectoryEnsemble gate_trajectories(const ExperimentSpec& s, std::size_t count) {
    ExperimentSpec local = s;
    local.gate_evolve.model = "full-cavity";
    auto g = gate_protocol(local, {});
    const double tg = g.drives.gate_time();
    g.sample_times = {tg};
    TrajectoryEnsemble e;
    e.gate = build_gate_problem(g);
    TrajectoryOptions o;
    o.escape_indices = fe_manifold(e.gate.problem.hamiltonian.layout());
    o.keep_samples = false;
    e.records = run_trajectories(e.gate.problem, trajectory_seeds(s.seed, count), o, static_cast<std::size_t>(s.jobs));
    for (const auto& r : e.records) e.reduced.push_back(e.gate.reduce(r.final_state, tg));
    return e;
}

}  // namespace detail

inline CommandOutput run_block_sweep(const ExperimentSpec& s) {
    CommandOutput out;
    SweepResult all({"rabi_mhz", "eps_mhz", "model", "p_gg"});
    for (const auto& m : s.block_sweep.models) {
        const auto r = blocking_experiment(s.device, s.block_sweep.rabi_mhz, s.block_sweep.eps_mhz,
                                           parse_gate_model(m), s.sim, static_cast<std::size_t>(s.jobs));
        for (const auto& row : r.rows) all.add_row(row);
    }
    out.tables.emplace_back("block_sweep", std::move(all));
    return out;
}

inline CommandOutput run_gate_evolve(const ExperimentSpec& s) {
    const double tg = s.drives.gate_time();
    const auto intervals = static_cast<std::size_t>(std::ceil(tg / s.gate_evolve.sample_stride_us - 1e-9));
    auto g = detail::gate_protocol(s, linspace_times(0.0, tg, intervals));
    const auto run = run_gate_detailed(g);

    CommandOutput out;
    SweepResult summary({"t_us", "fidelity", "concurrence", "p_fe", "comp_weight", "phase_eg_gg"});
    SweepResult rho({"t_us", "row", "col", "re", "im"});
    for (std::size_t i = 0; i < run.times.size(); ++i) {
        const auto& st = run.reduced[i];
        const double w = st.population(kGG) + st.population(kGE) + st.population(kEG) + st.population(kEE);
        summary.add_row({run.times[i], state_fidelity(st, gate_target_state()), detail::safe_concurrence(st),
                         st.population(kFE), w, std::arg(st.density_matrix()(kEG, kGG))});
        detail::add_rho_rows(rho, run.times[i], st.density_matrix());
    }
    out.tables.emplace_back("gate_evolve", std::move(summary));
    out.tables.emplace_back("gate_evolve_rho", std::move(rho));
    if (s.gate_evolve.n_cut && !run.full.empty()) {
        SweepResult trunc({"t_us", "row", "col", "re", "im"});
        for (std::size_t i = 0; i < run.times.size(); ++i) {
            const auto st = truncation_model(run.full[i], static_cast<std::size_t>(*s.gate_evolve.n_cut),
                                             run.rabi_frame_freq * run.times[i]);
            detail::add_rho_rows(trunc, run.times[i], st.density_matrix());
        }
        out.tables.emplace_back("gate_evolve_truncated_rho", std::move(trunc));
    }
    if (g.drives.stark) {
        out.metadata["stark_g1e1_mhz"] = format_number(g.drives.stark->g1e1);
        out.metadata["stark_g2e2_mhz"] = format_number(g.drives.stark->g2e2);
        out.metadata["stark_ef_mhz"] = format_number(g.drives.stark->ef);
    }
    out.metadata["dt_used_us"] = format_number(run.diagnostics.dt_used);
    return out;
}

inline CommandOutput run_eps_sweep(const ExperimentSpec& s) {
    EpsilonSweepOptions o;
    o.sim = s.sim;
    o.ramsey = detail::ramsey_options(s);
    o.calibrate = s.eps_sweep.calibrate && s.stark.mode == "calibrate";
    if (s.stark.mode == "explicit") throw ConfigError("eps-sweep calibrates per point; use stark: calibrate or zero");
    o.jobs = static_cast<std::size_t>(s.jobs);
    CommandOutput out;
    out.tables.emplace_back("eps_sweep", epsilon_sweep(s.device, s.drives.rabi_mhz, s.eps_sweep.eps_mhz,
                                                       s.eps_sweep.coherence == "infinite" ? Coherence::infinite
                                                                                           : Coherence::finite,
                                                       o));
    return out;
}

inline std::vector<double> bound_ratios(const BoundTableSpec& b) {
    if (!b.ratios.empty()) return b.ratios;
    std::vector<double> r;
    for (std::int64_t i = 1; i <= b.grid_points; ++i)
        r.push_back(b.max_ratio * static_cast<double>(i) / static_cast<double>(b.grid_points));
    return r;
}

inline CommandOutput run_bound_table(const ExperimentSpec& s) {
    const auto ratios = bound_ratios(s.bound_table);
    const double rabi = mhz_to_angular(s.drives.rabi_mhz);
    if (!(rabi > 0.0)) throw ConfigError("bound-table needs drives.rabi_mhz > 0");
    LowerEstimateOptions o;
    o.samples = static_cast<std::size_t>(s.bound_table.samples);
    o.refine_steps = static_cast<std::size_t>(s.bound_table.refine_steps);
    o.seed = s.seed;
    const auto lower = parallel_map(ratios.size(), static_cast<std::size_t>(s.jobs), [&](std::size_t i) {
        return gate_lower_estimate(rabi, rabi / ratios[i], o).diamond;
    });
    SweepResult t({"ratio", "analytic", "loosened", "lower_estimate"});
    for (std::size_t i = 0; i < ratios.size(); ++i)
        t.add_row({ratios[i], gate_bound(ratios[i]), loosened_bound(ratios[i]), lower[i]});
    CommandOutput out;
    out.tables.emplace_back("bound_table", std::move(t));
    return out;
}

inline QuantumState random_density_matrix(std::size_t d, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) g.col(j) = zenosim::detail::gaussian_vector(n, rng);
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return QuantumState::mixed(SpaceLayout::qutrit_qubit(), rho);
}

inline CommandOutput run_tomo_roundtrip(const ExperimentSpec& s) {
    const auto set = build_observable_set();
    std::mt19937_64 rng(s.seed);
    const double sc = s.tomo_roundtrip.scale;
    SweepResult t({"index", "shots", "scale", "trace_distance", "purity_true", "purity_estimate"});
    for (std::int64_t i = 0; i < s.tomo_roundtrip.states; ++i) {
        const auto rho = random_density_matrix(6, rng);
        auto data = simulate_tomography(rho, set, static_cast<std::uint64_t>(s.tomo_roundtrip.shots),
                                        splitmix64(s.seed + static_cast<std::uint64_t>(i)));
        for (auto& e : data.expectations) e *= sc;
        const auto est = mle_reconstruct(data);
        const auto expected =
            QuantumState::unchecked(rho.layout(), sc * rho.density_matrix() + (1.0 - sc) / 6.0 * Matrix::Identity(6, 6));
        t.add_row({i, s.tomo_roundtrip.shots, sc, trace_distance(est, expected), expected.purity(), est.purity()});
    }
    CommandOutput out;
    out.tables.emplace_back("tomo_roundtrip", std::move(t));
    return out;
}

inline CommandOutput run_postselect(const ExperimentSpec& s) {
    const auto ens = detail::gate_trajectories(s, static_cast<std::size_t>(s.postselect.trajectories));
    SweepResult t({"detection_fidelity", "discard_fraction", "kept", "fidelity", "concurrence"});
    std::size_t escaped = 0;
    for (const auto& r : ens.records) escaped += r.escaped ? 1 : 0;
    for (std::size_t k = 0; k < s.postselect.detection_fidelity.size(); ++k) {
        const double fd = s.postselect.detection_fidelity[k];
        std::vector<bool> flags;
        for (const auto& r : ens.records) flags.push_back(escape_detector(r, fd, k));
        const auto ps = postselect_analysis(ens.reduced, ens.records, flags, gate_target_state(), s.postselect.fractions);
        for (const auto& row : ps.rows) {
            std::vector<Cell> full{fd};
            full.insert(full.end(), row.begin(), row.end());
            t.add_row(std::move(full));
        }
    }
    CommandOutput out;
    out.tables.emplace_back("postselect", std::move(t));
    out.metadata["escape_fraction"] =
        format_number(static_cast<double>(escaped) / static_cast<double>(ens.records.size()));
    return out;
}

inline CommandOutput run_calibrate(const ExperimentSpec& s) {
    struct Point {
        double eps;
        bool sym;
    };
    std::vector<Point> pts;
    for (double e : s.calibrate.eps_mhz)
        for (bool sym : s.calibrate.symmetric) pts.push_back({e, sym});
    const auto ro = detail::ramsey_options(s);
    static const std::pair<const char*, const char*> pairs[] = {{"gg", "eg"}, {"ge", "ee"}, {"gg", "ge"}, {"eg", "ee"}};
    struct PairOut {
        std::string label;
        RamseyResult r;
        double analytic;
    };
    const auto results = parallel_map(pts.size(), static_cast<std::size_t>(s.jobs), [&](std::size_t i) {
        DriveConfig d = s.drives;
        d.zeno_eps_mhz = pts[i].eps;
        d.symmetric_on = pts[i].sym;
        d.stark = StarkShifts{};
        std::vector<PairOut> rows;
        for (const auto& [a, b] : pairs)
            rows.push_back({std::string(a) + "-" + b, simulated_ramsey(s.device, d, a, b, ro),
                            detail::nan_if_empty(analytic_stark_shift_mhz(s.device, d, a, b))});
        const double g1e1 = 0.5 * (rows[0].r.shift_mhz + rows[1].r.shift_mhz);
        const double g2e2 = 0.5 * (rows[2].r.shift_mhz + rows[3].r.shift_mhz);
        d.stark = StarkShifts{g1e1, g2e2, 0.0};
        rows.push_back({"eg-fg", simulated_ramsey(s.device, d, "eg", "fg", ro),
                        detail::nan_if_empty(analytic_stark_shift_mhz(s.device, d, "eg", "fg"))});
        return rows;
    });
    SweepResult t({"eps_mhz", "symmetric_on", "pair", "shift_mhz", "analytic_mhz", "residual_rad", "fit_ok"});
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (const auto& row : results[i])
            t.add_row({pts[i].eps, static_cast<std::int64_t>(pts[i].sym), row.label, row.r.shift_mhz, row.analytic,
                       row.r.residual_rms, static_cast<std::int64_t>(row.r.fit_ok)});
    CommandOutput out;
    out.tables.emplace_back("calibrate", std::move(t));
    return out;
}

inline CommandOutput run_trajectories_cmd(const ExperimentSpec& s) {
    const auto ens = detail::gate_trajectories(s, static_cast<std::size_t>(s.trajectories.count));
    SweepResult t({"seed", "escaped", "jumps", "fidelity", "p_fe"});
    for (std::size_t i = 0; i < ens.records.size(); ++i) {
        const auto& r = ens.records[i];
        t.add_row({std::to_string(r.seed), static_cast<std::int64_t>(r.escaped),
                   static_cast<std::int64_t>(r.jump_log.size()), state_fidelity(ens.reduced[i], gate_target_state()),
                   ens.reduced[i].population(kFE)});
    }
    const auto avg = ensemble_average(ens.reduced, SpaceLayout::qutrit_qubit());
    CommandOutput out;
    out.tables.emplace_back("trajectories", std::move(t));
    out.metadata["ensemble_fidelity"] = format_number(state_fidelity(avg.mean, gate_target_state()));
    out.metadata["max_std_error"] = format_number(avg.std_error.maxCoeff());
    return out;
}

inline CommandOutput run_subcommand(const std::string& name, const ExperimentSpec& s) {
    static const std::map<std::string, std::function<CommandOutput(const ExperimentSpec&)>> table{
        {"block-sweep", run_block_sweep}, {"gate-evolve", run_gate_evolve},       {"eps-sweep", run_eps_sweep},
        {"bound-table", run_bound_table}, {"tomo-roundtrip", run_tomo_roundtrip}, {"postselect", run_postselect},
        {"calibrate", run_calibrate},     {"trajectories", run_trajectories_cmd}};
    const auto it = table.find(name);
    if (it == table.end()) {
        std::string msg = "unknown subcommand '" + name + "'";
        const auto near = nearest_key(name, subcommand_names());
        if (!near.empty()) msg += "; did you mean '" + near + "'?";
        throw ConfigError(msg);
    }
    return it->second(s);
}

/// Writes <stem>.csv per table (each row carries the spec hash) and <subcommand>.json.
inline std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const std::string& name,
                                                        const ExperimentSpec& s, const CommandOutput& out) {
    std::filesystem::create_directories(dir);
    const std::string hash = spec_hash(s);
    std::vector<std::filesystem::path> files;
    nlohmann::json meta;
    meta["subcommand"] = name;
    meta["spec_hash"] = hash;
    meta["seed"] = s.seed;
    meta["version"] = ZENOSIM_VERSION;
    meta["spec"] = to_json(s);
    meta["metadata"] = out.metadata;
    for (const auto& [stem, table] : out.tables) {
        const auto path = dir / (stem + ".csv");
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot write " + path.string());
        write_csv(os, table, {{"spec_hash", hash}});
        files.push_back(path);
        meta["files"].push_back({{"name", stem + ".csv"}, {"columns", table.columns}, {"rows", table.rows.size()}});
    }
    const auto jpath = dir / (detail::file_stem(name) + ".json");
    std::ofstream js(jpath, std::ios::binary);
    if (!js) throw Error("cannot write " + jpath.string());
    js << meta.dump(2) << '\n';
    files.push_back(jpath);
    return files;
}

}  // namespace zenosim::cli

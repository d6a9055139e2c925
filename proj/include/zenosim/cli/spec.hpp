#pragma once

// Experiment specification: a YAML tree with device, drives, sim and protocol
// sections. Unknown keys are rejected; missing keys take the measured device defaults.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zenosim/calib.hpp"
#include "zenosim/device.hpp"
#include "zenosim/zeno.hpp"

namespace zenosim::cli {

struct BlockSweepSpec {
    std::vector<double> rabi_mhz{0.1, 1.0, 2.0};
    std::vector<double> eps_mhz{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    std::vector<std::string> models{"full-cavity", "ideal-markovian"};
};

struct GateEvolveSpec {
    std::string model = "full-cavity";
    std::string input = "++";
    double sample_stride_us = 0.1;
    std::optional<std::int64_t> n_cut;  // Fock cutoff of the tomography mapping model
    bool ideal_with_decoherence = false;
};

struct EpsSweepSpec {
    std::vector<double> eps_mhz{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    std::string coherence = "finite";
    bool calibrate = true;
};

struct BoundTableSpec {
    std::vector<double> ratios;  // empty: uniform grid on (0, max_ratio]
    std::int64_t grid_points = 100;
    double max_ratio = 0.06;
    std::int64_t samples = 512;
    std::int64_t refine_steps = 64;
};

struct TomoSpec {
    std::int64_t states = 10;
    std::int64_t shots = 0;
    double scale = 1.0;
};

struct PostselectSpec {
    std::int64_t trajectories = 2000;
    std::vector<double> detection_fidelity{1.0, 0.75};
    std::vector<double> fractions{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
};

struct CalibrateSpec {
    std::vector<double> eps_mhz{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    std::vector<bool> symmetric{true, false};
};

struct TrajectoriesSpec {
    std::int64_t count = 200;
};

struct StarkSpec {
    std::string mode = "calibrate";  // calibrate | zero | explicit
    StarkShifts values;
};

struct ExperimentSpec {
    DeviceParams device;
    DriveConfig drives;
    StarkSpec stark;
    SimSettings sim;
    RamseyOptions ramsey;
    std::uint64_t seed = 1;
    std::int64_t jobs = 1;
    BlockSweepSpec block_sweep;
    GateEvolveSpec gate_evolve;
    EpsSweepSpec eps_sweep;
    BoundTableSpec bound_table;
    TomoSpec tomo_roundtrip;
    PostselectSpec postselect;
    CalibrateSpec calibrate;
    TrajectoriesSpec trajectories;
};

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest_key(const std::string& key, const std::vector<std::string>& allowed) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : allowed) {
        const auto d = levenshtein(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best_d <= std::max<std::size_t>(2, key.size() / 3) ? best : std::string{};
}

namespace detail {

inline std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.is_null()) return "";
    return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

/// One mapping node; readers record the keys they consume so leftovers can be rejected.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap())
            throw ConfigError("section '" + path_ + "' must be a mapping" + where(node_));
    }

    template <class T>
    void read(const std::string& key, T& out) {
        allowed_.push_back(key);
        if (!present(key)) return;
        const YAML::Node v = node_[key];
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("'" + path_ + "." + key + "' has the wrong type" + where(v));
        }
    }

    template <class T>
    void read_optional(const std::string& key, std::optional<T>& out) {
        allowed_.push_back(key);
        if (!present(key)) return;
        T v{};
        allowed_.pop_back();
        read(key, v);
        out = v;
    }

    Section child(const std::string& key) {
        allowed_.push_back(key);
        return Section(present(key) ? node_[key] : YAML::Node(), path_ + "." + key);
    }

    [[nodiscard]] bool present(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
    [[nodiscard]] YAML::Node raw(const std::string& key) {
        allowed_.push_back(key);
        return present(key) ? node_[key] : YAML::Node();
    }

    void reject_unknown() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (std::find(allowed_.begin(), allowed_.end(), key) != allowed_.end()) continue;
            std::string msg = "unknown key '" + path_ + "." + key + "'" + where(kv.first);
            const auto near = nearest_key(key, allowed_);
            if (!near.empty()) msg += "; did you mean '" + near + "'?";
            throw ConfigError(msg);
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::vector<std::string> allowed_;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invariant violated: " + what);
}

}  // namespace detail

inline void validate(const ExperimentSpec& s) {
    using detail::require;
    s.device.check();
    s.drives.check();
    require(s.sim.fock >= 2 && s.sim.fock <= 200, "sim.fock_dim in [2, 200]");
    require(s.sim.dt_us > 0.0, "sim.dt_ns > 0");
    require(s.sim.prep_kappa_times >= 0.0, "sim.prep_kappa_times >= 0");
    require(s.jobs >= 1, "sim.jobs >= 1");
    require(s.ramsey.fit_fraction > 0.0 && s.ramsey.fit_fraction <= 1.0, "sim.ramsey_fit_fraction in (0, 1]");
    require(s.ramsey.duration_us > 0.0 && s.ramsey.sample_dt_us > 0.0, "Ramsey duration and sampling > 0");
    for (const auto& m : s.block_sweep.models) {
        const auto gm = parse_gate_model(m);
        require(gm != GateModel::ideal_unitary, "block_sweep.models are full-cavity or ideal-markovian");
    }
    for (double v : s.block_sweep.rabi_mhz) require(v > 0.0, "block_sweep.rabi_mhz > 0");
    for (double v : s.block_sweep.eps_mhz) require(v >= 0.0, "block_sweep.eps_mhz >= 0");
    parse_gate_model(s.gate_evolve.model);
    require(s.gate_evolve.sample_stride_us > 0.0, "gate_evolve.sample_stride_us > 0");
    require(!s.gate_evolve.n_cut || *s.gate_evolve.n_cut >= 0, "gate_evolve.n_cut >= 0");
    require(s.eps_sweep.coherence == "finite" || s.eps_sweep.coherence == "infinite",
            "eps_sweep.coherence is finite or infinite");
    for (double v : s.eps_sweep.eps_mhz) require(v >= 0.0, "eps_sweep.eps_mhz >= 0");
    require(s.bound_table.grid_points >= 1, "bound_table.grid_points >= 1");
    require(s.bound_table.max_ratio > 0.0, "bound_table.max_ratio > 0");
    for (double r : s.bound_table.ratios) require(r > 0.0, "bound_table.ratios > 0");
    require(s.bound_table.samples >= 0 && s.bound_table.refine_steps >= 0, "bound_table sample counts >= 0");
    require(s.tomo_roundtrip.states >= 1 && s.tomo_roundtrip.shots >= 0, "tomo_roundtrip counts");
    require(s.tomo_roundtrip.scale > 0.0 && s.tomo_roundtrip.scale <= 1.0, "tomo_roundtrip.scale in (0, 1]");
    require(s.postselect.trajectories >= 1, "postselect.trajectories >= 1");
    for (double f : s.postselect.detection_fidelity) require(f > 0.5 && f <= 1.0, "detection_fidelity in (0.5, 1]");
    for (double f : s.postselect.fractions) require(f >= 0.0 && f < 1.0, "postselect.fractions in [0, 1)");
    for (double v : s.calibrate.eps_mhz) require(v >= 0.0, "calibrate.eps_mhz >= 0");
    require(s.trajectories.count >= 1, "trajectories.count >= 1");
}

inline ExperimentSpec parse_spec_node(const YAML::Node& root) {
    if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("spec root must be a mapping" + detail::where(root));
    ExperimentSpec s;
    detail::Section top(root, "spec");

    {
        auto d = top.child("device");
        auto& p = s.device;
        d.read("chi1_mhz", p.chi1_mhz);
        d.read("chi2_mhz", p.chi2_mhz);
        d.read("chif_mhz", p.chif_mhz);
        d.read("kappa_mhz", p.kappa_mhz);
        d.read("alpha1_mhz", p.alpha1_mhz);
        d.read("alpha2_mhz", p.alpha2_mhz);
        d.read("self_kerr_mhz", p.self_kerr_mhz);
        d.read("t1_eg_us", p.t1_eg_us);
        d.read("t1_fe_us", p.t1_fe_us);
        d.read("t2s_eg_us", p.t2s_eg_us);
        d.read("t2s_fe_us", p.t2s_fe_us);
        d.read("t1_q2_us", p.t1_q2_us);
        d.read("t2s_q2_us", p.t2s_q2_us);
        d.read("residual_zz_khz", p.residual_zz_khz);
        d.read("residual_zz_on", p.residual_zz_on);
        bool infinite = false;
        d.read("infinite_coherence", infinite);
        if (infinite) p = p.with_infinite_coherence();
        d.reject_unknown();
    }
    {
        auto d = top.child("drives");
        auto& c = s.drives;
        d.read("rabi_mhz", c.rabi_mhz);
        d.read("zeno_eps_mhz", c.zeno_eps_mhz);
        d.read("symmetric_on", c.symmetric_on);
        std::string target = "fe", transition = "ef";
        d.read("zeno_target", target);
        d.read("rabi_transition", transition);
        if (target == "fe")
            c.zeno_target = ZenoTarget::fe;
        else if (target == "eg")
            c.zeno_target = ZenoTarget::eg;
        else
            throw ConfigError("drives.zeno_target must be fe or eg");
        if (transition == "ef")
            c.rabi_transition = RabiTransition::ef;
        else if (transition == "ge")
            c.rabi_transition = RabiTransition::ge;
        else
            throw ConfigError("drives.rabi_transition must be ef or ge");
        d.read_optional("gate_time_us", c.gate_time_us);
        const YAML::Node st = d.raw("stark");
        if (d.present("stark")) {
            if (st.IsScalar()) {
                s.stark.mode = st.as<std::string>();
                if (s.stark.mode != "calibrate" && s.stark.mode != "zero")
                    throw ConfigError("drives.stark must be calibrate, zero or a mapping" + detail::where(st));
            } else if (st.IsMap()) {
                s.stark.mode = "explicit";
                detail::Section ss(st, "spec.drives.stark");
                ss.read("g1e1_mhz", s.stark.values.g1e1);
                ss.read("g2e2_mhz", s.stark.values.g2e2);
                ss.read("ef_mhz", s.stark.values.ef);
                ss.reject_unknown();
            } else {
                throw ConfigError("drives.stark must be calibrate, zero or a mapping" + detail::where(st));
            }
        }
        d.reject_unknown();
    }
    {
        auto d = top.child("sim");
        std::int64_t fock = static_cast<std::int64_t>(s.sim.fock);
        double dt_ns = s.sim.dt_us * 1e3;
        d.read("fock_dim", fock);
        d.read("dt_ns", dt_ns);
        d.read("prep_kappa_times", s.sim.prep_kappa_times);
        d.read("refine_dt", s.sim.refine_dt);
        d.read("seed", s.seed);
        d.read("jobs", s.jobs);
        d.read("ramsey_detuning_mhz", s.ramsey.detuning_mhz);
        d.read("ramsey_duration_us", s.ramsey.duration_us);
        d.read("ramsey_sample_us", s.ramsey.sample_dt_us);
        d.read("ramsey_fit_fraction", s.ramsey.fit_fraction);
        d.read("ramsey_max_residual_rad", s.ramsey.max_residual_rad);
        if (fock < 2) throw ConfigError("invariant violated: sim.fock_dim >= 2");
        s.sim.fock = static_cast<std::size_t>(fock);
        s.sim.dt_us = dt_ns * 1e-3;
        d.reject_unknown();
    }
    {
        auto pr = top.child("protocol");
        {
            auto b = pr.child("block_sweep");
            b.read("rabi_mhz", s.block_sweep.rabi_mhz);
            b.read("eps_mhz", s.block_sweep.eps_mhz);
            b.read("models", s.block_sweep.models);
            b.reject_unknown();
        }
        {
            auto g = pr.child("gate_evolve");
            g.read("model", s.gate_evolve.model);
            g.read("input", s.gate_evolve.input);
            g.read("sample_stride_us", s.gate_evolve.sample_stride_us);
            g.read_optional("n_cut", s.gate_evolve.n_cut);
            g.read("ideal_with_decoherence", s.gate_evolve.ideal_with_decoherence);
            g.reject_unknown();
        }
        {
            auto e = pr.child("eps_sweep");
            e.read("eps_mhz", s.eps_sweep.eps_mhz);
            e.read("coherence", s.eps_sweep.coherence);
            e.read("calibrate", s.eps_sweep.calibrate);
            e.reject_unknown();
        }
        {
            auto b = pr.child("bound_table");
            b.read("ratios", s.bound_table.ratios);
            b.read("grid_points", s.bound_table.grid_points);
            b.read("max_ratio", s.bound_table.max_ratio);
            b.read("samples", s.bound_table.samples);
            b.read("refine_steps", s.bound_table.refine_steps);
            b.reject_unknown();
        }
        {
            auto t = pr.child("tomo_roundtrip");
            t.read("states", s.tomo_roundtrip.states);
            t.read("shots", s.tomo_roundtrip.shots);
            t.read("scale", s.tomo_roundtrip.scale);
            t.reject_unknown();
        }
        {
            auto p = pr.child("postselect");
            p.read("trajectories", s.postselect.trajectories);
            p.read("detection_fidelity", s.postselect.detection_fidelity);
            p.read("fractions", s.postselect.fractions);
            p.reject_unknown();
        }
        {
            auto c = pr.child("calibrate");
            c.read("eps_mhz", s.calibrate.eps_mhz);
            c.read("symmetric", s.calibrate.symmetric);
            c.reject_unknown();
        }
        {
            auto t = pr.child("trajectories");
            t.read("count", s.trajectories.count);
            t.reject_unknown();
        }
        pr.reject_unknown();
    }
    top.reject_unknown();
    validate(s);
    return s;
}

inline ExperimentSpec parse_spec_string(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("spec is not valid YAML (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
    return parse_spec_node(root);
}

inline ExperimentSpec parse_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec_string(ss.str());
}

/// Canonical form of a resolved spec; the spec hash is taken over its dump.
inline nlohmann::json to_json(const ExperimentSpec& s) {
    using nlohmann::json;
    auto num = [](double v) -> json {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    const auto& p = s.device;
    json j;
    j["device"] = {{"chi1_mhz", p.chi1_mhz},
                   {"chi2_mhz", p.chi2_mhz},
                   {"chif_mhz", p.chif_mhz},
                   {"kappa_mhz", p.kappa_mhz},
                   {"alpha1_mhz", p.alpha1_mhz},
                   {"alpha2_mhz", p.alpha2_mhz},
                   {"self_kerr_mhz", p.self_kerr_mhz},
                   {"t1_eg_us", num(p.t1_eg_us)},
                   {"t1_fe_us", num(p.t1_fe_us)},
                   {"t2s_eg_us", num(p.t2s_eg_us)},
                   {"t2s_fe_us", num(p.t2s_fe_us)},
                   {"t1_q2_us", num(p.t1_q2_us)},
                   {"t2s_q2_us", num(p.t2s_q2_us)},
                   {"residual_zz_khz", p.residual_zz_khz},
                   {"residual_zz_on", p.residual_zz_on}};
    const auto& d = s.drives;
    j["drives"] = {{"rabi_mhz", d.rabi_mhz},
                   {"zeno_eps_mhz", d.zeno_eps_mhz},
                   {"symmetric_on", d.symmetric_on},
                   {"zeno_target", d.zeno_target == ZenoTarget::fe ? "fe" : "eg"},
                   {"rabi_transition", d.rabi_transition == RabiTransition::ef ? "ef" : "ge"},
                   {"gate_time_us", d.gate_time_us ? json(*d.gate_time_us) : json(nullptr)},
                   {"stark_mode", s.stark.mode},
                   {"stark", {s.stark.values.g1e1, s.stark.values.g2e2, s.stark.values.ef}}};
    j["sim"] = {{"fock_dim", s.sim.fock},
                {"dt_ns", s.sim.dt_us * 1e3},
                {"prep_kappa_times", s.sim.prep_kappa_times},
                {"refine_dt", s.sim.refine_dt},
                {"seed", s.seed},
                {"jobs", s.jobs},
                {"ramsey", {s.ramsey.detuning_mhz, s.ramsey.duration_us, s.ramsey.sample_dt_us,
                            s.ramsey.fit_fraction, s.ramsey.max_residual_rad}}};
    j["protocol"] = {
        {"block_sweep",
         {{"rabi_mhz", s.block_sweep.rabi_mhz}, {"eps_mhz", s.block_sweep.eps_mhz}, {"models", s.block_sweep.models}}},
        {"gate_evolve",
         {{"model", s.gate_evolve.model},
          {"input", s.gate_evolve.input},
          {"sample_stride_us", s.gate_evolve.sample_stride_us},
          {"n_cut", s.gate_evolve.n_cut ? json(*s.gate_evolve.n_cut) : json(nullptr)},
          {"ideal_with_decoherence", s.gate_evolve.ideal_with_decoherence}}},
        {"eps_sweep",
         {{"eps_mhz", s.eps_sweep.eps_mhz}, {"coherence", s.eps_sweep.coherence}, {"calibrate", s.eps_sweep.calibrate}}},
        {"bound_table",
         {{"ratios", s.bound_table.ratios},
          {"grid_points", s.bound_table.grid_points},
          {"max_ratio", s.bound_table.max_ratio},
          {"samples", s.bound_table.samples},
          {"refine_steps", s.bound_table.refine_steps}}},
        {"tomo_roundtrip",
         {{"states", s.tomo_roundtrip.states}, {"shots", s.tomo_roundtrip.shots}, {"scale", s.tomo_roundtrip.scale}}},
        {"postselect",
         {{"trajectories", s.postselect.trajectories},
          {"detection_fidelity", s.postselect.detection_fidelity},
          {"fractions", s.postselect.fractions}}},
        {"calibrate", {{"eps_mhz", s.calibrate.eps_mhz}, {"symmetric", s.calibrate.symmetric}}},
        {"trajectories", {{"count", s.trajectories.count}}}};
    return j;
}

}  // namespace zenosim::cli

#pragma once

// Side effects of the cavity drives: steady-state displacements, conditional
// phase and dephasing rates, and Stark shifts from simulated Ramsey records.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "zenosim/cavity_prep.hpp"
#include "zenosim/device.hpp"
#include "zenosim/lindblad.hpp"
#include "zenosim/metrics.hpp"
#include "zenosim/sweep.hpp"

namespace zenosim {

/// alpha = eps / (i delta + kappa/2), any consistent units.
inline cplx steady_state_alpha(double eps, double delta, double kappa) {
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
    return eps / cplx(kappa / 2.0, delta);
}

inline const std::vector<std::string>& computational_labels() {
    static const std::vector<std::string> labels{"gg", "ge", "eg", "ee"};
    return labels;
}

inline void check_pair_label(const std::string& s) {
    if (s.size() != 2 || std::string("gef").find(s[0]) == std::string::npos ||
        std::string("ge").find(s[1]) == std::string::npos)
        throw LabelError("bad qutrit-qubit label '" + s + "'");
}

/// Cavity line of the sector |q1 q2> relative to the |gg> line, MHz.
inline double sector_shift_mhz(const DeviceParams& p, const std::string& label) {
    check_pair_label(label);
    double w = label[1] == 'e' ? p.chi2_mhz : 0.0;
    if (label[0] == 'e') w += p.chi1_mhz;
    if (label[0] == 'f') w += p.chif_mhz;
    return w;
}

/// Index of a two-letter label in the qutrit x qubit layout.
inline Eigen::Index pair_index(const std::string& label) {
    check_pair_label(label);
    const Eigen::Index q1 = label[0] == 'g' ? 0 : (label[0] == 'e' ? 1 : 2);
    const Eigen::Index q2 = label[1] == 'g' ? 0 : 1;
    return q1 * 2 + q2;
}

struct PairRate {
    std::string a, b;
    std::optional<double> re_mu;  // rad/us; empty when a drive is resonant with a or b
    std::optional<double> im_mu;  // 1/us
};

/// Rates for one cavity tone at the given offset from the |gg> line.
inline PairRate pair_rate(const DeviceParams& p, double eps_mhz, double drive_offset_mhz, const std::string& a,
                          const std::string& b) {
    const double wa = mhz_to_angular(sector_shift_mhz(p, a));
    const double wb = mhz_to_angular(sector_shift_mhz(p, b));
    const double wd = mhz_to_angular(drive_offset_mhz);
    const double eps2 = std::pow(mhz_to_angular(eps_mhz), 2);
    const double da = wa - wd, db = wb - wd;
    PairRate r{a, b, std::nullopt, std::nullopt};
    if (da == 0.0 || db == 0.0) return r;
    r.re_mu = (wa - wb) * eps2 / (da * db);
    r.im_mu = (wa - wb) * (wa - wb) * eps2 * p.kappa() / (2.0 * da * da * db * db);
    return r;
}

struct CrossRates {
    std::vector<PairRate> zeno;
    std::vector<PairRate> symmetric;
    std::vector<PairRate> total;

    [[nodiscard]] const PairRate& find(const std::vector<PairRate>& table, const std::string& a,
                                       const std::string& b) const {
        for (const auto& r : table)
            if (r.a == a && r.b == b) return r;
        throw LabelError("no rate for pair (" + a + "," + b + ")");
    }
};

/// Rate table over all ordered pairs of computational states.
inline CrossRates cross_kerr_rates(const DeviceParams& p, const DriveConfig& drives) {
    const auto f = drive_frequencies(p);
    CrossRates out;
    for (const auto& a : computational_labels())
        for (const auto& b : computational_labels()) {
            if (a == b) continue;
            const auto z = pair_rate(p, drives.zeno_eps_mhz, f.zeno_offset_mhz, a, b);
            const auto s = drives.symmetric_on ? pair_rate(p, drives.zeno_eps_mhz, f.symmetric_offset_mhz, a, b)
                                               : PairRate{a, b, 0.0, 0.0};
            PairRate t{a, b, std::nullopt, std::nullopt};
            if (z.re_mu && s.re_mu) {
                t.re_mu = *z.re_mu + *s.re_mu;
                t.im_mu = *z.im_mu + *s.im_mu;
            }
            out.zeno.push_back(z);
            out.symmetric.push_back(s);
            out.total.push_back(t);
        }
    return out;
}

/// Dispersive estimate of the shift of the a -> b transition, MHz.
inline std::optional<double> analytic_stark_shift_mhz(const DeviceParams& p, const DriveConfig& drives,
                                                      const std::string& a, const std::string& b) {
    const auto f = drive_frequencies(p);
    std::vector<double> offsets{f.zeno_offset_mhz};
    if (drives.symmetric_on) offsets.push_back(f.symmetric_offset_mhz);
    double total = 0.0;
    for (double off : offsets) {
        const auto r = pair_rate(p, drives.zeno_eps_mhz, off, b, a);
        if (!r.re_mu) return std::nullopt;
        total += *r.re_mu;
    }
    return angular_to_mhz(total);
}

struct RamseyOptions {
    double detuning_mhz = 5.0;
    double duration_us = 3.0;
    double sample_dt_us = 0.01;
    double fit_fraction = 0.8;
    double max_residual_rad = 0.1;
    SimSettings sim;
};

struct RamseyResult {
    double shift_mhz = 0.0;
    double fitted_mhz = 0.0;
    double residual_rms = 0.0;
    bool fit_ok = false;
    std::vector<double> times;
    std::vector<double> phases;  // unwrapped arg rho(b, a) in the frame of the bare transition
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t first) {
    const std::size_t n = x.size() - first;
    if (n < 2) throw FitError("not enough points for a linear fit");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double dn = static_cast<double>(n);
    LineFit f;
    f.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / dn;
    double r2 = 0;
    for (std::size_t i = first; i < x.size(); ++i) r2 += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.residual_rms = std::sqrt(r2 / dn);
    return f;
}

inline std::vector<double> unwrap(const std::vector<double>& ph) {
    std::vector<double> out(ph.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < ph.size(); ++i) {
        if (i) {
            const double d = ph[i] - ph[i - 1];
            if (d > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
            if (d < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
        }
        out[i] = ph[i] + offset;
    }
    return out;
}

/// Ramsey fringe between |a> and |b> with the cavity drives on. The cavity starts in the
/// driven steady state of sector a; an artificial detuning is added to |b>.
inline RamseyResult simulated_ramsey(const DeviceParams& p, DriveConfig drives, const std::string& a,
                                     const std::string& b, const RamseyOptions& o = {}) {
    check_pair_label(a);
    check_pair_label(b);
    if (a == b) throw LabelError("Ramsey pair needs two distinct states");
    drives.rabi_mhz = 0.0;
    if (!drives.stark) drives.stark = StarkShifts{};
    const auto layout = SpaceLayout::qutrit_qubit_cavity(o.sim.fock);
    const auto qq = SpaceLayout::qutrit_qubit();

    const auto prep = prepare_cavity_state(p, drives, std::string(1, a[0]), std::string(1, a[1]), o.sim);
    const auto psi = superposition(qq, {{{std::string(1, a[0]), std::string(1, a[1])}, 1.0},
                                        {{std::string(1, b[0]), std::string(1, b[1])}, 1.0}});

    EvolutionProblem pb;
    pb.hamiltonian = full_sim_hamiltonian(p, drives, layout);
    Matrix local = Matrix::Zero(6, 6);
    local(pair_index(b), pair_index(b)) = mhz_to_angular(o.detuning_mhz);
    const auto nf = static_cast<Eigen::Index>(o.sim.fock);
    pb.hamiltonian.add_static(kron(local, Matrix::Identity(nf, nf)));
    pb.collapse_ops = build_collapse_ops(p, layout);
    pb.initial = attach_cavity(psi, prep.rho_cav);
    pb.t_start = prep.t_prep;
    pb.t_end = prep.t_prep + o.duration_us;
    pb.dt = o.sim.dt_us;
    pb.options.refine_dt = o.sim.refine_dt;
    const auto intervals = static_cast<std::size_t>(std::llround(o.duration_us / o.sample_dt_us));
    pb.sample_times = linspace_times(pb.t_start, pb.t_end, intervals);
    const auto states = evolve_master(pb);

    const Eigen::VectorXd d0 = dispersive_diagonal(p, layout);
    const double bare = d0(pair_index(b) * nf) - d0(pair_index(a) * nf);

    RamseyResult r;
    std::vector<double> raw;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double tl = pb.sample_times[i] - pb.t_start;
        const Matrix red = partial_trace(states[i], {kQutrit, kQubit}).density_matrix();
        const cplx c = red(pair_index(b), pair_index(a)) * std::exp(kI * bare * tl);
        r.times.push_back(tl);
        raw.push_back(std::arg(c));
    }
    r.phases = unwrap(raw);
    const auto first = static_cast<std::size_t>(std::floor((1.0 - o.fit_fraction) * static_cast<double>(r.times.size())));
    const auto fit = fit_line(r.times, r.phases, first);
    r.fitted_mhz = -fit.slope / kTwoPi;
    r.shift_mhz = r.fitted_mhz - o.detuning_mhz;
    r.residual_rms = fit.residual_rms;
    r.fit_ok = fit.residual_rms <= o.max_residual_rad;
    return r;
}

/// Stark shifts for one drive amplitude. The qutrit e-f shift is measured with the
/// g-e compensation already applied, as it is during the gate.
inline StarkShifts calibrate_stark(const DeviceParams& p, DriveConfig drives, const RamseyOptions& o = {},
                                   bool require_fit = true) {
    StarkShifts s;
    if (drives.zeno_eps_mhz == 0.0) return s;
    drives.stark = StarkShifts{};
    auto run = [&](const char* a, const char* b) {
        const auto r = simulated_ramsey(p, drives, a, b, o);
        if (require_fit && !r.fit_ok)
            throw FitError(std::string("Ramsey fit residual too large for (") + a + "," + b +
                           "): " + format_number(r.residual_rms) + " rad");
        return r.shift_mhz;
    };
    s.g1e1 = 0.5 * (run("gg", "eg") + run("ge", "ee"));
    s.g2e2 = 0.5 * (run("gg", "ge") + run("eg", "ee"));
    drives.stark = StarkShifts{s.g1e1, s.g2e2, 0.0};
    s.ef = run("eg", "fg");
    return s;
}

struct StarkTable {
    std::vector<double> eps_mhz;
    std::vector<StarkShifts> shifts;

    /// Interpolates shift / eps^2 linearly between grid points.
    [[nodiscard]] StarkShifts at(double eps) const {
        if (eps_mhz.empty()) throw ConfigError("empty Stark table");
        if (eps == 0.0) return {};
        for (std::size_t i = 0; i < eps_mhz.size(); ++i)
            if (eps_mhz[i] == eps) return shifts[i];
        std::size_t hi = 0;
        while (hi < eps_mhz.size() && eps_mhz[hi] < eps) ++hi;
        auto scaled = [&](std::size_t i) {
            const double e2 = eps_mhz[i] * eps_mhz[i];
            return StarkShifts{shifts[i].g1e1 / e2, shifts[i].g2e2 / e2, shifts[i].ef / e2};
        };
        std::size_t lo = hi == 0 ? 0 : hi - 1;
        if (hi >= eps_mhz.size()) hi = lo;
        while (eps_mhz[lo] == 0.0 && lo < hi) ++lo;
        if (eps_mhz[lo] == 0.0) throw ConfigError("Stark table has no nonzero grid point");
        const auto a = scaled(lo), b = scaled(hi);
        const double w = hi == lo ? 0.0 : std::clamp((eps - eps_mhz[lo]) / (eps_mhz[hi] - eps_mhz[lo]), 0.0, 1.0);
        const double e2 = eps * eps;
        return {e2 * (a.g1e1 + w * (b.g1e1 - a.g1e1)), e2 * (a.g2e2 + w * (b.g2e2 - a.g2e2)),
                e2 * (a.ef + w * (b.ef - a.ef))};
    }
};

inline StarkTable build_stark_table(const DeviceParams& p, const std::vector<double>& eps_grid, bool symmetric_on,
                                    const RamseyOptions& o = {}) {
    bool has_zero = false;
    for (double e : eps_grid) has_zero |= e == 0.0;
    if (!has_zero) throw ConfigError("Stark calibration grid must include 0");
    StarkTable t;
    for (double e : eps_grid) {
        DriveConfig d;
        d.zeno_eps_mhz = e;
        d.symmetric_on = symmetric_on;
        t.eps_mhz.push_back(e);
        t.shifts.push_back(calibrate_stark(p, d, o));
    }
    return t;
}

}  // namespace zenosim

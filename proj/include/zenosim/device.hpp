#pragma once

// Physical model of the qutrit, qubit and readout cavity.
//
// Configuration values are cyclic frequencies in MHz and times in us. All
// matrices returned here are in angular units (rad/us). The frame rotates at
// the bare |gg> cavity frequency and at the qubit frequencies, so only the
// dispersive shifts, anharmonicity and self-Kerr survive on the diagonal.
//
// Drive phase convention: a cavity tone with frame offset w enters as
//   i eps (a e^{+i w t} - a^dag e^{-i w t}),
// which is resonant with the cavity line of sector s when w = chi_s. The
// same convention is used for the qutrit Rabi tone on |e><f|.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zenosim/qcore.hpp"
#include "zenosim/td_hamiltonian.hpp"

namespace zenosim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum Factor : std::size_t { kQutrit = 0, kQubit = 1, kCavity = 2 };

struct DeviceParams {
    double chi1_mhz = -4.25;
    double chi2_mhz = -4.35;
    double chif_mhz = -10.0;
    double kappa_mhz = 0.15;
    double alpha1_mhz = -175.0;
    double alpha2_mhz = -225.0;
    double self_kerr_mhz = 0.04;
    double t1_eg_us = 52.0;
    double t1_fe_us = 12.9;
    double t2s_eg_us = 22.2;
    double t2s_fe_us = 5.8;
    double t1_q2_us = 18.9;
    double t2s_q2_us = 15.7;
    double residual_zz_khz = 30.0;
    bool residual_zz_on = false;

    static DeviceParams measured_defaults() { return {}; }

    [[nodiscard]] DeviceParams with_infinite_coherence() const {
        auto p = *this;
        p.t1_eg_us = p.t1_fe_us = p.t2s_eg_us = p.t2s_fe_us = p.t1_q2_us = p.t2s_q2_us = kInf;
        return p;
    }

    [[nodiscard]] double kappa() const { return mhz_to_angular(kappa_mhz); }

    /// Throws ConfigError on violated invariants.
    void check() const {
        if (!(kappa_mhz > 0.0)) throw ConfigError("kappa_mhz must be > 0");
        const std::pair<const char*, double> times[] = {
            {"t1_eg_us", t1_eg_us},   {"t1_fe_us", t1_fe_us}, {"t2s_eg_us", t2s_eg_us},
            {"t2s_fe_us", t2s_fe_us}, {"t1_q2_us", t1_q2_us}, {"t2s_q2_us", t2s_q2_us}};
        for (const auto& [name, v] : times)
            if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0 or inf");
    }

    /// Soft checks. The model assumes the dispersive shifts dominate the linewidth.
    [[nodiscard]] std::vector<std::string> warnings() const {
        std::vector<std::string> w;
        const std::pair<const char*, double> chis[] = {{"chi1", chi1_mhz}, {"chi2", chi2_mhz}, {"chif", chif_mhz}};
        for (const auto& [name, v] : chis)
            if (std::abs(v) < 10.0 * kappa_mhz)
                w.push_back(std::string("|") + name + "| is not much larger than kappa");
        return w;
    }
};

/// Measured Stark shifts of the transitions, MHz.
struct StarkShifts {
    double g1e1 = 0.0;
    double g2e2 = 0.0;
    double ef = 0.0;
};

enum class ZenoTarget { fe, eg };
enum class RabiTransition { ef, ge };

struct DriveConfig {
    double rabi_mhz = 1.0;
    double zeno_eps_mhz = 2.0;
    bool symmetric_on = true;
    ZenoTarget zeno_target = ZenoTarget::fe;
    RabiTransition rabi_transition = RabiTransition::ef;
    std::optional<StarkShifts> stark;
    std::optional<double> gate_time_us;
    double rabi_t0_us = 0.0;

    [[nodiscard]] double gate_time() const {
        if (gate_time_us) return *gate_time_us;
        if (!(rabi_mhz > 0.0)) throw ConfigError("gate time undefined for zero Rabi frequency");
        return 1.0 / rabi_mhz;
    }

    void check() const {
        if (!(zeno_eps_mhz >= 0.0)) throw ConfigError("zeno_eps_mhz must be >= 0");
        if (!(rabi_mhz >= 0.0)) throw ConfigError("rabi_mhz must be >= 0");
        if (gate_time_us && !(*gate_time_us > 0.0)) throw ConfigError("gate_time_us must be > 0");
    }
};

struct DriveFrequencies {
    double zeno_offset_mhz = 0.0;
    double symmetric_offset_mhz = 0.0;
};

/// Drive offsets from the |gg> cavity line in the phase convention above.
inline DriveFrequencies drive_frequencies(const DeviceParams& p) {
    return {p.chif_mhz + p.chi2_mhz, p.chi2_mhz - p.chif_mhz};
}

inline void check_device_layout(const SpaceLayout& layout) {
    if (layout.rank() != 3 || layout.dim(0) != 3 || layout.dim(1) != 2 || layout.dim(2) < 2)
        throw DimensionError("expected a qutrit x qubit x cavity layout");
}

/// Diagonal of the dispersive Hamiltonian in the composite basis, rad/us.
inline Eigen::VectorXd dispersive_diagonal(const DeviceParams& p, const SpaceLayout& layout) {
    check_device_layout(layout);
    const std::size_t nf = layout.dim(kCavity);
    Eigen::VectorXd d(static_cast<Eigen::Index>(layout.total_dim()));
    for (std::size_t q1 = 0; q1 < 3; ++q1)
        for (std::size_t q2 = 0; q2 < 2; ++q2) {
            double chi = (q2 == 1 ? p.chi2_mhz : 0.0);
            if (q1 == 1) chi += p.chi1_mhz;
            if (q1 == 2) chi += p.chif_mhz;
            const double anh = (q1 == 2 ? p.alpha1_mhz : 0.0);
            const double zz = (p.residual_zz_on && q1 == 1 && q2 == 1) ? 1e-3 * p.residual_zz_khz : 0.0;
            for (std::size_t n = 0; n < nf; ++n) {
                const double nn = static_cast<double>(n);
                d(static_cast<Eigen::Index>((q1 * 2 + q2) * nf + n)) =
                    mhz_to_angular(chi * nn + 0.5 * p.self_kerr_mhz * nn * nn + anh + zz);
            }
        }
    return d;
}

inline Operator build_dispersive_h(const DeviceParams& p, const SpaceLayout& layout) {
    const Eigen::VectorXd d = dispersive_diagonal(p, layout);
    return Operator::hamiltonian(layout, d.cast<cplx>().asDiagonal().toDenseMatrix());
}

/// Cavity drive terms; frequency offsets follow drive_frequencies().
inline std::vector<DriveTerm> cavity_drive_terms(const DeviceParams& p, const DriveConfig& drives,
                                                 const SpaceLayout& layout) {
    check_device_layout(layout);
    std::vector<DriveTerm> out;
    if (drives.zeno_eps_mhz == 0.0) return out;
    const Matrix a = annihilation(layout, kCavity).matrix();
    const double eps = mhz_to_angular(drives.zeno_eps_mhz);
    const auto f = drive_frequencies(p);
    const double zeno_offset = drives.zeno_target == ZenoTarget::fe ? f.zeno_offset_mhz : p.chi1_mhz;
    out.push_back({a, kI * eps, mhz_to_angular(zeno_offset), 0.0, "zeno"});
    if (drives.symmetric_on) out.push_back({a, kI * eps, mhz_to_angular(f.symmetric_offset_mhz), 0.0, "symmetric"});
    return out;
}

/// Dense drive operator at time t.
inline Operator build_drive_terms(const DeviceParams& p, const DriveConfig& drives, const SpaceLayout& layout,
                                  double t) {
    TimeDependentHamiltonian h(layout, Matrix::Zero(static_cast<Eigen::Index>(layout.total_dim()),
                                                    static_cast<Eigen::Index>(layout.total_dim())),
                               cavity_drive_terms(p, drives, layout));
    return h.at(t);
}

/// Stark compensation: (d/2)(|g><g| - |e><e|) on the qutrit and on the qubit.
inline Matrix stark_compensation(const StarkShifts& s, const SpaceLayout& layout) {
    Matrix q1 = Matrix::Zero(3, 3);
    q1(0, 0) = 0.5 * mhz_to_angular(s.g1e1);
    q1(1, 1) = -0.5 * mhz_to_angular(s.g1e1);
    Matrix q2 = Matrix::Zero(2, 2);
    q2(0, 0) = 0.5 * mhz_to_angular(s.g2e2);
    q2(1, 1) = -0.5 * mhz_to_angular(s.g2e2);
    return embed(layout, kQutrit, q1).matrix() + embed(layout, kQubit, q2).matrix();
}

/// Full time-dependent Hamiltonian of the cavity model.
inline TimeDependentHamiltonian full_sim_hamiltonian(const DeviceParams& p, const DriveConfig& drives,
                                                     const SpaceLayout& layout) {
    drives.check();
    const bool driven = drives.zeno_eps_mhz > 0.0 || drives.rabi_mhz > 0.0;
    if (driven && !drives.stark) throw ConfigError("Stark shifts must be provided when drives are on");
    const StarkShifts stark = drives.stark.value_or(StarkShifts{});

    Matrix h0 = build_dispersive_h(p, layout).matrix();
    if (stark.g1e1 != 0.0 || stark.g2e2 != 0.0) h0 += stark_compensation(stark, layout);
    TimeDependentHamiltonian h(layout, h0, cavity_drive_terms(p, drives, layout));

    if (drives.rabi_mhz > 0.0) {
        const double half_omega = 0.5 * mhz_to_angular(drives.rabi_mhz);
        if (drives.rabi_transition == RabiTransition::ef) {
            h.add_drive({transition(layout, kQutrit, "e", "f").matrix(), kI * half_omega,
                         mhz_to_angular(p.alpha1_mhz + stark.ef), drives.rabi_t0_us, "rabi_ef"});
        } else {
            h.add_drive({transition(layout, kQutrit, "g", "e").matrix(), kI * half_omega, 0.0,
                         drives.rabi_t0_us, "rabi_ge"});
        }
    }
    return h;
}

inline Operator build_full_sim_h(const DeviceParams& p, const DriveConfig& drives, const SpaceLayout& layout,
                                 double t) {
    return full_sim_hamiltonian(p, drives, layout).at(t);
}

/// Pure dephasing rate 1/T2* - 1/(2 T1), 1/us. Infinite times give 0.
inline double pure_dephasing_rate(double t1_us, double t2s_us) {
    const double g1 = std::isinf(t1_us) ? 0.0 : 1.0 / t1_us;
    const double g2 = std::isinf(t2s_us) ? 0.0 : 1.0 / t2s_us;
    const double gphi = g2 - 0.5 * g1;
    if (gphi < -1e-12) throw ConfigError("inconsistent coherence times: T2* exceeds 2 T1");
    return std::max(gphi, 0.0);
}

struct CollapseChannel {
    Operator op;
    std::string label;
};

inline std::vector<CollapseChannel> collapse_channels(const DeviceParams& p, const SpaceLayout& layout) {
    check_device_layout(layout);
    p.check();
    std::vector<CollapseChannel> out;
    out.push_back({std::sqrt(p.kappa()) * annihilation(layout, kCavity), "cavity_decay"});

    auto relax = [&](double t1, std::size_t factor, const char* to, const char* from, const char* label) {
        if (std::isinf(t1)) return;
        out.push_back({std::sqrt(1.0 / t1) * transition(layout, factor, to, from), label});
    };
    relax(p.t1_eg_us, kQutrit, "g", "e", "qutrit_relax_eg");
    relax(p.t1_fe_us, kQutrit, "e", "f", "qutrit_relax_fe");
    relax(p.t1_q2_us, kQubit, "g", "e", "qubit_relax");

    auto dephase = [&](double t1, double t2s, std::size_t factor, const char* lo, const char* hi,
                       const char* label) {
        const double gphi = pure_dephasing_rate(t1, t2s);
        if (gphi == 0.0) return;
        const Operator sz = transition(layout, factor, hi, hi) - transition(layout, factor, lo, lo);
        out.push_back({std::sqrt(0.5 * gphi) * sz, label});
    };
    dephase(p.t1_eg_us, p.t2s_eg_us, kQutrit, "g", "e", "qutrit_dephase_eg");
    dephase(p.t1_fe_us, p.t2s_fe_us, kQutrit, "e", "f", "qutrit_dephase_fe");
    dephase(p.t1_q2_us, p.t2s_q2_us, kQubit, "g", "e", "qubit_dephase");
    return out;
}

inline std::vector<Operator> build_collapse_ops(const DeviceParams& p, const SpaceLayout& layout) {
    std::vector<Operator> ops;
    for (auto& c : collapse_channels(p, layout)) ops.push_back(std::move(c.op));
    return ops;
}

}  // namespace zenosim

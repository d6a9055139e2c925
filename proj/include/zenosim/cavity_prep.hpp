#pragma once

#include <string>

#include "zenosim/device.hpp"
#include "zenosim/lindblad.hpp"

namespace zenosim {

/// Numerical settings shared by the cavity-model protocols.
struct SimSettings {
    std::size_t fock = 20;
    double dt_us = 1e-3;
    double prep_kappa_times = 5.0;  // cavity ring-up time in units of 1/kappa
    bool refine_dt = true;
};

struct PreparedCavity {
    Matrix rho_cav;
    double t_prep = 0.0;
};

/// Relaxes the cavity to the driven steady state with the qubits held in |q1 q2>.
/// The Rabi tone stays off; drive phases start at t = 0.
inline PreparedCavity prepare_cavity_state(const DeviceParams& p, DriveConfig drives, const std::string& q1,
                                           const std::string& q2, const SimSettings& s) {
    const auto layout = SpaceLayout::qutrit_qubit_cavity(s.fock);
    drives.rabi_mhz = 0.0;
    if (!drives.stark) drives.stark = StarkShifts{};
    PreparedCavity out;
    out.t_prep = s.prep_kappa_times / p.kappa();

    EvolutionProblem pb;
    pb.hamiltonian = full_sim_hamiltonian(p, drives, layout);
    pb.collapse_ops = build_collapse_ops(p, layout);
    pb.initial = basis_state(layout, {q1, q2, std::size_t{0}});
    pb.t_start = 0.0;
    pb.t_end = out.t_prep;
    pb.dt = s.dt_us;
    pb.options.refine_dt = s.refine_dt;
    pb.sample_times = {out.t_prep};
    if (drives.zeno_eps_mhz == 0.0) {
        out.rho_cav = Matrix::Zero(static_cast<Eigen::Index>(s.fock), static_cast<Eigen::Index>(s.fock));
        out.rho_cav(0, 0) = 1.0;
        return out;
    }
    const auto states = evolve_master(pb);
    out.rho_cav = partial_trace(states.back(), {kCavity}).density_matrix();
    out.rho_cav = 0.5 * (out.rho_cav + out.rho_cav.adjoint());
    out.rho_cav /= out.rho_cav.trace().real();
    return out;
}

/// rho_q (qutrit x qubit) tensor rho_cav as a state of the full layout.
inline QuantumState attach_cavity(const QuantumState& qubits, const Matrix& rho_cav) {
    const auto cav = SpaceLayout::cavity(static_cast<std::size_t>(rho_cav.rows()));
    return tensor_product(qubits.as_mixed(), QuantumState::unchecked(cav, rho_cav));
}

}  // namespace zenosim

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "zenosim/qcore.hpp"

namespace zenosim {

/// One harmonic drive: c * exp(i w (t - t0)) * A + h.c.
struct DriveTerm {
    Matrix op;
    cplx amplitude{};
    double frequency = 0.0;  // rad/us
    double t0 = 0.0;         // us
    std::string label;

    [[nodiscard]] cplx coefficient(double t) const {
        return amplitude * std::exp(kI * frequency * (t - t0));
    }
};

/// H(t) = H_static + sum_k [c_k e^{i w_k (t - t0_k)} A_k + h.c.]
class TimeDependentHamiltonian {
public:
    TimeDependentHamiltonian() = default;
    TimeDependentHamiltonian(SpaceLayout layout, Matrix static_part, std::vector<DriveTerm> drives = {})
        : layout_(std::move(layout)), static_(std::move(static_part)), drives_(std::move(drives)) {
        const auto d = static_cast<Eigen::Index>(layout_.total_dim());
        if (static_.rows() != d || static_.cols() != d)
            throw DimensionError("static Hamiltonian does not match layout");
        if (relative_hermiticity_defect(static_) > Tolerances{}.hermitian)
            throw InvariantError("static Hamiltonian is not Hermitian");
        for (const auto& dr : drives_)
            if (dr.op.rows() != d || dr.op.cols() != d) throw DimensionError("drive operator does not match layout");
    }

    explicit TimeDependentHamiltonian(const Operator& h) : TimeDependentHamiltonian(h.layout(), h.matrix()) {}

    [[nodiscard]] const SpaceLayout& layout() const { return layout_; }
    [[nodiscard]] const Matrix& static_part() const { return static_; }
    [[nodiscard]] const std::vector<DriveTerm>& drives() const { return drives_; }
    [[nodiscard]] std::size_t dim() const { return layout_.total_dim(); }

    void add_static(const Matrix& m) {
        static_ += m;
        if (relative_hermiticity_defect(static_) > Tolerances{}.hermitian)
            throw InvariantError("static Hamiltonian is not Hermitian");
    }
    void add_drive(DriveTerm d) {
        if (d.op.rows() != static_.rows()) throw DimensionError("drive operator does not match layout");
        drives_.push_back(std::move(d));
    }

    [[nodiscard]] Matrix matrix_at(double t) const {
        Matrix h = static_;
        for (const auto& d : drives_) {
            const Matrix m = d.coefficient(t) * d.op;
            h += m + m.adjoint();
        }
        return h;
    }

    [[nodiscard]] Operator at(double t) const { return Operator::hamiltonian(layout_, matrix_at(t)); }

    /// Time-independent upper bound on the spectral norm of the drive part.
    [[nodiscard]] double drive_norm_bound() const {
        double s = 0.0;
        for (const auto& d : drives_) s += 2.0 * std::abs(d.amplitude) * spectral_norm(d.op);
        return s;
    }

private:
    SpaceLayout layout_;
    Matrix static_;
    std::vector<DriveTerm> drives_;
};

}  // namespace zenosim

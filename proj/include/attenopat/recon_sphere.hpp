#pragma once

#include "attenopat/forward.hpp"

#include <cstdint>
#include <functional>
#include <memory>

namespace pat {

struct SphereReconConfig {
    GridSpec target;
    int series_J = 8;
    int neumann_max_iter = 50;
    double neumann_tol = 1e-6;
    int laplacian_order = 2;
    int power_iterations = 12;
    std::uint64_t seed = 1;
    UniformGrid1D rj_grid = default_rj_grid();

    void validate() const;
};

// Scales every sample by e^{kappa_inf t}.
SphereMeasurement multiply_M(const SphereMeasurement& meas, const AttenuationModel& m);

// h^a(x) = -(1 / (2 pi varpi)) Lap_x sum_i w_i e^{kappa_inf d_i} q^a(d_i, xi_i),
// d_i = |xi_i - x|, with q^a the integrated data t * (spherical mean).
VolumeGrid fbp_backproject(const SphereMeasurement& meas, const AttenuationModel& m,
                           const SphereReconConfig& cfg);

// Residual attenuation operator h^a - h = T h with kernel
//   F_T(x, y) = -(1 / (8 pi^2 varpi)) Lap_x F0(x, y),
//   F0(x, y) = int sum_{j>=1} |xi - y|^{j-1} / j! r_j*(|xi - x| - |xi - y|) dS(xi),
//   r_j*(t) = e^{kappa_inf t} r_j(t).
class TOperator {
public:
    enum class Mode { MatrixFree, Dense };

    TOperator() = default;
    // Wraps an arbitrary linear map (used for synthetic operators).
    static TOperator from_function(std::function<VolumeGrid(const VolumeGrid&)> f);

    Mode mode() const { return mode_; }
    bool is_zero() const { return zero_; }
    double norm_estimate() const { return norm_estimate_; }
    int series_terms() const { return static_cast<int>(rj_.size()); }

    VolumeGrid apply(const VolumeGrid& h) const;
    // Power iteration estimate of the spectral radius from a seeded start.
    double estimate_norm(const GridSpec& grid, int iterations, std::uint64_t seed);

    // Point value F_T(x, y) from an axis-aligned product rule on the sphere and
    // a finite-difference Laplacian of the given step and order (2 or 4).
    double kernel_value(const Vec3& x, const Vec3& y, double step, int order = 4,
                        int n_theta = 40, int n_phi = 64) const;
    // F0(x, y) without the Laplacian.
    double f0(const Vec3& x, const Vec3& y, int n_theta, int n_phi) const;

    const std::vector<double>& dense_matrix() const { return dense_; }

private:
    friend TOperator assemble_T(const AttenuationModel&, const SphereSpec&,
                                const SphereReconConfig&, Mode);
    double series_kernel(double tau, double rho) const;
    VolumeGrid apply_matrix_free(const VolumeGrid& h) const;

    Mode mode_ = Mode::MatrixFree;
    bool zero_ = true;
    double norm_estimate_ = 0.0;
    double radius_ = 1.0;
    double kappa_inf_ = 0.0;
    int laplacian_order_ = 2;
    SphereNodes nodes_;
    GridSpec grid_;
    std::vector<RjKernel> rj_;
    // Matrix-free tables: D_xi(t_n) = (1 / 4 pi) sum_b H_xi(r_b) K(t_n, r_b).
    UniformGrid1D rgrid_;
    Eigen::MatrixXd kmat_;
    std::vector<double> dense_;
    std::function<VolumeGrid(const VolumeGrid&)> custom_;
};

TOperator assemble_T(const AttenuationModel& m, const SphereSpec& s, const SphereReconConfig& cfg,
                     TOperator::Mode mode = TOperator::Mode::MatrixFree);

struct NeumannReport {
    int iterations = 0;
    bool converged = false;
    bool richardson = false;        // fallback used because norm_estimate >= 1
    std::vector<double> residuals;  // ||h_{k+1} - h_k|| / ||rhs||
};

VolumeGrid neumann_solve(const TOperator& T, const VolumeGrid& rhs, const SphereReconConfig& cfg,
                         NeumannReport* report = nullptr);

struct SphereReconReport {
    double norm_estimate = 0.0;
    NeumannReport neumann;
    VolumeGrid uncorrected;  // B M q^a before the (I + T)^{-1} correction
};

VolumeGrid reconstruct_sphere(const SphereMeasurement& meas, const AttenuationModel& m,
                              const SphereReconConfig& cfg, SphereReconReport* report = nullptr);

// Discrete Laplacian of a field on an inflated grid, returned on the grid
// shrunk by order/2 cells per side.
VolumeGrid discrete_laplacian(const VolumeGrid& inflated, int order);

}  // namespace pat

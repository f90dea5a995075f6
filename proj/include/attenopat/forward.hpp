#pragma once

#include "attenopat/attenuation.hpp"
#include "attenopat/phantom.hpp"
#include "attenopat/transforms.hpp"

#include <vector>

namespace pat {

// Detector plane x3 = 0 sampled on (t, xi1, xi2). With period > 0 the source
// is repeated laterally on a square lattice of that period, which makes the
// data exactly periodic on a patch of width n * step = period.
struct PlaneSpec {
    UniformGrid1D t, xi1, xi2;
    double period = 0.0;
};

struct PlaneMeasurement {
    UniformGrid1D t, xi1, xi2;
    double period = 0.0;
    std::vector<double> values;  // row-major (t, xi1, xi2)

    PlaneMeasurement() = default;
    explicit PlaneMeasurement(const PlaneSpec& s);
    PlaneSpec spec() const { return {t, xi1, xi2, period}; }
    std::size_t index(std::size_t k, std::size_t i, std::size_t j) const
    {
        return (k * xi1.n + i) * xi2.n + j;
    }
};

struct SphereSpec {
    double radius = 1.0;
    SphereNodes nodes;
    UniformGrid1D t;
};

struct SphereMeasurement {
    double radius = 1.0;
    SphereNodes nodes;
    UniformGrid1D t;
    std::vector<double> values;  // node-major: values[i * t.n + k]

    SphereMeasurement() = default;
    explicit SphereMeasurement(const SphereSpec& s);
    SphereSpec spec() const { return {radius, nodes, t}; }
    const double* trace(std::size_t i) const { return values.data() + i * t.n; }
    double* trace(std::size_t i) { return values.data() + i * t.n; }
};

// Sphere of radius r with n Fibonacci nodes and nt samples on [0, t_end].
SphereSpec make_sphere_spec(double radius, int n_nodes, std::size_t nt, double t_end);

// Phantom plus its lateral lattice images that can reach the patch by t_reach.
Phantom with_lateral_images(const Phantom& p, const PlaneSpec& s, double t_reach);

PlaneMeasurement simulate_q_unattenuated(const Phantom& p, const PlaneSpec& s);
SphereMeasurement simulate_q_unattenuated(const Phantom& p, const SphereSpec& s);

struct KernelOptions {
    double step_fraction = 0.25;  // source lattice step as a fraction of blob width
    int time_pad = 2;          // internal window = time_pad * recording window
    bool self_check = false;   // rerun at half source step, throw if > 1e-3 change
};

// Frequency-domain Green's kernel pipeline: midpoint quadrature of
// (4 pi sqrt(2 pi))^{-1} int e^{i kappa(w) r} / r h(y) dy, Hermitian extension,
// inverse DFT in time.
PlaneMeasurement simulate_qa_kernel(const Phantom& p, const AttenuationModel& m,
                                    const PlaneSpec& s, const KernelOptions& opt = {});
SphereMeasurement simulate_qa_kernel(const Phantom& p, const AttenuationModel& m,
                                     const SphereSpec& s, const KernelOptions& opt = {});

struct SeriesOptions {
    int oversample = 4;  // fine convolution grid step = dt / oversample
    UniformGrid1D rj_grid = default_rj_grid();
};

// Series model q^a(t) = sum_j (1/j!) int r^j e^{-kappa_inf r} q(r) r_j(t - r) dr
// with q from the spherical mean oracle; the j = 0 term is e^{-kappa_inf t} q(t).
SphereMeasurement simulate_qa_series(const Phantom& p, const AttenuationModel& m,
                                     const SphereSpec& s, int J, const SeriesOptions& opt = {});
PlaneMeasurement simulate_qa_series(const Phantom& p, const AttenuationModel& m,
                                    const PlaneSpec& s, int J, const SeriesOptions& opt = {});

// Max over omega_grid of |lhs - rhs| / |lhs| for
//   lhs = F1 p^a(w, x) by 3D quadrature of the attenuated kernel,
//   rhs = (w / kappa(w)) F1 p(kappa(w), x) with F1 p(z) = -i z FL[q](z),
//         FL the Fourier-Laplace transform of the spherical-mean trace.
double verify_dispersion_relation(const Phantom& p, const AttenuationModel& m, const Vec3& x,
                                  const std::vector<double>& omega_grid);

// Midpoint quadrature points (position, h dV) of each blob on its own lattice,
// clipped to the 6-width ball.
struct SourcePoints {
    std::vector<Vec3> x;
    std::vector<double> w;
};
SourcePoints source_points(const Phantom& p, double step_fraction = 0.25);

// ||a - ref|| / ||ref|| over flat arrays.
double relative_l2(const std::vector<double>& a, const std::vector<double>& ref);

}  // namespace pat

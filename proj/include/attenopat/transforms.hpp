#pragma once

#include "attenopat/common.hpp"

#include <vector>

namespace pat {

// Uniform sampling x_i = start + i * step, i = 0..n-1.
struct UniformGrid1D {
    double start = 0.0;
    double step = 1.0;
    std::size_t n = 2;

    double at(std::size_t i) const { return start + step * static_cast<double>(i); }
    double last() const { return at(n - 1); }
    // Spacing 2*pi/(n*step) of the dual frequency grid.
    double dual_step() const { return 2.0 * kPi / (static_cast<double>(n) * step); }
    // Frequency of centered spectral index k, i.e. (k - n/2) * dual_step.
    double freq(std::size_t k) const
    {
        return (static_cast<double>(k) - static_cast<double>(n / 2)) * dual_step();
    }
    void validate() const;
};

// Row-major complex samples over 1-3 axes. Each axis keeps its physical grid;
// a spectral axis holds values on the centered dual grid of that physical grid.
struct SpectralField {
    std::vector<UniformGrid1D> grids;
    std::vector<bool> spectral;
    std::vector<cplx> values;
    bool hermitian = false;  // spectrum of a real field

    SpectralField() = default;
    explicit SpectralField(std::vector<UniformGrid1D> g);
    std::size_t size() const;
    std::size_t dim(std::size_t axis) const { return grids[axis].n; }
};

// Transform convention: F f(eta) = (2 pi)^{-n/2} int f(x) e^{+i eta x} dx,
// inverse with e^{-i eta x}. Discrete versions are the Riemann sums on the
// grid, so inverse(forward(f)) reproduces f up to rounding.
SpectralField dft_forward(const SpectralField& field, const std::vector<int>& axes);
SpectralField dft_inverse(const SpectralField& field, const std::vector<int>& axes);

// One-axis helpers on contiguous arrays.
std::vector<cplx> dft_forward_1d(const std::vector<cplx>& f, const UniformGrid1D& g);
std::vector<cplx> dft_inverse_1d(const std::vector<cplx>& spec, const UniformGrid1D& g);

// (2 pi)^{-1/2} * trapezoid sum of trace(t_k) e^{i z t_k} dt for a causal trace.
// Throws GrowthBudgetExceeded if |im z| * t_max > 700.
cplx fourier_laplace_eval(const std::vector<double>& trace, const UniformGrid1D& t, cplx z);
cplx fourier_laplace_eval(const std::vector<cplx>& trace, const UniformGrid1D& t, cplx z);

// Compares the unitary 3D Fourier transform of a radial profile (computed by a
// full 3D quadrature) with k^{-1/2} int r^{3/2} f(r) J_{1/2}(kr) dr. Returns the
// max deviation over k_grid relative to the peak transform magnitude.
double hankel_radial_check(const std::function<double(double)>& profile, double r_max,
                           const std::vector<double>& k_grid);

// Cubic Lagrange interpolation of a sampled trace; zero outside the window.
double interp_trace(const std::vector<double>& trace, const UniformGrid1D& g, double t);
double interp_trace(const double* trace, const UniformGrid1D& g, double t);

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

// Quadrature nodes on the sphere |x| = radius with weights summing to its area.
struct SphereNodes {
    std::vector<Vec3> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

SphereNodes fibonacci_sphere(int n, double radius);
// Gauss-Legendre in cos(theta) times trapezoid in phi; exact for spherical
// harmonics of degree < min(2 n_theta, n_phi).
SphereNodes product_sphere_rule(int n_theta, int n_phi, double radius);

// Right-handed orthonormal frame (e1, e2, u) with u normalized.
void orthonormal_frame(const Vec3& u, Vec3& e1, Vec3& e2, Vec3& e3);

}  // namespace pat

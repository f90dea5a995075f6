#pragma once

#include "attenopat/forward.hpp"

namespace pat {

struct PlaneReconConfig {
    GridSpec target;
    double freq_cutoff = 0.0;     // max |(sigma, rho)|; 0 selects the target x3 Nyquist
    double growth_budget = 1e6;   // cap on e^{|im kappa^{-1}| t_max}
    double damping = 0.0;         // raised-cosine taper width in rho near the cone boundary
    double z_window = 0.0;        // depth period of the rho sampling; 0 selects 2 (t_max + z_max)
};

struct PlaneReconReport {
    std::size_t samples = 0;
    std::size_t zeroed_growth = 0;
    std::size_t zeroed_noconv = 0;
    double imag_ratio = 0.0;
};

// Fourier-domain inversion
//   F h(sigma, rho) = -2 i rho FL[q^a](kappa^{-1}(sgn rho sqrt(|sigma|^2 + rho^2)), sigma)
// with FL the Fourier-Laplace transform in t of the laterally transformed data.
// rho is sampled on a half-shifted grid (rho_k = (k + 1/2) d rho), which avoids
// the removable 0 * infinity at rho = 0.
VolumeGrid reconstruct_plane(const PlaneMeasurement& meas, const AttenuationModel& m,
                             const PlaneReconConfig& cfg, PlaneReconReport* report = nullptr);

// Spectral fields below are indexed (first, sigma1, sigma2), all axes spectral.
// F(R* phi)(sigma, rho) = [F phi(K, sigma) - F phi(-K, sigma)] / (2 i K),
// K = sqrt(|sigma|^2 + rho^2), cubic interpolation in the first axis.
SpectralField rstar_freq_apply(const SpectralField& spec);

// F(E psi)(w, sigma) = i w F psi(sgn w sqrt(w^2 - |sigma|^2), sigma) for
// |w| >= |sigma|, zero inside the cone complement. Input must be even in w.
SpectralField e_remap_apply(const SpectralField& spec);

// Zeroes |w| < |sigma|.
SpectralField cone_project(const SpectralField& spec);

// Energy fraction of the 3D spectrum of q in |w| < |sigma|.
double cone_energy_fraction(const PlaneMeasurement& meas);

}  // namespace pat

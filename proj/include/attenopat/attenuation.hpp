#pragma once

#include "attenopat/transforms.hpp"

#include <string>
#include <vector>

namespace pat {

// Built-in kappa* families.
//   zero:     kappa*(z) = 0
//   rational: kappa*(z) = -(alpha z + i gamma) / (z + i beta)^2
// The rational family has a double pole at -i beta only, so it is holomorphic
// on the closed upper half-plane. It satisfies kappa*(-w) = -conj kappa*(w)
// and is Herglotz-admissible iff 0 <= gamma <= 2 alpha beta.
struct KappaStar {
    enum class Family { Zero, Rational };
    Family family = Family::Zero;
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = 0.0;

    static KappaStar zero() { return {}; }
    static KappaStar rational(double alpha, double beta, double gamma)
    {
        return {Family::Rational, alpha, beta, gamma};
    }
    bool is_zero() const { return family == Family::Zero || (alpha == 0.0 && gamma == 0.0); }
    std::string name() const { return family == Family::Zero ? "zero" : "rational"; }

    cplx value(cplx z) const;
    cplx derivative(cplx z) const;
    // Coefficients kappa_1..kappa_m of kappa*(z) ~ sum kappa_m z^{-m}.
    std::vector<cplx> asymptotic(int m) const;
    // Poles of the continuation (empty for entire families).
    std::vector<cplx> poles() const;
};

struct AttenuationModel {
    double c = 1.0;
    double kappa_inf = 0.0;
    KappaStar kappa_star;
    double newton_tol = 1e-12;
    int newton_max_iter = 100;
    double pole_radius = 1e-6;

    void validate() const;
    bool is_identity() const { return c == 1.0 && kappa_inf == 0.0 && kappa_star.is_zero(); }
};

// kappa(z) = z/c + i kappa_inf + kappa*(z); requires im z >= 0.
cplx eval_kappa(const AttenuationModel& m, cplx z);
// Same closed form without the half-plane check (used below the real axis).
cplx eval_kappa_continued(const AttenuationModel& m, cplx z);
cplx eval_kappa_derivative(const AttenuationModel& m, cplx z);

// Solves kappa(w) = z by damped Newton seeded at c z - i c kappa_inf.
// The result may lie in the lower half-plane.
cplx eval_kappa_inverse(const AttenuationModel& m, cplx z);

struct HerglotzReport {
    double min_im = 0.0;     // min im kappa~(z) over the grid
    double min_slope = 0.0;  // min d/dw Re kappa(w) over real samples
    bool pass = false;
};

// Samples re in [-re_max, re_max] x im in [0, im_max] on an n_re x n_im grid.
HerglotzReport herglotz_check(const AttenuationModel& m, double re_max, double im_max, int n_re,
                              int n_im);

// Samples of r_j(t) = (1/2 pi) int (i kappa*(w))^j e^{-i w t} dw on a uniform
// grid containing t = 0. j = 0 is represented by delta_weight = 1.
// The t = 0 sample holds the right limit r_j(0+).
struct RjKernel {
    int j = 0;
    UniformGrid1D t_grid;
    std::vector<double> values;
    double delta_weight = 0.0;

    std::size_t zero_index() const;
    // Causal evaluation: 0 for t < 0, one-sided cubic interpolation on t >= 0.
    double at(double t) const;
};

RjKernel compute_rj(const AttenuationModel& m, int j, const UniformGrid1D& t_grid);
// Default grid: step 0.004 over [-32.768, 32.764].
UniformGrid1D default_rj_grid();

struct RjReport {
    double sup_positive = 0.0;      // max |r_j(t)| over t > 0
    double causal_fraction = 0.0;   // energy at t < 0 over total energy
};

RjReport rj_boundedness_report(const RjKernel& k);

}  // namespace pat

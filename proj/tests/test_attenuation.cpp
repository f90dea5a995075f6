#include "doctest.h"

#include "attenopat/attenuation.hpp"

#include <cmath>

using namespace pat;

namespace {

AttenuationModel rational(double kinf, double a, double b, double g)
{
    AttenuationModel m;
    m.kappa_inf = kinf;
    m.kappa_star = KappaStar::rational(a, b, g);
    return m;
}

// r_j in closed form for the rational family: i kappa* = -i a u + (g - a b) u^2,
// u = 1/(w + i b), and u^m <-> (-i)^m t^{m-1}/(m-1)! e^{-b t} for t > 0.
double rj_closed(double a, double b, double g, int j, double t)
{
    if (t < 0.0) return 0.0;
    cplx s = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= j; ++k) {
        if (k > 0) binom = binom * (j - k + 1) / k;
        const int m = j + k;
        s += binom * std::pow(cplx(0.0, -a), j - k) * std::pow(g - a * b, k) * std::pow(cplx(0.0, -1.0), m) *
             std::pow(t, m - 1) / std::tgamma(m);
    }
    return s.real() * std::exp(-b * t);
}

}  // namespace

TEST_CASE("eval_kappa examples")
{
    AttenuationModel m;
    m.kappa_inf = 0.1;
    CHECK(std::abs(eval_kappa(m, 2.0) - cplx(2.0, 0.1)) < 1e-15);
    AttenuationModel id;
    for (double w : {-3.0, 0.0, 0.7, 11.0}) CHECK(eval_kappa(id, w) == cplx(w));
    // kappa*(1) = -(0.05 + 0.05 i) / (1 + i)^2 = -0.025 + 0.025 i by hand.
    const AttenuationModel r = rational(0.0, 0.05, 1.0, 0.05);
    CHECK(std::abs(eval_kappa(r, 1.0) - cplx(0.975, 0.025)) < 1e-15);
    CHECK_THROWS_AS(eval_kappa(r, cplx(1.0, -0.1)), Error);
}

TEST_CASE("kappa symmetry on the real axis")
{
    const AttenuationModel r = rational(0.1, 0.07, 1.3, 0.05);
    for (double w = 0.05; w < 30.0; w *= 1.37) {
        const cplx a = eval_kappa(r, -w), b = -std::conj(eval_kappa(r, w));
        CHECK(a == b);
    }
}

TEST_CASE("eval_kappa_inverse examples")
{
    AttenuationModel m;
    m.kappa_inf = 0.1;
    CHECK(std::abs(eval_kappa_inverse(m, cplx(2.0, 0.1)) - cplx(2.0)) < 1e-12);
    AttenuationModel c2;
    c2.c = 2.0;
    CHECK(std::abs(eval_kappa_inverse(c2, 3.0) - cplx(6.0)) < 1e-12);
    const AttenuationModel r = rational(0.1, 0.05, 1.0, 0.05);
    CHECK(std::abs(eval_kappa_inverse(r, eval_kappa(r, 1.7)) - cplx(1.7)) < 10.0 * r.newton_tol);
}

TEST_CASE("kappa round trip on a strip of the upper half-plane")
{
    const AttenuationModel r = rational(0.1, 0.05, 1.0, 0.05);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
        for (int k = 0; k < 10; ++k) {
            const cplx z(-10.0 + 20.0 * i / 99.0, 0.3 * k);
            worst = std::max(worst, std::abs(eval_kappa_continued(r, eval_kappa_inverse(r, z)) - z) / std::max(1.0, std::abs(z)));
        }
    CHECK(worst <= 10.0 * r.newton_tol);
}

TEST_CASE("identity model inverts bit-for-bit")
{
    AttenuationModel id;
    for (double w : {-4.5, -0.1, 0.0, 0.3, 9.0}) CHECK(eval_kappa_inverse(id, w) == cplx(w));
}

TEST_CASE("herglotz_check")
{
    AttenuationModel m;
    m.kappa_inf = 0.1;
    const HerglotzReport a = herglotz_check(m, 10.0, 5.0, 41, 11);
    CHECK(a.pass);
    CHECK(a.min_im == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(a.min_slope == doctest::Approx(1.0).epsilon(1e-9));

    CHECK(herglotz_check(rational(0.0, 0.05, 1.0, 0.05), 20.0, 5.0, 101, 26).pass);
    CHECK(herglotz_check(rational(0.0, 0.02, 1.0, 0.02), 20.0, 5.0, 101, 26).pass);
    // im kappa*(i) = gamma / (1 + beta)^2 < 0 for gamma = -1.
    const HerglotzReport bad = herglotz_check(rational(0.0, 0.05, 1.0, -1.0), 4.0, 2.0, 41, 21);
    CHECK_FALSE(bad.pass);
    CHECK(bad.min_im < 0.0);
}

TEST_CASE("compute_rj trivial cases")
{
    AttenuationModel m;
    m.kappa_inf = 0.2;
    const UniformGrid1D g = default_rj_grid();
    const RjKernel r1 = compute_rj(m, 1, g);
    for (double v : r1.values) CHECK(v == 0.0);
    const RjKernel r0 = compute_rj(rational(0.0, 0.05, 1.0, 0.05), 0, g);
    CHECK(r0.delta_weight == 1.0);
    for (double v : r0.values) CHECK(v == 0.0);
}

TEST_CASE("r_1 matches trapezoid quadrature of its defining integral")
{
    const double a = 0.05, b = 1.0, g = 0.05, b2 = 3.0;
    const AttenuationModel m = rational(0.0, a, b, g);
    const RjKernel r1 = compute_rj(m, 1, default_rj_grid());
    // Subtract -i a / (w + i b2), whose inverse transform is -a e^{-b2 t}, so the
    // remaining integrand decays like w^{-2}.
    const double W = 4e4, dw = 0.01;
    const long n = static_cast<long>(W / dw);
    for (double t : {0.3, 0.7, 1.5, 3.0, 6.0}) {
        double acc = 0.0;
        for (long k = -n; k <= n; ++k) {
            const double w = k * dw;
            const cplx f = kI * m.kappa_star.value(w) + kI * a / (w + kI * b2);
            acc += (k == -n || k == n ? 0.5 : 1.0) * std::real(f * std::exp(-kI * w * t));
        }
        const double quad = acc * dw / (2.0 * kPi) - a * std::exp(-b2 * t);
        CHECK(std::abs(r1.at(t) - quad) < 1e-6);
        CHECK(std::abs(r1.at(t) - rj_closed(a, b, g, 1, t)) < 1e-9);
    }
}

TEST_CASE("higher r_j agree with closed forms")
{
    const AttenuationModel m = rational(0.1, 0.08, 1.5, 0.1);
    for (int j : {2, 3, 5}) {
        const RjKernel r = compute_rj(m, j, default_rj_grid());
        for (double t : {0.0, 0.2, 1.1, 4.0, 9.0}) CHECK(std::abs(r.at(t) - rj_closed(0.08, 1.5, 0.1, j, t)) < 1e-9);
        CHECK(r.at(-0.5) == 0.0);
    }
}

TEST_CASE("rj_boundedness_report")
{
    const UniformGrid1D g = default_rj_grid();
    AttenuationModel zero;
    const RjReport z = rj_boundedness_report(compute_rj(zero, 1, g));
    CHECK(z.sup_positive == 0.0);

    const AttenuationModel m = rational(0.0, 0.05, 1.0, 0.05);
    const RjReport r1 = rj_boundedness_report(compute_rj(m, 1, g));
    CHECK(std::isfinite(r1.sup_positive));
    CHECK(r1.sup_positive > 0.0);
    CHECK(r1.causal_fraction <= 1e-6);

    // |r_3(t)| <= (1/2 pi) int |kappa*(w)|^3 dw.
    const RjReport r3 = rj_boundedness_report(compute_rj(m, 3, g));
    double bound = 0.0;
    for (double w = -2000.0; w <= 2000.0; w += 1e-3) bound += std::pow(std::abs(m.kappa_star.value(w)), 3) * 1e-3;
    bound /= 2.0 * kPi;
    CHECK(r3.sup_positive <= bound);
    CHECK(r3.causal_fraction <= 1e-6);
}

TEST_CASE("model validation")
{
    AttenuationModel m;
    m.c = 0.0;
    CHECK_THROWS_AS(m.validate(), Error);
    AttenuationModel k;
    k.kappa_inf = -0.1;
    CHECK_THROWS_AS(k.validate(), Error);
}

#include "attenopat/attenuation.hpp"

#include <cmath>

namespace pat {

cplx KappaStar::value(cplx z) const
{
    if (family == Family::Zero) return 0.0;
    const cplx d = z + kI * beta;
    return -(alpha * z + kI * gamma) / (d * d);
}

cplx KappaStar::derivative(cplx z) const
{
    if (family == Family::Zero) return 0.0;
    const cplx d = z + kI * beta;
    return (alpha * z - kI * alpha * beta + 2.0 * kI * gamma) / (d * d * d);
}

std::vector<cplx> KappaStar::asymptotic(int m) const
{
    std::vector<cplx> k(m + 1, 0.0);
    if (family == Family::Zero) return k;
    const cplx b = -kI * beta;
    for (int p = 1; p <= m; ++p) {
        cplx v = -alpha * static_cast<double>(p) * std::pow(b, p - 1);
        if (p >= 2) v += -kI * gamma * static_cast<double>(p - 1) * std::pow(b, p - 2);
        k[p] = v;
    }
    return k;
}

std::vector<cplx> KappaStar::poles() const
{
    if (family == Family::Zero) return {};
    return {cplx(0.0, -beta)};
}

void AttenuationModel::validate() const
{
    if (!(c > 0.0) || !std::isfinite(c)) config_error("BadModel", "c must be positive");
    if (!(kappa_inf >= 0.0) || !std::isfinite(kappa_inf))
        config_error("BadModel", "kappa_inf must be nonnegative");
    if (kappa_star.family == KappaStar::Family::Rational && !(kappa_star.beta > 0.0))
        config_error("BadModel", "rational kappa* needs beta > 0");
    if (!(newton_tol > 0.0) || newton_max_iter < 1)
        config_error("BadModel", "invalid Newton settings");
}

cplx eval_kappa_continued(const AttenuationModel& m, cplx z)
{
    return z / m.c + kI * m.kappa_inf + m.kappa_star.value(z);
}

cplx eval_kappa(const AttenuationModel& m, cplx z)
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        config_error("NonFinite", "non-finite frequency");
    if (z.imag() < 0.0) config_error("LowerHalfPlane", "eval_kappa requires im z >= 0");
    return eval_kappa_continued(m, z);
}

cplx eval_kappa_derivative(const AttenuationModel& m, cplx z)
{
    return 1.0 / m.c + m.kappa_star.derivative(z);
}

cplx eval_kappa_inverse(const AttenuationModel& m, cplx z)
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        config_error("NonFinite", "non-finite frequency");
    const double tol = m.newton_tol * std::max(1.0, std::abs(z));
    cplx w = m.c * z - kI * m.c * m.kappa_inf;
    cplx res = eval_kappa_continued(m, w) - z;
    const auto poles = m.kappa_star.poles();
    for (int it = 0; it < m.newton_max_iter; ++it) {
        if (std::abs(res) <= tol) return w;
        const cplx step = res / eval_kappa_derivative(m, w);
        double lam = 1.0;
        cplx wn, rn;
        for (int k = 0; k < 30; ++k) {
            wn = w - lam * step;
            rn = eval_kappa_continued(m, wn) - z;
            if (std::abs(rn) < std::abs(res)) break;
            lam *= 0.5;
        }
        for (const cplx& p : poles)
            if (std::abs(wn - p) < m.pole_radius)
                numerical_error("PoleProximity", "Newton iterate approached a pole of kappa*");
        w = wn;
        res = rn;
    }
    if (std::abs(res) <= tol) return w;
    numerical_error("NoConvergence", "kappa inverse did not converge");
}

HerglotzReport herglotz_check(const AttenuationModel& m, double re_max, double im_max, int n_re,
                              int n_im)
{
    HerglotzReport r;
    r.min_im = INFINITY;
    r.min_slope = INFINITY;
    for (int a = 0; a < n_re; ++a) {
        const double x = -re_max + 2.0 * re_max * a / std::max(1, n_re - 1);
        for (int b = 0; b < n_im; ++b) {
            const double y = im_max * b / std::max(1, n_im - 1);
            r.min_im = std::min(r.min_im, eval_kappa(m, cplx(x, y)).imag());
        }
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const double slope =
            (eval_kappa(m, x + h).real() - eval_kappa(m, x - h).real()) / (2.0 * h);
        r.min_slope = std::min(r.min_slope, slope);
    }
    r.pass = r.min_im >= -1e-10 && r.min_slope >= -1e-10;
    return r;
}

std::size_t RjKernel::zero_index() const
{
    return static_cast<std::size_t>(std::llround(-t_grid.start / t_grid.step));
}

double RjKernel::at(double t) const
{
    if (t < 0.0 || values.empty()) return 0.0;
    const std::size_t i0 = zero_index();
    const double u = t / t_grid.step;
    const std::size_t avail = t_grid.n - i0;
    if (u > static_cast<double>(avail - 1)) return 0.0;
    std::size_t k = static_cast<std::size_t>(u);
    k = k == 0 ? 0 : k - 1;
    if (k + 4 > avail) k = avail - 4;
    const double x = u - static_cast<double>(k);
    const double* p = values.data() + i0 + k;
    const double l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    const double l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
    const double l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    const double l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    return l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3];
}

UniformGrid1D default_rj_grid()
{
    return {-8192 * 0.004, 0.004, 16384};
}

namespace {

double binom(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

RjKernel compute_rj(const AttenuationModel& m, int j, const UniformGrid1D& g)
{
    g.validate();
    if (j < 0) config_error("BadIndex", "j must be nonnegative");
    const double ratio = -g.start / g.step;
    if (g.start >= 0.0 || std::abs(ratio - std::round(ratio)) > 1e-9 ||
        static_cast<std::size_t>(std::llround(ratio)) + 4 > g.n)
        config_error("NonUniformGrid", "r_j grid must contain t = 0 with samples on both sides");

    RjKernel k;
    k.j = j;
    k.t_grid = g;
    k.values.assign(g.n, 0.0);
    if (j == 0) {
        k.delta_weight = 1.0;
        return k;
    }
    if (m.kappa_star.is_zero()) return k;

    // Asymptotic expansion of (i kappa*)^j in powers of 1/w, re-expanded in
    // u = 1/(w + i beta0). The expansion terms have closed-form causal inverses;
    // the smooth, fast-decaying remainder goes through the DFT.
    const double beta0 = 2.0;
    const int mtot = j + 6;
    const auto ks = m.kappa_star.asymptotic(mtot);
    std::vector<cplx> base(mtot + 1, 0.0), power(mtot + 1, 0.0);
    for (int p = 1; p <= mtot; ++p) base[p] = kI * ks[p];
    power[0] = 1.0;
    for (int r = 0; r < j; ++r) {
        std::vector<cplx> next(mtot + 1, 0.0);
        for (int a = 0; a <= mtot; ++a)
            for (int b = 1; a + b <= mtot; ++b) next[a + b] += power[a] * base[b];
        power = next;
    }
    std::vector<cplx> bcoef(mtot + 1, 0.0);
    for (int mm = 1; mm <= mtot; ++mm)
        for (int kk = 0; mm + kk <= mtot; ++kk)
            bcoef[mm + kk] += power[mm] * binom(mm + kk - 1, kk) * std::pow(kI * beta0, kk);

    std::vector<cplx> spec(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double w = g.freq(i);
        const cplx s = std::pow(kI * m.kappa_star.value(w), j);
        const cplx u = 1.0 / (w + kI * beta0);
        cplx a = 0.0, up = u;
        for (int p = 1; p <= mtot; ++p, up *= u) a += bcoef[p] * up;
        spec[i] = s - a;
    }
    // r(t) = (1/2 pi) int R e^{-i w t} dw = (2 pi)^{-1/2} * unitary inverse.
    const auto rem = dft_inverse_1d(spec, g);
    const double scale = 1.0 / std::sqrt(2.0 * kPi);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double t = g.at(i);
        double v = scale * rem[i].real();
        if (i >= k.zero_index()) {
            const double tt = std::max(t, 0.0);
            cplx s = 0.0;
            double fact = 1.0;
            for (int p = 1; p <= mtot; ++p) {
                if (p > 1) fact *= (p - 1);
                s += bcoef[p] * std::pow(-kI, p) * std::pow(tt, p - 1) / fact;
            }
            v += (s * std::exp(-beta0 * tt)).real();
        }
        k.values[i] = v;
    }
    return k;
}

RjReport rj_boundedness_report(const RjKernel& k)
{
    RjReport r;
    double neg = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < k.values.size(); ++i) {
        const double t = k.t_grid.at(i), v = k.values[i];
        tot += v * v;
        if (i < k.zero_index()) neg += v * v;
        if (t > 0.0) r.sup_positive = std::max(r.sup_positive, std::abs(v));
    }
    r.causal_fraction = tot > 0.0 ? neg / tot : 0.0;
    return r;
}

}  // namespace pat

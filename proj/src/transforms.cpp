#include "attenopat/transforms.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

namespace pat {

void UniformGrid1D::validate() const
{
    if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(start))
        config_error("NonUniformGrid", "grid step must be positive and finite");
    if (n < 2) config_error("NonUniformGrid", "grid needs at least two samples");
}

SpectralField::SpectralField(std::vector<UniformGrid1D> g)
    : grids(std::move(g)), spectral(grids.size(), false)
{
    values.assign(size(), cplx(0.0));
}

std::size_t SpectralField::size() const
{
    std::size_t s = 1;
    for (const auto& g : grids) s *= g.n;
    return s;
}

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * kPi);

// Transforms line-by-line along one axis of a row-major array.
void transform_axis(std::vector<cplx>& v, const std::vector<std::size_t>& dims, int axis,
                    const UniformGrid1D& g, bool forward)
{
    const std::size_t n = dims[axis];
    std::size_t inner = 1, outer = 1;
    for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
    for (int a = 0; a < axis; ++a) outer *= dims[a];

    std::vector<cplx> phase(n);
    for (std::size_t k = 0; k < n; ++k) phase[k] = std::exp(kI * g.freq(k) * g.start);
    const double deta = g.dual_step();
    const std::size_t half = n / 2;

    parallel_for(outer * inner, [&](std::size_t line) {
        const std::size_t o = line / inner, i = line % inner;
        const std::size_t base = o * n * inner + i;
        Eigen::FFT<double> fft;
        std::vector<cplx> in(n), out(n);
        if (forward) {
            for (std::size_t j = 0; j < n; ++j) in[j] = v[base + j * inner];
            fft.inv(out, in);  // (1/n) sum_j f_j e^{+2 pi i m j / n}
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t m = (k + n - half) % n;
                v[base + k * inner] = kInvSqrt2Pi * g.step * static_cast<double>(n) * out[m] * phase[k];
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t m = (k + n - half) % n;
                in[m] = v[base + k * inner] * std::conj(phase[k]);
            }
            fft.fwd(out, in);  // sum_m G_m e^{-2 pi i m j / n}
            for (std::size_t j = 0; j < n; ++j) v[base + j * inner] = kInvSqrt2Pi * deta * out[j];
        }
    });
}

SpectralField apply(const SpectralField& field, const std::vector<int>& axes, bool forward)
{
    if (field.values.size() != field.size())
        config_error("AxisMismatch", "value count does not match grid dims");
    SpectralField out = field;
    std::vector<std::size_t> dims;
    for (const auto& g : field.grids) dims.push_back(g.n);
    for (int a : axes) {
        if (a < 0 || a >= static_cast<int>(dims.size()))
            config_error("AxisMismatch", "axis index out of range");
        if (out.spectral[a] == forward)
            config_error("AxisMismatch", forward ? "axis already spectral" : "axis not spectral");
        field.grids[a].validate();
        transform_axis(out.values, dims, a, field.grids[a], forward);
        out.spectral[a] = forward;
    }
    return out;
}

}  // namespace

SpectralField dft_forward(const SpectralField& field, const std::vector<int>& axes)
{
    return apply(field, axes, true);
}

SpectralField dft_inverse(const SpectralField& field, const std::vector<int>& axes)
{
    return apply(field, axes, false);
}

std::vector<cplx> dft_forward_1d(const std::vector<cplx>& f, const UniformGrid1D& g)
{
    SpectralField s({g});
    s.values = f;
    return dft_forward(s, {0}).values;
}

std::vector<cplx> dft_inverse_1d(const std::vector<cplx>& spec, const UniformGrid1D& g)
{
    SpectralField s({g});
    s.values = spec;
    s.spectral[0] = true;
    return dft_inverse(s, {0}).values;
}

namespace {

template <class T>
cplx fl_sum(const T* trace, const UniformGrid1D& t, cplx z)
{
    const double tmax = std::max(std::abs(t.start), std::abs(t.last()));
    if (std::abs(z.imag()) * tmax > 700.0)
        numerical_error("GrowthBudgetExceeded", "e^{|im z| t} overflows on the trace window");
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        config_error("NonFinite", "non-finite frequency");
    // Phasor recurrence, re-anchored every 64 samples to bound rounding drift.
    const cplx step = std::exp(kI * z * t.step);
    cplx acc = 0.0, ph = 0.0;
    for (std::size_t k = 0; k < t.n; ++k) {
        if (k % 64 == 0) ph = std::exp(kI * z * t.at(k));
        const double w = (k == 0 || k + 1 == t.n) ? 0.5 : 1.0;
        acc += w * cplx(trace[k]) * ph;
        ph *= step;
    }
    return kInvSqrt2Pi * t.step * acc;
}

}  // namespace

cplx fourier_laplace_eval(const std::vector<double>& trace, const UniformGrid1D& t, cplx z)
{
    if (trace.size() != t.n) config_error("AxisMismatch", "trace length does not match grid");
    return fl_sum(trace.data(), t, z);
}

cplx fourier_laplace_eval(const std::vector<cplx>& trace, const UniformGrid1D& t, cplx z)
{
    if (trace.size() != t.n) config_error("AxisMismatch", "trace length does not match grid");
    return fl_sum(trace.data(), t, z);
}

double hankel_radial_check(const std::function<double(double)>& profile, double r_max,
                           const std::vector<double>& k_grid)
{
    std::vector<double> rx, rw, cx, cw;
    gauss_legendre(240, 0.0, r_max, rx, rw);
    gauss_legendre(128, -1.0, 1.0, cx, cw);
    const int nphi = 96;
    std::vector<double> fr(rx.size());
    for (std::size_t i = 0; i < rx.size(); ++i) fr[i] = profile(rx[i]);

    // Tilted wave vector direction so the 3D sum does not collapse to 1D.
    const Vec3 dir = Vec3(0.3, -0.5, 0.8).normalized();
    std::vector<double> lhs_abs, diff;
    for (double k : k_grid) {
        // Left: unitary 3D transform by product quadrature in spherical coords.
        cplx lhs = 0.0;
        for (std::size_t a = 0; a < cx.size(); ++a) {
            const double st = std::sqrt(1.0 - cx[a] * cx[a]);
            for (int p = 0; p < nphi; ++p) {
                const double phi = 2.0 * kPi * p / nphi;
                const Vec3 eta(st * std::cos(phi), st * std::sin(phi), cx[a]);
                const double proj = k * eta.dot(dir);
                cplx s = 0.0;
                for (std::size_t i = 0; i < rx.size(); ++i)
                    s += rw[i] * fr[i] * rx[i] * rx[i] * std::exp(kI * proj * rx[i]);
                lhs += cw[a] * (2.0 * kPi / nphi) * s;
            }
        }
        lhs *= std::pow(2.0 * kPi, -1.5);

        // Right: order-1/2 Hankel quadrature with the standard Bessel function.
        double rhs = 0.0;
        for (std::size_t i = 0; i < rx.size(); ++i) {
            const double r = rx[i];
            const double kern = k > 1e-12 ? std::cyl_bessel_j(0.5, k * r) / std::sqrt(k)
                                          : std::sqrt(2.0 * r / kPi);
            rhs += rw[i] * std::pow(r, 1.5) * fr[i] * kern;
        }
        lhs_abs.push_back(std::abs(lhs));
        diff.push_back(std::abs(lhs - rhs));
    }
    const double peak = lhs_abs.empty() ? 0.0 : *std::max_element(lhs_abs.begin(), lhs_abs.end());
    const double dmax = diff.empty() ? 0.0 : *std::max_element(diff.begin(), diff.end());
    if (peak == 0.0) return dmax;
    return dmax / peak;
}

double interp_trace(const double* trace, const UniformGrid1D& g, double t)
{
    const double u = (t - g.start) / g.step;
    if (!(u >= 0.0) || u > static_cast<double>(g.n - 1)) return 0.0;
    if (g.n < 4) {
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(u), g.n - 2);
        const double f = u - static_cast<double>(i);
        return (1.0 - f) * trace[i] + f * trace[i + 1];
    }
    std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(u)) - 1;
    i0 = std::clamp<std::ptrdiff_t>(i0, 0, static_cast<std::ptrdiff_t>(g.n) - 4);
    const double x = u - static_cast<double>(i0);  // stencil nodes at 0,1,2,3
    const double l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    const double l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
    const double l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    const double l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    const double* p = trace + i0;
    return l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3];
}

double interp_trace(const std::vector<double>& trace, const UniformGrid1D& g, double t)
{
    if (trace.size() != g.n) config_error("AxisMismatch", "trace length does not match grid");
    return interp_trace(trace.data(), g, t);
}

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w)
{
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double m = 0.5 * (b + a), h = 0.5 * (b - a);
        x[i] = m - h * z;
        x[n - 1 - i] = m + h * z;
        w[i] = w[n - 1 - i] = 2.0 * h / ((1.0 - z * z) * dp * dp);
    }
}

SphereNodes fibonacci_sphere(int n, double radius)
{
    if (n < 1) config_error("BadNodeCount", "sphere needs at least one node");
    SphereNodes s;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double w = 4.0 * kPi * radius * radius / n;
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        s.x.push_back(radius * Vec3(r * std::cos(phi), r * std::sin(phi), z));
        s.w.push_back(w);
    }
    return s;
}

SphereNodes product_sphere_rule(int n_theta, int n_phi, double radius)
{
    std::vector<double> cx, cw;
    gauss_legendre(n_theta, -1.0, 1.0, cx, cw);
    SphereNodes s;
    for (int a = 0; a < n_theta; ++a) {
        const double st = std::sqrt(1.0 - cx[a] * cx[a]);
        for (int p = 0; p < n_phi; ++p) {
            const double phi = 2.0 * kPi * (p + 0.5) / n_phi;
            s.x.push_back(radius * Vec3(st * std::cos(phi), st * std::sin(phi), cx[a]));
            s.w.push_back(cw[a] * 2.0 * kPi / n_phi * radius * radius);
        }
    }
    return s;
}

void orthonormal_frame(const Vec3& u, Vec3& e1, Vec3& e2, Vec3& e3)
{
    e3 = u.normalized();
    const Vec3 a = std::abs(e3.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    e1 = (a - a.dot(e3) * e3).normalized();
    e2 = e3.cross(e1);
}

}  // namespace pat

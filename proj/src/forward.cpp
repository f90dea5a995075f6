#include "attenopat/forward.hpp"

#include <algorithm>
#include <cmath>

namespace pat {

PlaneMeasurement::PlaneMeasurement(const PlaneSpec& s)
    : t(s.t), xi1(s.xi1), xi2(s.xi2), period(s.period), values(s.t.n * s.xi1.n * s.xi2.n, 0.0)
{
}

SphereMeasurement::SphereMeasurement(const SphereSpec& s)
    : radius(s.radius), nodes(s.nodes), t(s.t), values(s.nodes.size() * s.t.n, 0.0)
{
}

SphereSpec make_sphere_spec(double radius, int n_nodes, std::size_t nt, double t_end)
{
    SphereSpec s;
    s.radius = radius;
    s.nodes = fibonacci_sphere(n_nodes, radius);
    s.t = {0.0, t_end / static_cast<double>(nt), nt};
    return s;
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& ref)
{
    if (a.size() != ref.size()) config_error("GridMismatch", "arrays differ in size");
    std::vector<double> d(a.size()), r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = (a[i] - ref[i]) * (a[i] - ref[i]);
        r[i] = ref[i] * ref[i];
    }
    const double nr = pairwise_sum(r.data(), r.size());
    const double nd = pairwise_sum(d.data(), d.size());
    return nr > 0.0 ? std::sqrt(nd / nr) : std::sqrt(nd);
}

namespace {

void check_plane(const PlaneSpec& s)
{
    s.t.validate();
    s.xi1.validate();
    s.xi2.validate();
    if (s.t.start < 0.0) config_error("BadTimeGrid", "recording window must start at t >= 0");
    if (s.period < 0.0) config_error("BadPeriod", "period must be nonnegative");
}

void check_sphere(const SphereSpec& s, const Phantom& p)
{
    s.t.validate();
    if (s.t.start < 0.0) config_error("BadTimeGrid", "recording window must start at t >= 0");
    if (!(s.radius > 0.0)) config_error("BadRadius", "sphere radius must be positive");
    if (!p.blobs.empty() && p.support_radius() >= s.radius)
        config_error("SupportOutsideSphere", "phantom support must lie strictly inside the sphere");
}

std::vector<Vec3> plane_detectors(const PlaneSpec& s)
{
    std::vector<Vec3> d;
    d.reserve(s.xi1.n * s.xi2.n);
    for (std::size_t i = 0; i < s.xi1.n; ++i)
        for (std::size_t j = 0; j < s.xi2.n; ++j) d.emplace_back(s.xi1.at(i), s.xi2.at(j), 0.0);
    return d;
}

// Detector-major traces -> (t, xi1, xi2) layout.
PlaneMeasurement to_plane(const PlaneSpec& s, const std::vector<double>& traces)
{
    PlaneMeasurement out(s);
    const std::size_t nd = s.xi1.n * s.xi2.n;
    for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t k = 0; k < s.t.n; ++k) out.values[k * nd + d] = traces[d * s.t.n + k];
    return out;
}

std::vector<double> oracle_traces(const Phantom& p, const std::vector<Vec3>& det,
                                  const UniformGrid1D& t)
{
    std::vector<double> out(det.size() * t.n, 0.0);
    parallel_for(det.size(), [&](std::size_t d) {
        for (std::size_t k = 0; k < t.n; ++k) {
            const double tk = t.at(k);
            out[d * t.n + k] = tk > 0.0 ? spherical_mean_oracle(p, tk, det[d]) : 0.0;
        }
    });
    return out;
}

double max_width(const Phantom& p)
{
    double s = 0.0;
    for (const auto& b : p.blobs) s = std::max(s, b.width);
    return s;
}

std::vector<double> kernel_traces(const Phantom& p, const AttenuationModel& m,
                                  const std::vector<Vec3>& det, const UniformGrid1D& t,
                                  const KernelOptions& opt)
{
    m.validate();
    std::vector<double> out(det.size() * t.n, 0.0);
    if (p.blobs.empty()) return out;

    // Source points grouped per blob so whole blobs beyond the cutoff are skipped.
    struct Group {
        Vec3 center;
        double radius;
        SourcePoints pts;
    };
    std::vector<Group> groups;
    for (const auto& b : p.blobs) {
        Phantom one;
        one.blobs.push_back(b);
        groups.push_back({b.center, 6.0 * b.width + 1e-12, source_points(one, opt.step_fraction)});
    }
    const double smin = p.min_width(), smax = max_width(p);
    const UniformGrid1D tp{t.start, t.step, t.n * static_cast<std::size_t>(std::max(1, opt.time_pad))};

    // Sources arriving after the recording window cannot influence it
    // (causality); they are faded out smoothly so no band-limit ringing leaks in.
    const double r1 = t.last() + 4.0 * smax, r2 = t.last() + 12.0 * smax;
    auto taper = [&](double r) {
        if (r <= r1) return 1.0;
        if (r >= r2) return 0.0;
        return 0.5 * (1.0 + std::cos(kPi * (r - r1) / (r2 - r1)));
    };

    const double dr = smin / 12.0;
    const std::size_t nb = static_cast<std::size_t>(std::ceil(r2 / dr)) + 4;
    const double dw = tp.dual_step();
    const double wcut = std::min(0.95 * kPi / t.step, 12.0 / smin);
    const std::size_t nk = static_cast<std::size_t>(std::floor(wcut / dw)) + 1;

    const double c0 = 1.0 / (4.0 * kPi * std::sqrt(2.0 * kPi));
    Eigen::MatrixXcd table(nk, nb);
    for (std::size_t k = 0; k < nk; ++k) {
        const cplx kap = eval_kappa(m, k * dw);
        for (std::size_t b = 0; b < nb; ++b) table(k, b) = c0 * std::exp(kI * kap * (b * dr));
    }

    parallel_for(det.size(), [&](std::size_t d) {
        Eigen::VectorXd hist = Eigen::VectorXd::Zero(nb);
        std::size_t blo = nb, bhi = 0;
        for (const Group& g : groups) {
            if ((g.center - det[d]).norm() - g.radius >= r2) continue;
            const SourcePoints& src = g.pts;
            for (std::size_t q = 0; q < src.x.size(); ++q) {
                const double r = (src.x[q] - det[d]).norm();
                if (r >= r2 || r <= 0.0) continue;
                const double wgt = src.w[q] * taper(r) / r;
                const double u = r / dr;
                std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(u)) - 1;
                if (i0 < 0) i0 = 0;
                const double x = u - static_cast<double>(i0);
                hist[i0] += wgt * (-(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0);
                hist[i0 + 1] += wgt * (x * (x - 2.0) * (x - 3.0) / 2.0);
                hist[i0 + 2] += wgt * (-x * (x - 1.0) * (x - 3.0) / 2.0);
                hist[i0 + 3] += wgt * (x * (x - 1.0) * (x - 2.0) / 6.0);
                blo = std::min<std::size_t>(blo, i0);
                bhi = std::max<std::size_t>(bhi, i0 + 4);
            }
        }
        if (blo >= bhi) return;
        const Eigen::VectorXcd spec =
            table.middleCols(blo, bhi - blo) * hist.segment(blo, bhi - blo).cast<cplx>();
        std::vector<cplx> full(tp.n, 0.0);
        const std::size_t mid = tp.n / 2;
        for (std::size_t k = 0; k < nk && k < mid; ++k) {
            full[mid + k] = spec[k];
            if (k > 0) full[mid - k] = std::conj(spec[k]);
        }
        full[mid] = spec[0].real();
        const auto tr = dft_inverse_1d(full, tp);
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < t.n; ++k) {
            out[d * t.n + k] = tr[k].real();
            re += tr[k].real() * tr[k].real();
            im += tr[k].imag() * tr[k].imag();
        }
        if (im > 1e-16 * re + 1e-300)
            numerical_error("ImaginaryResidue", "time trace is not real");
    });
    return out;
}

std::vector<double> kernel_traces_checked(const Phantom& p, const AttenuationModel& m,
                                          const std::vector<Vec3>& det, const UniformGrid1D& t,
                                          const KernelOptions& opt)
{
    auto out = kernel_traces(p, m, det, t, opt);
    if (opt.self_check) {
        KernelOptions fine = opt;
        fine.step_fraction *= 0.5;
        fine.self_check = false;
        const auto ref = kernel_traces(p, m, det, t, fine);
        if (relative_l2(out, ref) > 1e-3)
            numerical_error("QuadratureTooCoarse", "source quadrature not converged");
    }
    return out;
}

std::vector<double> series_traces(const Phantom& p, const AttenuationModel& m,
                                  const std::vector<Vec3>& det, const UniformGrid1D& t, int J,
                                  const SeriesOptions& opt)
{
    m.validate();
    if (J < 0) config_error("BadTruncation", "J must be nonnegative");
    if (opt.oversample < 1) config_error("BadOversample", "oversample must be >= 1");
    const double ratio = t.start / t.step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        config_error("BadTimeGrid", "series model needs t.start to be a multiple of t.step");
    const std::size_t k0 = static_cast<std::size_t>(std::llround(ratio));
    const std::size_t ov = static_cast<std::size_t>(opt.oversample);
    const double dr = t.step / static_cast<double>(ov);
    const std::size_t nr = (k0 + t.n - 1) * ov + 1;
    const double kinf = m.kappa_inf;

    const bool active = J >= 1 && !m.kappa_star.is_zero();
    Eigen::MatrixXd K, KJ;
    if (active) {
        std::vector<RjKernel> rj;
        for (int j = 1; j <= J; ++j) rj.push_back(compute_rj(m, j, opt.rj_grid));
        K = Eigen::MatrixXd::Zero(t.n, nr);
        KJ = Eigen::MatrixXd::Zero(t.n, nr);
        parallel_for(t.n, [&](std::size_t n) {
            const std::size_t last = (k0 + n) * ov;
            for (std::size_t i = 0; i <= last; ++i) {
                const double r = i * dr, tau = (last - i) * dr;
                const double w = (i == 0 || i == last) ? 0.5 * dr : dr;
                double s = 0.0, term = 0.0, rp = 1.0, fact = 1.0;
                for (int j = 1; j <= J; ++j) {
                    rp *= r;
                    fact *= j;
                    term = rp / fact * rj[j - 1].at(tau);
                    s += term;
                }
                const double damp = w * std::exp(-kinf * r);
                K(n, i) = damp * s;
                KJ(n, i) = damp * term;
            }
        });
    }

    std::vector<double> out(det.size() * t.n, 0.0);
    std::vector<double> tail_sq(det.size(), 0.0), sum_sq(det.size(), 0.0);
    parallel_for(det.size(), [&](std::size_t d) {
        Eigen::VectorXd qf(nr);
        for (std::size_t i = 0; i < nr; ++i) {
            const double r = i * dr;
            qf[i] = r > 0.0 ? spherical_mean_oracle(p, r, det[d]) : 0.0;
        }
        Eigen::VectorXd res(t.n);
        for (std::size_t n = 0; n < t.n; ++n) res[n] = std::exp(-kinf * t.at(n)) * qf[(k0 + n) * ov];
        if (active) {
            res += K * qf;
            tail_sq[d] = (KJ * qf).squaredNorm();
        }
        sum_sq[d] = res.squaredNorm();
        for (std::size_t n = 0; n < t.n; ++n) out[d * t.n + n] = res[n];
    });
    if (active) {
        const double tail = pairwise_sum(tail_sq.data(), tail_sq.size());
        const double tot = pairwise_sum(sum_sq.data(), sum_sq.size());
        if (tot > 0.0 && std::sqrt(tail / tot) > 1e-6)
            numerical_error("TruncationNotConverged", "last series term exceeds 1e-6 of the sum");
    }
    return out;
}

}  // namespace

Phantom with_lateral_images(const Phantom& p, const PlaneSpec& s, double t_reach)
{
    if (!(s.period > 0.0)) return p;
    Phantom out;
    const double L = s.period;
    const double cx = 0.5 * (s.xi1.start + s.xi1.last()), cy = 0.5 * (s.xi2.start + s.xi2.last());
    const double hx = 0.5 * (s.xi1.last() - s.xi1.start), hy = 0.5 * (s.xi2.last() - s.xi2.start);
    for (const auto& b : p.blobs) {
        const double reach = t_reach + 6.0 * b.width;
        const int nmax = static_cast<int>(std::ceil((reach + std::max(hx, hy)) / L)) + 1;
        for (int a = -nmax; a <= nmax; ++a)
            for (int c = -nmax; c <= nmax; ++c) {
                Blob im = b;
                im.center += Vec3(a * L, c * L, 0.0);
                // Distance from the image to the closest point of the patch.
                const double dx = std::max(0.0, std::abs(im.center.x() - cx) - hx);
                const double dy = std::max(0.0, std::abs(im.center.y() - cy) - hy);
                if (std::sqrt(dx * dx + dy * dy + im.center.z() * im.center.z()) <= reach)
                    out.blobs.push_back(im);
            }
    }
    return out;
}

PlaneMeasurement simulate_q_unattenuated(const Phantom& p, const PlaneSpec& s)
{
    check_plane(s);
    p.validate();
    const Phantom src = with_lateral_images(p, s, s.t.last());
    return to_plane(s, oracle_traces(src, plane_detectors(s), s.t));
}

SphereMeasurement simulate_q_unattenuated(const Phantom& p, const SphereSpec& s)
{
    check_sphere(s, p);
    SphereMeasurement out(s);
    out.values = oracle_traces(p, s.nodes.x, s.t);
    return out;
}

PlaneMeasurement simulate_qa_kernel(const Phantom& p, const AttenuationModel& m,
                                    const PlaneSpec& s, const KernelOptions& opt)
{
    check_plane(s);
    p.validate();
    const Phantom src = with_lateral_images(p, s, s.t.last() + 12.0 * max_width(p));
    return to_plane(s, kernel_traces_checked(src, m, plane_detectors(s), s.t, opt));
}

SphereMeasurement simulate_qa_kernel(const Phantom& p, const AttenuationModel& m,
                                     const SphereSpec& s, const KernelOptions& opt)
{
    check_sphere(s, p);
    SphereMeasurement out(s);
    out.values = kernel_traces_checked(p, m, s.nodes.x, s.t, opt);
    return out;
}

SphereMeasurement simulate_qa_series(const Phantom& p, const AttenuationModel& m,
                                     const SphereSpec& s, int J, const SeriesOptions& opt)
{
    check_sphere(s, p);
    SphereMeasurement out(s);
    out.values = series_traces(p, m, s.nodes.x, s.t, J, opt);
    return out;
}

PlaneMeasurement simulate_qa_series(const Phantom& p, const AttenuationModel& m,
                                    const PlaneSpec& s, int J, const SeriesOptions& opt)
{
    check_plane(s);
    p.validate();
    const Phantom src = with_lateral_images(p, s, s.t.last());
    return to_plane(s, series_traces(src, m, plane_detectors(s), s.t, J, opt));
}

SourcePoints source_points(const Phantom& p, double step_fraction)
{
    if (!(step_fraction > 0.0)) config_error("BadStep", "source step must be positive");
    SourcePoints sp;
    for (const auto& b : p.blobs) {
        const double h = b.width * step_fraction;
        const int n = static_cast<int>(std::ceil(6.0 * b.width / h));
        const double r2 = 36.0 * b.width * b.width;
        const double dv = h * h * h;
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j)
                for (int k = -n; k <= n; ++k) {
                    const Vec3 off(i * h, j * h, k * h);
                    const double rr = off.squaredNorm();
                    if (rr > r2) continue;
                    sp.x.push_back(b.center + off);
                    sp.w.push_back(b.amplitude * std::exp(-rr / (2.0 * b.width * b.width)) * dv);
                }
    }
    return sp;
}

double verify_dispersion_relation(const Phantom& p, const AttenuationModel& m, const Vec3& x,
                                  const std::vector<double>& omega_grid)
{
    m.validate();
    double tmax = 0.0, smin = INFINITY;
    for (const auto& b : p.blobs) {
        const double d = (x - b.center).norm();
        if (d <= 6.0 * b.width) config_error("PointInsideSupport", "x must lie outside the phantom");
        tmax = std::max(tmax, d + 8.0 * b.width);
        smin = std::min(smin, b.width);
    }
    const SourcePoints src = source_points(p, 0.25);
    const std::size_t nt = static_cast<std::size_t>(std::ceil(tmax / (smin / 100.0))) + 1;
    const UniformGrid1D tg{0.0, tmax / static_cast<double>(nt - 1), nt};
    std::vector<double> q(nt, 0.0);
    for (std::size_t k = 1; k < nt; ++k) q[k] = spherical_mean_oracle(p, tg.at(k), x);

    const double c0 = 1.0 / (4.0 * kPi * std::sqrt(2.0 * kPi));
    double worst = 0.0;
    for (double w : omega_grid) {
        if (w == 0.0) continue;  // both sides carry a factor w
        const cplx kap = eval_kappa(m, w);
        cplx s = 0.0;
        for (std::size_t i = 0; i < src.x.size(); ++i) {
            const double r = (src.x[i] - x).norm();
            s += src.w[i] * std::exp(kI * kap * r) / r;
        }
        const cplx lhs = -kI * w * c0 * s;
        const cplx fp = -kI * kap * fourier_laplace_eval(q, tg, kap);
        const cplx rhs = w / kap * fp;
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
    return worst;
}

}  // namespace pat

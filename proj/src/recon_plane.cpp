#include "attenopat/recon_plane.hpp"

#include <algorithm>
#include <cmath>

namespace pat {

namespace {

// Periodic (or zero-padded) cubic Lagrange weights on a uniform grid.
struct Stencil {
    std::ptrdiff_t i[4];
    double w[4];
    bool valid = true;
};

Stencil make_stencil(const UniformGrid1D& g, double x, bool periodic)
{
    Stencil s;
    const double u = (x - g.start) / g.step;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(g.n);
    std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(u)) - 1;
    if (!periodic) {
        if (u < 0.0 || u > static_cast<double>(n - 1)) {
            s.valid = false;
            return s;
        }
        i0 = std::clamp<std::ptrdiff_t>(i0, 0, n - 4);
    }
    const double t = u - static_cast<double>(i0);
    s.w[0] = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    s.w[1] = t * (t - 2.0) * (t - 3.0) / 2.0;
    s.w[2] = -t * (t - 1.0) * (t - 3.0) / 2.0;
    s.w[3] = t * (t - 1.0) * (t - 2.0) / 6.0;
    for (int a = 0; a < 4; ++a) s.i[a] = ((i0 + a) % n + n) % n;
    return s;
}

// Cubic interpolation of a complex line sampled on the centered dual grid.
cplx interp_line(const cplx* v, std::size_t stride, const UniformGrid1D& g, double w)
{
    const double dw = g.dual_step();
    const double lo = g.freq(0), hi = g.freq(g.n - 1);
    if (w < lo || w > hi) return 0.0;
    UniformGrid1D f{lo, dw, g.n};
    const Stencil s = make_stencil(f, w, false);
    cplx r = 0.0;
    for (int a = 0; a < 4; ++a) r += s.w[a] * v[s.i[a] * stride];
    return r;
}

void check_spectral3(const SpectralField& f)
{
    if (f.grids.size() != 3 || f.values.size() != f.size())
        config_error("AxisMismatch", "expected a 3-axis spectral field");
    for (bool s : f.spectral)
        if (!s) config_error("AxisMismatch", "all axes must be spectral");
}

}  // namespace

VolumeGrid reconstruct_plane(const PlaneMeasurement& meas, const AttenuationModel& m,
                             const PlaneReconConfig& cfg, PlaneReconReport* report)
{
    m.validate();
    cfg.target.validate();
    if (!(cfg.growth_budget >= 1.0)) config_error("BadBudget", "growth_budget must be >= 1");
    const UniformGrid1D& tg = meas.t;
    const std::size_t n1 = meas.xi1.n, n2 = meas.xi2.n, nt = tg.n;
    if (meas.values.size() != nt * n1 * n2) config_error("AxisMismatch", "measurement size");

    const GridSpec& tgt = cfg.target;
    const double dz = tgt.spacing[2];
    const double zmax = tgt.origin[2] + dz * (tgt.dims[2] - 1);
    const double cutoff = cfg.freq_cutoff > 0.0 ? cfg.freq_cutoff : kPi / dz;
    const double zwin = cfg.z_window > 0.0 ? cfg.z_window : 2.0 * (tg.last() + std::abs(zmax));
    const double drho = 2.0 * kPi / zwin;
    const std::size_t nrho = static_cast<std::size_t>(std::max(0.0, std::floor(cutoff / drho - 0.5)) + 1);

    // Lateral transform of every time slice.
    SpectralField q({tg, meas.xi1, meas.xi2});
    for (std::size_t i = 0; i < q.values.size(); ++i) q.values[i] = meas.values[i];
    q = dft_forward(q, {1, 2});

    const std::size_t ns = n1 * n2;
    // Fh(sigma, rho_k) for rho_k > 0, row per sigma.
    std::vector<cplx> fh(ns * nrho, 0.0);
    std::vector<std::size_t> cnt_growth(ns, 0), cnt_conv(ns, 0), cnt_tot(ns, 0);
    const double tmax = std::max(std::abs(tg.start), std::abs(tg.last()));
    parallel_for(ns, [&](std::size_t s) {
        const std::size_t a = s / n2, b = s % n2;
        if (a == 0 || b == 0) return;  // Nyquist rows have no Hermitian partner
        const double s1 = meas.xi1.freq(a), s2 = meas.xi2.freq(b);
        const double sig2 = s1 * s1 + s2 * s2;
        std::vector<cplx> tr(nt);
        double e = 0.0;
        for (std::size_t k = 0; k < nt; ++k) {
            tr[k] = q.values[k * ns + s];
            e += std::norm(tr[k]);
        }
        if (e == 0.0) return;
        for (std::size_t r = 0; r < nrho; ++r) {
            const double rho = (r + 0.5) * drho;
            if (sig2 + rho * rho > cutoff * cutoff) break;
            ++cnt_tot[s];
            cplx z;
            try {
                z = eval_kappa_inverse(m, std::sqrt(sig2 + rho * rho));
            } catch (const Error& err) {
                if (err.kind() != ErrorKind::Numerical) throw;
                ++cnt_conv[s];
                continue;
            }
            if (z.imag() < 0.0 && -z.imag() * tmax > std::log(cfg.growth_budget)) {
                ++cnt_growth[s];
                continue;
            }
            double taper = 1.0;
            if (cfg.damping > 0.0 && rho < cfg.damping)
                taper = 0.5 * (1.0 - std::cos(kPi * rho / cfg.damping));
            fh[s * nrho + r] = -2.0 * kI * rho * taper * fourier_laplace_eval(tr, tg, z);
        }
    });

    // Depth synthesis on the target x3 samples, using
    // Fh(sigma, -rho) = conj Fh(-sigma, rho).
    const std::size_t nz = static_cast<std::size_t>(tgt.dims[2]);
    const double norm = drho / std::sqrt(2.0 * kPi);
    std::vector<SpectralField> planes(nz, SpectralField({meas.xi1, meas.xi2}));
    for (auto& p : planes) p.spectral = {true, true};
    std::vector<cplx> phase(nz * nrho);
    for (std::size_t zi = 0; zi < nz; ++zi)
        for (std::size_t r = 0; r < nrho; ++r)
            phase[zi * nrho + r] = std::exp(-kI * ((r + 0.5) * drho) * (tgt.origin[2] + dz * zi));
    parallel_for(ns, [&](std::size_t s) {
        const std::size_t a = s / n2, b = s % n2;
        if (a == 0 || b == 0) return;
        const std::size_t mirror = ((n1 - a) % n1) * n2 + (n2 - b) % n2;
        for (std::size_t zi = 0; zi < nz; ++zi) {
            const cplx* ph_row = phase.data() + zi * nrho;
            cplx acc = 0.0;
            for (std::size_t r = 0; r < nrho; ++r) {
                const cplx ph = ph_row[r];
                acc += fh[s * nrho + r] * ph + std::conj(fh[mirror * nrho + r]) * std::conj(ph);
            }
            planes[zi].values[s] = norm * acc;
        }
    });

    VolumeGrid out(tgt);
    const bool periodic = meas.period > 0.0;
    double re2 = 0.0, im2 = 0.0;
    std::vector<double> re_acc(nz, 0.0), im_acc(nz, 0.0);
    parallel_for(nz, [&](std::size_t zi) {
        const SpectralField lat = dft_inverse(planes[zi], {0, 1});
        const double x3 = tgt.origin[2] + dz * zi;
        for (int i = 0; i < tgt.dims[0]; ++i) {
            const Stencil sx = make_stencil(meas.xi1, tgt.origin[0] + tgt.spacing[0] * i, periodic);
            for (int j = 0; j < tgt.dims[1]; ++j) {
                const Stencil sy =
                    make_stencil(meas.xi2, tgt.origin[1] + tgt.spacing[1] * j, periodic);
                cplx v = 0.0;
                if (sx.valid && sy.valid && x3 > 0.0)
                    for (int u = 0; u < 4; ++u)
                        for (int w = 0; w < 4; ++w)
                            v += sx.w[u] * sy.w[w] * lat.values[sx.i[u] * n2 + sy.i[w]];
                out.at(i, j, static_cast<int>(zi)) = v.real();
                re_acc[zi] += v.real() * v.real();
                im_acc[zi] += v.imag() * v.imag();
            }
        }
    });
    re2 = pairwise_sum(re_acc.data(), nz);
    im2 = pairwise_sum(im_acc.data(), nz);
    const double ratio = re2 > 0.0 ? std::sqrt(im2 / re2) : 0.0;
    if (report) {
        report->samples = report->zeroed_growth = report->zeroed_noconv = 0;
        for (std::size_t s = 0; s < ns; ++s) {
            report->samples += cnt_tot[s];
            report->zeroed_growth += cnt_growth[s];
            report->zeroed_noconv += cnt_conv[s];
        }
        report->imag_ratio = ratio;
    }
    if (ratio > 1e-6) numerical_error("ImaginaryResidue", "reconstruction is not real");
    return out;
}

SpectralField rstar_freq_apply(const SpectralField& spec)
{
    check_spectral3(spec);
    SpectralField out = spec;
    const auto& g0 = spec.grids[0];
    const std::size_t n0 = g0.n, n1 = spec.grids[1].n, n2 = spec.grids[2].n;
    const std::size_t stride = n1 * n2;
    const double h = 1e-4 * g0.dual_step();
    parallel_for(n1 * n2, [&](std::size_t s) {
        const double s1 = spec.grids[1].freq(s / n2), s2 = spec.grids[2].freq(s % n2);
        const cplx* line = spec.values.data() + s;
        for (std::size_t k = 0; k < n0; ++k) {
            const double rho = g0.freq(k);
            const double K = std::sqrt(s1 * s1 + s2 * s2 + rho * rho);
            cplx v;
            if (K < h) {
                v = (interp_line(line, stride, g0, h) - interp_line(line, stride, g0, -h)) /
                    (2.0 * kI * h);
            } else {
                v = (interp_line(line, stride, g0, K) - interp_line(line, stride, g0, -K)) /
                    (2.0 * kI * K);
            }
            out.values[k * stride + s] = v;
        }
    });
    out.hermitian = false;
    return out;
}

SpectralField e_remap_apply(const SpectralField& spec)
{
    check_spectral3(spec);
    const auto& g0 = spec.grids[0];
    const std::size_t n0 = g0.n, n1 = spec.grids[1].n, n2 = spec.grids[2].n;
    const std::size_t stride = n1 * n2;
    double peak = 0.0, asym = 0.0;
    for (std::size_t k = 1; k < n0; ++k)
        for (std::size_t s = 0; s < stride; ++s) {
            const cplx a = spec.values[k * stride + s], b = spec.values[(n0 - k) * stride + s];
            peak = std::max(peak, std::abs(a));
            asym = std::max(asym, std::abs(a - b));
        }
    if (asym > 1e-10 * std::max(peak, 1e-300))
        config_error("EvennessViolation", "input spectrum is not even in its first axis");

    SpectralField out = spec;
    parallel_for(stride, [&](std::size_t s) {
        const double s1 = spec.grids[1].freq(s / n2), s2 = spec.grids[2].freq(s % n2);
        const double sig = std::sqrt(s1 * s1 + s2 * s2);
        const cplx* line = spec.values.data() + s;
        for (std::size_t k = 0; k < n0; ++k) {
            const double w = g0.freq(k);
            cplx v = 0.0;
            if (std::abs(w) >= sig) {
                const double arg = std::sqrt(std::max(0.0, w * w - sig * sig));
                v = kI * w * interp_line(line, stride, g0, w >= 0.0 ? arg : -arg);
            }
            out.values[k * stride + s] = v;
        }
    });
    out.hermitian = false;
    return out;
}

SpectralField cone_project(const SpectralField& spec)
{
    check_spectral3(spec);
    SpectralField out = spec;
    const std::size_t n0 = spec.grids[0].n, n1 = spec.grids[1].n, n2 = spec.grids[2].n;
    for (std::size_t k = 0; k < n0; ++k) {
        const double w = std::abs(spec.grids[0].freq(k));
        for (std::size_t a = 0; a < n1; ++a)
            for (std::size_t b = 0; b < n2; ++b) {
                const double s1 = spec.grids[1].freq(a), s2 = spec.grids[2].freq(b);
                if (w * w < s1 * s1 + s2 * s2) out.values[(k * n1 + a) * n2 + b] = 0.0;
            }
    }
    return out;
}

double cone_energy_fraction(const PlaneMeasurement& meas)
{
    // q(t) = t * (mean over radius |t|) is odd in t; the cone statement concerns
    // that full-line signal, so the trace is extended oddly to [-T, T).
    if (std::abs(meas.t.start) > 1e-12 * meas.t.step)
        config_error("BadGrid", "cone_energy_fraction needs traces starting at t = 0");
    const std::size_t nt = meas.t.n, plane = meas.xi1.n * meas.xi2.n;
    const UniformGrid1D t2{-static_cast<double>(nt) * meas.t.step, meas.t.step, 2 * nt};
    SpectralField f({t2, meas.xi1, meas.xi2});
    for (std::size_t k = 1; k < nt; ++k)
        for (std::size_t p = 0; p < plane; ++p) {
            const double v = meas.values[k * plane + p];
            f.values[(nt + k) * plane + p] = v;
            f.values[(nt - k) * plane + p] = -v;
        }
    f = dft_forward(f, {0, 1, 2});
    const SpectralField in = cone_project(f);
    std::vector<double> tot(f.values.size()), kept(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        tot[i] = std::norm(f.values[i]);
        kept[i] = std::norm(in.values[i]);
    }
    const double et = pairwise_sum(tot.data(), tot.size()), ek = pairwise_sum(kept.data(), kept.size());
    return et > 0.0 ? (et - ek) / et : 0.0;
}

}  // namespace pat

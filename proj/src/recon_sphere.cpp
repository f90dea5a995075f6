#include "attenopat/recon_sphere.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pat {

void SphereReconConfig::validate() const
{
    target.validate();
    if (series_J < 1) config_error("BadTruncation", "series_J must be >= 1");
    if (!(neumann_tol > 0.0)) config_error("BadTolerance", "neumann_tol must be positive");
    if (neumann_max_iter < 1) config_error("BadIterations", "neumann_max_iter must be >= 1");
    if (laplacian_order != 2 && laplacian_order != 4)
        config_error("BadLaplacian", "laplacian_order must be 2 or 4");
}

namespace {

void check_geometry(const AttenuationModel& m, double radius, const SphereReconConfig& cfg)
{
    if (m.c != 1.0)
        config_error("SphereNeedsUnitSpeed", "sphere reconstruction requires c = 1");
    const GridSpec& g = cfg.target;
    const double margin = 2.0 * g.spacing.maxCoeff();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const Vec3 p = g.point(a * (g.dims[0] - 1), b * (g.dims[1] - 1), c * (g.dims[2] - 1));
                if (p.norm() > radius - margin)
                    config_error("TargetOutsideSphere",
                                 "target grid must stay two cells inside the sphere");
            }
}

// I(x) = sum_i w_i e^{kinf d_i} trace_i(d_i), d_i = |xi_i - x|.
VolumeGrid backproject_sum(const std::vector<double>& traces, const UniformGrid1D& tg,
                           const SphereNodes& nodes, const GridSpec& grid, double kinf)
{
    VolumeGrid out(grid);
    const std::size_t nn = nodes.size();
    const double inv = 1.0 / tg.step;
    const double umax = static_cast<double>(tg.n - 1);
    const std::ptrdiff_t imax = static_cast<std::ptrdiff_t>(tg.n) - 4;
    parallel_for(static_cast<std::size_t>(grid.dims[0]), [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int k = 0; k < grid.dims[2]; ++k) {
                const Vec3 x = grid.point(i, j, k);
                double acc = 0.0;
                for (std::size_t n = 0; n < nn; ++n) {
                    const double d = (nodes.x[n] - x).norm();
                    const double u = (d - tg.start) * inv;
                    if (!(u >= 0.0) || u > umax) continue;
                    std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(u) - 1;
                    i0 = std::clamp<std::ptrdiff_t>(i0, 0, imax);
                    const double f = u - static_cast<double>(i0);
                    const double* p = traces.data() + n * tg.n + i0;
                    const double v = -(f - 1.0) * (f - 2.0) * (f - 3.0) / 6.0 * p[0] +
                                     f * (f - 2.0) * (f - 3.0) / 2.0 * p[1] -
                                     f * (f - 1.0) * (f - 3.0) / 2.0 * p[2] +
                                     f * (f - 1.0) * (f - 2.0) / 6.0 * p[3];
                    acc += nodes.w[n] * (kinf != 0.0 ? std::exp(kinf * d) : 1.0) * v;
                }
                out.at(i, j, k) = acc;
            }
    });
    return out;
}

double max_corner_norm(const GridSpec& g)
{
    double r = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                r = std::max(r, g.point(a * (g.dims[0] - 1), b * (g.dims[1] - 1), c * (g.dims[2] - 1)).norm());
    return r;
}

double norm2(const VolumeGrid& v)
{
    std::vector<double> sq(v.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = v.values[i] * v.values[i];
    return std::sqrt(pairwise_sum(sq.data(), sq.size()));
}

}  // namespace

VolumeGrid discrete_laplacian(const VolumeGrid& in, int order)
{
    if (order != 2 && order != 4) config_error("BadLaplacian", "laplacian_order must be 2 or 4");
    const int halo = order / 2;
    GridSpec g = in.spec.inflated(-halo);
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 1) config_error("BadGrid", "grid too small for the Laplacian stencil");
    VolumeGrid out(g);
    const Vec3 h2 = in.spec.spacing.cwiseProduct(in.spec.spacing);
    parallel_for(static_cast<std::size_t>(g.dims[0]), [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k) {
                const int I = i + halo, J = j + halo, K = k + halo;
                const double c = in.at(I, J, K);
                double v;
                if (order == 2) {
                    v = (in.at(I + 1, J, K) - 2.0 * c + in.at(I - 1, J, K)) / h2[0] +
                        (in.at(I, J + 1, K) - 2.0 * c + in.at(I, J - 1, K)) / h2[1] +
                        (in.at(I, J, K + 1) - 2.0 * c + in.at(I, J, K - 1)) / h2[2];
                } else {
                    auto d4 = [&](double m2, double m1, double p1, double p2, double hh) {
                        return (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * hh);
                    };
                    v = d4(in.at(I - 2, J, K), in.at(I - 1, J, K), in.at(I + 1, J, K),
                           in.at(I + 2, J, K), h2[0]) +
                        d4(in.at(I, J - 2, K), in.at(I, J - 1, K), in.at(I, J + 1, K),
                           in.at(I, J + 2, K), h2[1]) +
                        d4(in.at(I, J, K - 2), in.at(I, J, K - 1), in.at(I, J, K + 1),
                           in.at(I, J, K + 2), h2[2]);
                }
                out.at(i, j, k) = v;
            }
    });
    return out;
}

SphereMeasurement multiply_M(const SphereMeasurement& meas, const AttenuationModel& m)
{
    SphereMeasurement out = meas;
    const double tmax = std::max(std::abs(meas.t.start), std::abs(meas.t.last()));
    if (m.kappa_inf * tmax > 700.0)
        numerical_error("GrowthBudgetExceeded", "e^{kappa_inf t} overflows");
    for (std::size_t i = 0; i < meas.nodes.size(); ++i)
        for (std::size_t k = 0; k < meas.t.n; ++k)
            out.values[i * meas.t.n + k] *= std::exp(m.kappa_inf * meas.t.at(k));
    return out;
}

VolumeGrid fbp_backproject(const SphereMeasurement& meas, const AttenuationModel& m,
                           const SphereReconConfig& cfg)
{
    m.validate();
    cfg.validate();
    check_geometry(m, meas.radius, cfg);
    if (meas.values.size() != meas.nodes.size() * meas.t.n)
        config_error("AxisMismatch", "measurement size");
    const GridSpec big = cfg.target.inflated(cfg.laplacian_order / 2);
    const VolumeGrid I = backproject_sum(meas.values, meas.t, meas.nodes, big, m.kappa_inf);
    VolumeGrid out = discrete_laplacian(I, cfg.laplacian_order);
    out.spec = cfg.target;
    const double c = -1.0 / (2.0 * kPi * meas.radius);
    for (double& v : out.values) v *= c;
    return out;
}

TOperator TOperator::from_function(std::function<VolumeGrid(const VolumeGrid&)> f)
{
    TOperator t;
    t.zero_ = false;
    t.custom_ = std::move(f);
    return t;
}

double TOperator::series_kernel(double tau, double rho) const
{
    if (tau < 0.0) return 0.0;
    double s = 0.0, rp = 1.0, fact = 1.0;
    for (std::size_t j = 1; j <= rj_.size(); ++j) {
        fact *= static_cast<double>(j);
        s += rp / fact * rj_[j - 1].at(tau);
        rp *= rho;
    }
    return kappa_inf_ != 0.0 ? s * std::exp(kappa_inf_ * tau) : s;
}

double TOperator::f0(const Vec3& x, const Vec3& y, int n_theta, int n_phi) const
{
    if (zero_ || rj_.empty()) return 0.0;
    const Vec3 dxy = x - y;
    const double L = dxy.norm();
    if (L == 0.0) numerical_error("SingularPair", "F0 needs x != y");
    // |xi - x| > |xi - y|  <=>  xi . u < p with u = (x - y)/|x - y|.
    const double p = (x.squaredNorm() - y.squaredNorm()) / (2.0 * L);
    double cmax = p / radius_;
    if (cmax <= -1.0) return 0.0;
    cmax = std::min(cmax, 1.0);
    Vec3 e1, e2, u;
    orthonormal_frame(dxy, e1, e2, u);
    std::vector<double> cx, cw;
    gauss_legendre(n_theta, -1.0, cmax, cx, cw);
    double acc = 0.0;
    for (int a = 0; a < n_theta; ++a) {
        const double st = std::sqrt(std::max(0.0, 1.0 - cx[a] * cx[a]));
        double ring = 0.0;
        for (int b = 0; b < n_phi; ++b) {
            const double phi = 2.0 * kPi * (b + 0.5) / n_phi;
            const Vec3 xi = radius_ * (st * std::cos(phi) * e1 + st * std::sin(phi) * e2 + cx[a] * u);
            const double dx = (xi - x).norm(), dy = (xi - y).norm();
            ring += series_kernel(std::max(0.0, dx - dy), dy);
        }
        acc += cw[a] * ring;
    }
    return acc * radius_ * radius_ * 2.0 * kPi / n_phi;
}

double TOperator::kernel_value(const Vec3& x, const Vec3& y, double step, int order, int n_theta,
                               int n_phi) const
{
    if (zero_ || rj_.empty()) return 0.0;
    if (order != 2 && order != 4) config_error("BadLaplacian", "order must be 2 or 4");
    const double c = f0(x, y, n_theta, n_phi);
    double lap = 0.0;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = step;
        const double p1 = f0(x + e, y, n_theta, n_phi), m1 = f0(x - e, y, n_theta, n_phi);
        if (order == 2) {
            lap += (p1 - 2.0 * c + m1) / (step * step);
        } else {
            const double p2 = f0(x + 2.0 * e, y, n_theta, n_phi);
            const double m2 = f0(x - 2.0 * e, y, n_theta, n_phi);
            lap += (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * step * step);
        }
    }
    return -lap / (8.0 * kPi * kPi * radius_);
}

VolumeGrid TOperator::apply_matrix_free(const VolumeGrid& h) const
{
    const double dv = grid_.cell_volume();
    std::vector<Vec3> pos;
    std::vector<double> mass;
    for (int i = 0; i < grid_.dims[0]; ++i)
        for (int j = 0; j < grid_.dims[1]; ++j)
            for (int k = 0; k < grid_.dims[2]; ++k) {
                const double v = h.at(i, j, k);
                if (v == 0.0) continue;
                pos.push_back(grid_.point(i, j, k));
                mass.push_back(v * dv);
            }
    const std::size_t nn = nodes_.size(), nr = rgrid_.n;
    std::vector<double> traces(nn * nr, 0.0);
    const double inv = 1.0 / rgrid_.step;
    parallel_for(nn, [&](std::size_t n) {
        Eigen::VectorXd hist = Eigen::VectorXd::Zero(nr);
        for (std::size_t q = 0; q < pos.size(); ++q) {
            const double u = ((nodes_.x[n] - pos[q]).norm() - rgrid_.start) * inv;
            const std::size_t b = static_cast<std::size_t>(u);
            const double f = u - static_cast<double>(b);
            hist[b] += (1.0 - f) * mass[q];
            hist[b + 1] += f * mass[q];
        }
        Eigen::Map<Eigen::VectorXd> d(traces.data() + n * nr, nr);
        d.noalias() = kmat_ * hist / (4.0 * kPi);
    });
    const int halo = laplacian_order_ / 2;
    const VolumeGrid I = backproject_sum(traces, rgrid_, nodes_, grid_.inflated(halo), 0.0);
    VolumeGrid out = discrete_laplacian(I, laplacian_order_);
    out.spec = grid_;
    const double c = -1.0 / (2.0 * kPi * radius_);
    for (double& v : out.values) v *= c;
    return out;
}

VolumeGrid TOperator::apply(const VolumeGrid& h) const
{
    if (custom_) return custom_(h);
    if (zero_) {
        VolumeGrid z(h.spec);
        return z;
    }
    if (h.spec.dims != grid_.dims || h.values.size() != grid_.size())
        config_error("GridMismatch", "field does not match the operator grid");
    if (mode_ == Mode::Dense) {
        const std::size_t n = grid_.size();
        VolumeGrid out(grid_);
        parallel_for(n, [&](std::size_t i) {
            const double* row = dense_.data() + i * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * h.values[j];
            out.values[i] = s;
        });
        return out;
    }
    return apply_matrix_free(h);
}

double TOperator::estimate_norm(const GridSpec& grid, int iterations, std::uint64_t seed)
{
    if (zero_) {
        norm_estimate_ = 0.0;
        return 0.0;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    VolumeGrid v(grid);
    for (double& x : v.values) x = nd(rng);
    double lam = 0.0;
    double nv = norm2(v);
    for (int it = 0; it < iterations; ++it) {
        for (double& x : v.values) x /= nv;
        v = apply(v);
        const double nw = norm2(v);
        lam = nw;
        nv = nw;
        if (nw == 0.0) break;
    }
    norm_estimate_ = lam;
    return lam;
}

TOperator assemble_T(const AttenuationModel& m, const SphereSpec& s, const SphereReconConfig& cfg,
                     TOperator::Mode mode)
{
    m.validate();
    cfg.validate();
    check_geometry(m, s.radius, cfg);
    TOperator T;
    T.mode_ = mode;
    T.radius_ = s.radius;
    T.kappa_inf_ = m.kappa_inf;
    T.laplacian_order_ = cfg.laplacian_order;
    T.nodes_ = s.nodes;
    T.grid_ = cfg.target;
    if (m.kappa_star.is_zero()) {
        T.zero_ = true;
        return T;
    }
    T.zero_ = false;

    // Series terms until the bound sup|r_j*| (2 varpi)^{j-1} / j! falls below
    // 1e-8 of the running sum.
    const double span = 2.0 * s.radius;
    double total = 0.0, fact = 1.0;
    for (int j = 1;; ++j) {
        T.rj_.push_back(compute_rj(m, j, cfg.rj_grid));
        fact *= j;
        double sup = 0.0;
        const auto& k = T.rj_.back();
        for (std::size_t i = k.zero_index(); i < k.t_grid.n && k.t_grid.at(i) <= span; ++i)
            sup = std::max(sup, std::abs(k.values[i]) * std::exp(m.kappa_inf * k.t_grid.at(i)));
        const double term = sup * std::pow(span, j - 1) / fact;
        total += term;
        if (j >= cfg.series_J && term <= 1e-8 * total) break;
        if (j >= 40) numerical_error("SeriesNotConverged", "r_j series tail above 1e-8");
    }

    const GridSpec big = cfg.target.inflated(cfg.laplacian_order / 2);
    const double rin = max_corner_norm(big);
    const double dr = cfg.target.spacing.minCoeff() / 4.0;
    const double lo = std::max(0.0, s.radius - rin - 4.0 * dr);
    const std::size_t nr = static_cast<std::size_t>(std::ceil((s.radius + rin + 4.0 * dr - lo) / dr)) + 1;
    T.rgrid_ = {lo, dr, nr};
    T.kmat_ = Eigen::MatrixXd::Zero(nr, nr);
    parallel_for(nr, [&](std::size_t n) {
        for (std::size_t b = 0; b <= n; ++b)
            T.kmat_(n, b) = T.series_kernel((n - b) * dr, T.rgrid_.at(b) == 0.0 ? 0.0 : T.rgrid_.at(b));
        // K jumps at tau = 0; the node on the jump carries its mean value.
        T.kmat_(n, n) *= 0.5;
    });

    if (mode == TOperator::Mode::Dense) {
        // Column b holds T applied to a point mass h dV at y_b: the grid Laplacian
        // of F0(., y_b) on the inflated grid, as in the matrix-free path.
        const GridSpec& g = cfg.target;
        if (g.size() > 24u * 24u * 24u)
            config_error("DenseTooLarge", "dense T is capped at 24^3 target cells");
        const std::size_t n = g.size();
        const double h = g.spacing.minCoeff();
        const double scale = -g.cell_volume() / (8.0 * kPi * kPi * T.radius_);
        const GridSpec big = g.inflated(cfg.laplacian_order / 2);
        T.dense_.assign(n * n, 0.0);
        const int nt = 16, np = 24;
        parallel_for(n, [&](std::size_t b) {
            const int bi = static_cast<int>(b / (g.dims[1] * g.dims[2]));
            const int bj = static_cast<int>(b / g.dims[2] % g.dims[1]);
            const int bk = static_cast<int>(b % g.dims[2]);
            const Vec3 y = g.point(bi, bj, bk);
            VolumeGrid f(big);
            for (int i = 0; i < big.dims[0]; ++i)
                for (int j = 0; j < big.dims[1]; ++j)
                    for (int k = 0; k < big.dims[2]; ++k) {
                        const Vec3 x = big.point(i, j, k);
                        double v = 0.0;
                        if ((x - y).norm() < 2.0 * h) {
                            // F0 is bounded but direction-dependent as x -> y;
                            // average over a 4^3 sub-cell lattice of the source cell.
                            for (int u = 0; u < 4; ++u)
                                for (int w = 0; w < 4; ++w)
                                    for (int z = 0; z < 4; ++z) {
                                        const Vec3 off((u - 1.5) / 4.0 * g.spacing[0],
                                                       (w - 1.5) / 4.0 * g.spacing[1],
                                                       (z - 1.5) / 4.0 * g.spacing[2]);
                                        v += T.f0(x, y + off, nt, np);
                                    }
                            v /= 64.0;
                        } else {
                            v = T.f0(x, y, nt, np);
                        }
                        f.at(i, j, k) = v;
                    }
            const VolumeGrid lap = discrete_laplacian(f, cfg.laplacian_order);
            for (std::size_t a = 0; a < n; ++a) T.dense_[a * n + b] = scale * lap.values[a];
        });
    }
    T.estimate_norm(cfg.target, cfg.power_iterations, cfg.seed);
    return T;
}

VolumeGrid neumann_solve(const TOperator& T, const VolumeGrid& rhs, const SphereReconConfig& cfg,
                         NeumannReport* report)
{
    NeumannReport rep;
    const double nr = norm2(rhs);
    const double rho = T.norm_estimate();
    rep.richardson = rho >= 1.0;
    // Richardson step for (I + T) h = rhs when the Neumann series may diverge.
    const double omega = rep.richardson ? 1.0 / (1.0 + rho) : 1.0;
    VolumeGrid h = rhs;
    for (int it = 1; it <= cfg.neumann_max_iter; ++it) {
        const VolumeGrid th = T.apply(h);
        VolumeGrid next = h;
        double diff = 0.0;
        for (std::size_t i = 0; i < h.values.size(); ++i) {
            const double target = rhs.values[i] - th.values[i];
            next.values[i] = rep.richardson ? h.values[i] + omega * (target - h.values[i]) : target;
            const double d = next.values[i] - h.values[i];
            diff += d * d;
        }
        h = std::move(next);
        rep.iterations = it;
        rep.residuals.push_back(nr > 0.0 ? std::sqrt(diff) / nr : std::sqrt(diff));
        if (rep.residuals.back() <= cfg.neumann_tol) {
            rep.converged = true;
            break;
        }
    }
    if (report) *report = rep;
    if (!rep.converged) {
        std::string trace;
        for (double r : rep.residuals) trace += " " + std::to_string(r);
        numerical_error("NotConverged", "Neumann iteration residuals:" + trace);
    }
    return h;
}

VolumeGrid reconstruct_sphere(const SphereMeasurement& meas, const AttenuationModel& m,
                              const SphereReconConfig& cfg, SphereReconReport* report)
{
    VolumeGrid rhs = fbp_backproject(meas, m, cfg);
    if (report) report->uncorrected = rhs;
    if (m.kappa_star.is_zero()) {
        if (report) {
            report->norm_estimate = 0.0;
            report->neumann = NeumannReport{1, true, false, {0.0}};
        }
        return rhs;
    }
    const TOperator T = assemble_T(m, meas.spec(), cfg);
    NeumannReport nrep;
    VolumeGrid h = neumann_solve(T, rhs, cfg, &nrep);
    if (report) {
        report->norm_estimate = T.norm_estimate();
        report->neumann = nrep;
    }
    return h;
}

}  // namespace pat

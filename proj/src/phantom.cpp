#include "attenopat/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace pat {

double Phantom::support_radius() const
{
    double r = 0.0;
    for (const auto& b : blobs) r = std::max(r, b.center.norm() + 6.0 * b.width);
    return r;
}

double Phantom::min_width() const
{
    double s = INFINITY;
    for (const auto& b : blobs) s = std::min(s, b.width);
    return s;
}

void Phantom::validate() const
{
    for (const auto& b : blobs) {
        if (!(b.width > 0.0) || !std::isfinite(b.width))
            config_error("BadPhantom", "blob width must be positive");
        if (!b.center.allFinite() || !std::isfinite(b.amplitude))
            config_error("BadPhantom", "blob parameters must be finite");
    }
}

double eval(const Phantom& p, const Vec3& x)
{
    double v = 0.0;
    for (const auto& b : p.blobs)
        v += b.amplitude * std::exp(-(x - b.center).squaredNorm() / (2.0 * b.width * b.width));
    return v;
}

double spherical_mean_oracle(const Phantom& p, double t, const Vec3& xi)
{
    if (!(t > 0.0)) config_error("BadRadius", "spherical mean needs t > 0");
    double v = 0.0;
    for (const auto& b : p.blobs) {
        const double s2 = b.width * b.width;
        const double d = (xi - b.center).norm();
        // mean = a e^{-(d-t)^2/2s^2} (1 - e^{-2x}) / (2x), x = d t / s^2.
        const double x = d * t / s2;
        const double g = std::exp(-(d - t) * (d - t) / (2.0 * s2));
        const double f = x > 1e-8 ? -std::expm1(-2.0 * x) / (2.0 * x) : 1.0 - x;
        v += b.amplitude * t * g * f;
    }
    return v;
}

void GridSpec::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) config_error("BadGrid", "grid dims must be positive");
        if (!(spacing[a] > 0.0)) config_error("BadGrid", "grid spacing must be positive");
    }
    if (!origin.allFinite()) config_error("BadGrid", "grid origin must be finite");
}

GridSpec GridSpec::centered_cube(int n, double half_width)
{
    GridSpec g;
    const double h = n > 1 ? 2.0 * half_width / (n - 1) : 1.0;
    g.spacing = Vec3::Constant(h);
    g.origin = Vec3::Constant(n > 1 ? -half_width : 0.0);
    g.dims = {n, n, n};
    return g;
}

GridSpec GridSpec::inflated(int halo) const
{
    GridSpec g = *this;
    for (int a = 0; a < 3; ++a) {
        g.origin[a] -= halo * spacing[a];
        g.dims[a] += 2 * halo;
    }
    return g;
}

VolumeGrid rasterize(const Phantom& p, const GridSpec& grid)
{
    grid.validate();
    VolumeGrid v(grid);
    parallel_for(static_cast<std::size_t>(grid.dims[0]), [&](std::size_t i) {
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int k = 0; k < grid.dims[2]; ++k)
                v.at(static_cast<int>(i), j, k) = eval(p, grid.point(static_cast<int>(i), j, k));
    });
    return v;
}

double l2_norm(const VolumeGrid& v)
{
    std::vector<double> sq(v.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = v.values[i] * v.values[i];
    return std::sqrt(pairwise_sum(sq.data(), sq.size()) * v.spec.cell_volume());
}

}  // namespace pat

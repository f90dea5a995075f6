#pragma once

#include "attenopat/common.hpp"

#include <array>
#include <vector>

namespace pat {

struct Blob {
    Vec3 center = Vec3::Zero();
    double width = 1.0;
    double amplitude = 1.0;
};

// Source h(x) = sum a exp(-|x - c|^2 / (2 s^2)).
struct Phantom {
    std::vector<Blob> blobs;

    // max |center| + 6 s over blobs.
    double support_radius() const;
    double min_width() const;
    void validate() const;
};

double eval(const Phantom& p, const Vec3& x);

// (R h)(t, xi) = (t / 4 pi) int_{S^2} h(xi + t eta) dS(eta), in closed form.
double spherical_mean_oracle(const Phantom& p, double t, const Vec3& xi);

struct GridSpec {
    Vec3 origin = Vec3::Zero();
    Vec3 spacing = Vec3::Ones();
    std::array<int, 3> dims{1, 1, 1};

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    double cell_volume() const { return spacing.prod(); }
    Vec3 point(int i, int j, int k) const
    {
        return origin + Vec3(i * spacing[0], j * spacing[1], k * spacing[2]);
    }
    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
    }
    void validate() const;
    // Cube of n^3 nodes centered at the origin with the given half-width.
    static GridSpec centered_cube(int n, double half_width);
    // Expands the grid by `halo` cells on every side.
    GridSpec inflated(int halo) const;
};

struct VolumeGrid {
    GridSpec spec;
    std::vector<double> values;

    VolumeGrid() = default;
    explicit VolumeGrid(const GridSpec& s) : spec(s), values(s.size(), 0.0) {}
    double& at(int i, int j, int k) { return values[spec.index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[spec.index(i, j, k)]; }
};

VolumeGrid rasterize(const Phantom& p, const GridSpec& grid);

// Discrete L2 norm sqrt(sum v^2 dV).
double l2_norm(const VolumeGrid& v);

}  // namespace pat

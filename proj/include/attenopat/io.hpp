#pragma once

#include "attenopat/recon_plane.hpp"
#include "attenopat/recon_sphere.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <variant>

namespace pat {

// PATG binary layout (little-endian):
//   "PATG", u16 version = 1, u8 kind, u8 ndims,
//   ndims x {f64 origin, f64 spacing, u64 count},
//   sphere kind only: u64 node count N, N x {f64 x, y, z, w},
//   f64 payload, row-major; sphere payload is node-major (N x t).
enum class PatgKind : std::uint8_t { Volume = 1, Plane = 2, Sphere = 3 };

using PatgData = std::variant<VolumeGrid, PlaneMeasurement, SphereMeasurement>;

void write_patg(const std::string& path, const VolumeGrid& v);
void write_patg(const std::string& path, const PlaneMeasurement& m);
void write_patg(const std::string& path, const SphereMeasurement& m);
PatgData read_patg(const std::string& path);

struct CompareMetrics {
    double rel_l2 = 0.0;   // ||b - a|| / ||a||
    double max_abs = 0.0;
    Vec3 centroid_shift = Vec3::Zero();  // centroid(b) - centroid(a)
};

CompareMetrics compare_volumes(const VolumeGrid& a, const VolumeGrid& b);

// Axis 0, 1 or 2 slice at the given index, written as CSV (x,y,value) or
// 16-bit binary PGM scaled min to max.
void write_slice_csv(const std::string& path, const VolumeGrid& v, int axis, int index);
void write_slice_pgm(const std::string& path, const VolumeGrid& v, int axis, int index);

struct ForwardConfig {
    std::string method = "oracle";  // oracle | kernel | series
    int series_J = 8;
    double noise_sigma = 0.0;       // relative to max |data|
    KernelOptions kernel;
};

struct RunConfig {
    std::string geometry = "sphere";
    AttenuationModel model;
    Phantom phantom;
    PlaneSpec plane;
    double sphere_radius = 2.0;
    int sphere_nodes = 2000;
    UniformGrid1D sphere_t{0.0, 9.0 / 256.0, 256};
    double epsilon = 0.0;
    GridSpec target;
    ForwardConfig forward;
    PlaneReconConfig plane_recon;
    SphereReconConfig sphere_recon;
    std::uint64_t seed = 1;

    SphereSpec sphere_spec() const;
};

// Parses and validates a run configuration; unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

}  // namespace pat

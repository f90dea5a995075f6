#include "attenopat/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace pat {

namespace {

[[noreturn]] void io_error(const std::string& msg) { throw Error(ErrorKind::IO, "IOError", msg); }

class Writer {
public:
    explicit Writer(const std::string& path) : f_(path, std::ios::binary)
    {
        if (!f_) io_error("cannot open " + path + " for writing");
    }
    template <class T>
    void put(T v)
    {
        // Host is little-endian (x86-64 / aarch64 Linux); bytes go out verbatim.
        f_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void put_axis(const UniformGrid1D& g)
    {
        put<double>(g.start);
        put<double>(g.step);
        put<std::uint64_t>(g.n);
    }
    void put_payload(const std::vector<double>& v)
    {
        for (double x : v)
            if (!std::isfinite(x)) config_error("NonFinite", "payload contains non-finite values");
        f_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    }
    void header(PatgKind kind, std::uint8_t ndims)
    {
        f_.write("PATG", 4);
        put<std::uint16_t>(1);
        put<std::uint8_t>(static_cast<std::uint8_t>(kind));
        put<std::uint8_t>(ndims);
    }
    void finish()
    {
        f_.flush();
        if (!f_) io_error("write failed");
    }

private:
    std::ofstream f_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : f_(path, std::ios::binary)
    {
        if (!f_) io_error("cannot open " + path);
    }
    template <class T>
    T get()
    {
        T v;
        f_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!f_) io_error("truncated PATG file");
        return v;
    }
    UniformGrid1D get_axis()
    {
        UniformGrid1D g;
        g.start = get<double>();
        g.step = get<double>();
        g.n = get<std::uint64_t>();
        return g;
    }
    std::vector<double> get_payload(std::size_t n)
    {
        std::vector<double> v(n);
        f_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
        if (!f_) io_error("truncated PATG payload");
        for (double x : v)
            if (!std::isfinite(x)) io_error("PATG payload contains non-finite values");
        f_.peek();
        if (!f_.eof()) io_error("trailing bytes after PATG payload");
        return v;
    }

private:
    std::ifstream f_;
};

}  // namespace

void write_patg(const std::string& path, const VolumeGrid& v)
{
    Writer w(path);
    w.header(PatgKind::Volume, 3);
    for (int a = 0; a < 3; ++a)
        w.put_axis({v.spec.origin[a], v.spec.spacing[a], static_cast<std::size_t>(v.spec.dims[a])});
    w.put_payload(v.values);
    w.finish();
}

void write_patg(const std::string& path, const PlaneMeasurement& m)
{
    Writer w(path);
    w.header(PatgKind::Plane, 3);
    w.put_axis(m.t);
    w.put_axis(m.xi1);
    w.put_axis(m.xi2);
    w.put_payload(m.values);
    w.finish();
}

void write_patg(const std::string& path, const SphereMeasurement& m)
{
    Writer w(path);
    w.header(PatgKind::Sphere, 1);
    w.put_axis(m.t);
    w.put<std::uint64_t>(m.nodes.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        for (int a = 0; a < 3; ++a) w.put<double>(m.nodes.x[i][a]);
        w.put<double>(m.nodes.w[i]);
    }
    w.put_payload(m.values);
    w.finish();
}

PatgData read_patg(const std::string& path)
{
    Reader r(path);
    char magic[4];
    for (char& c : magic) c = r.get<char>();
    if (std::memcmp(magic, "PATG", 4) != 0) io_error("bad PATG magic");
    if (r.get<std::uint16_t>() != 1) io_error("unsupported PATG version");
    const auto kind = r.get<std::uint8_t>();
    const auto ndims = r.get<std::uint8_t>();
    std::vector<UniformGrid1D> axes;
    for (int a = 0; a < ndims; ++a) axes.push_back(r.get_axis());
    auto count = [&] {
        std::size_t n = 1;
        for (const auto& g : axes) n *= g.n;
        return n;
    };
    if (kind == 1 && ndims == 3) {
        GridSpec s;
        for (int a = 0; a < 3; ++a) {
            s.origin[a] = axes[a].start;
            s.spacing[a] = axes[a].step;
            s.dims[a] = static_cast<int>(axes[a].n);
        }
        VolumeGrid v(s);
        v.values = r.get_payload(count());
        return v;
    }
    if (kind == 2 && ndims == 3) {
        PlaneMeasurement m(PlaneSpec{axes[0], axes[1], axes[2], 0.0});
        m.values = r.get_payload(count());
        return m;
    }
    if (kind == 3 && ndims == 1) {
        SphereSpec s;
        s.t = axes[0];
        const auto n = r.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < n; ++i) {
            Vec3 x;
            for (int a = 0; a < 3; ++a) x[a] = r.get<double>();
            s.nodes.x.push_back(x);
            s.nodes.w.push_back(r.get<double>());
        }
        s.radius = n > 0 ? s.nodes.x[0].norm() : 1.0;
        SphereMeasurement m(s);
        m.values = r.get_payload(count() * n);
        return m;
    }
    io_error("unknown PATG kind/ndims combination");
}

CompareMetrics compare_volumes(const VolumeGrid& a, const VolumeGrid& b)
{
    if (a.spec.dims != b.spec.dims || (a.spec.origin - b.spec.origin).norm() > 1e-12 ||
        (a.spec.spacing - b.spec.spacing).norm() > 1e-12)
        config_error("GridMismatch", "volumes are on different grids");
    CompareMetrics m;
    const std::size_t n = a.values.size();
    std::vector<double> d(n), r(n);
    Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < a.spec.dims[0]; ++i)
        for (int j = 0; j < a.spec.dims[1]; ++j)
            for (int k = 0; k < a.spec.dims[2]; ++k) {
                const std::size_t q = a.spec.index(i, j, k);
                const double x = a.values[q], y = b.values[q];
                d[q] = (y - x) * (y - x);
                r[q] = x * x;
                m.max_abs = std::max(m.max_abs, std::abs(y - x));
                const Vec3 p = a.spec.point(i, j, k);
                ca += x * p;
                cb += y * p;
                ma += x;
                mb += y;
            }
    const double nr = pairwise_sum(r.data(), n), nd = pairwise_sum(d.data(), n);
    m.rel_l2 = nr > 0.0 ? std::sqrt(nd / nr) : std::sqrt(nd);
    if (ma != 0.0 && mb != 0.0) m.centroid_shift = cb / mb - ca / ma;
    return m;
}

namespace {

struct Slice {
    int nu = 0, nv = 0;
    std::vector<double> u, v, val;
};

Slice take_slice(const VolumeGrid& g, int axis, int index)
{
    if (axis < 0 || axis > 2) config_error("BadAxis", "slice axis must be 0, 1 or 2");
    if (index < 0 || index >= g.spec.dims[axis]) config_error("BadIndex", "slice index out of range");
    const int au = axis == 0 ? 1 : 0, av = axis == 2 ? 1 : 2;
    Slice s;
    s.nu = g.spec.dims[au];
    s.nv = g.spec.dims[av];
    for (int a = 0; a < s.nu; ++a)
        for (int b = 0; b < s.nv; ++b) {
            int ijk[3];
            ijk[axis] = index;
            ijk[au] = a;
            ijk[av] = b;
            s.u.push_back(g.spec.origin[au] + a * g.spec.spacing[au]);
            s.v.push_back(g.spec.origin[av] + b * g.spec.spacing[av]);
            s.val.push_back(g.at(ijk[0], ijk[1], ijk[2]));
        }
    return s;
}

}  // namespace

void write_slice_csv(const std::string& path, const VolumeGrid& v, int axis, int index)
{
    const Slice s = take_slice(v, axis, index);
    std::ofstream f(path);
    if (!f) io_error("cannot open " + path);
    f << "x,y,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.val.size(); ++i) f << s.u[i] << ',' << s.v[i] << ',' << s.val[i] << '\n';
    if (!f) io_error("write failed");
}

void write_slice_pgm(const std::string& path, const VolumeGrid& v, int axis, int index)
{
    const Slice s = take_slice(v, axis, index);
    const auto [lo, hi] = std::minmax_element(s.val.begin(), s.val.end());
    const double span = *hi - *lo;
    std::ofstream f(path, std::ios::binary);
    if (!f) io_error("cannot open " + path);
    // Rows run along the second in-plane axis.
    f << "P5\n" << s.nu << ' ' << s.nv << "\n65535\n";
    for (int b = 0; b < s.nv; ++b)
        for (int a = 0; a < s.nu; ++a) {
            const double x = s.val[static_cast<std::size_t>(a) * s.nv + b];
            const auto q = static_cast<std::uint16_t>(span > 0.0 ? std::lround((x - *lo) / span * 65535.0) : 0);
            const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                            static_cast<unsigned char>(q & 0xff)};
            f.write(reinterpret_cast<const char*>(bytes), 2);
        }
    if (!f) io_error("write failed");
}

// ---- configuration ----

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) config_error("BadConfig", where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) config_error("UnknownKey", where + "." + it.key());
}

template <class T>
T get_or(const json& j, const char* key, T def)
{
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error("BadConfig", std::string(key) + ": " + e.what());
    }
}

Vec3 vec3(const json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 3) config_error("BadConfig", what + " must be a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

GridSpec parse_grid(const json& j)
{
    check_keys(j, {"n", "half_width", "origin", "spacing"}, "target");
    GridSpec g;
    if (j.contains("half_width")) {
        const int n = get_or<int>(j, "n", 48);
        g = GridSpec::centered_cube(n, j.at("half_width").get<double>());
    } else {
        const json& n = j.at("n");
        if (!n.is_array() || n.size() != 3) config_error("BadConfig", "target.n must have 3 entries");
        g.dims = {n[0].get<int>(), n[1].get<int>(), n[2].get<int>()};
        g.origin = vec3(j.at("origin"), "target.origin");
        g.spacing = vec3(j.at("spacing"), "target.spacing");
    }
    g.validate();
    return g;
}

}  // namespace

SphereSpec RunConfig::sphere_spec() const
{
    SphereSpec s;
    s.radius = sphere_radius;
    s.nodes = fibonacci_sphere(sphere_nodes, sphere_radius);
    s.t = sphere_t;
    return s;
}

RunConfig parse_config(const nlohmann::json& j)
{
    check_keys(j, {"geometry", "model", "phantom", "plane", "sphere", "forward", "target",
                   "plane_recon", "sphere_recon", "seed"},
               "config");
    RunConfig c;
    try {
        c.geometry = get_or<std::string>(j, "geometry", "sphere");
        if (c.geometry != "plane" && c.geometry != "sphere")
            config_error("BadConfig", "geometry must be plane or sphere");
        c.seed = get_or<std::uint64_t>(j, "seed", 1);

        if (j.contains("model")) {
            const json& m = j["model"];
            check_keys(m, {"c", "kappa_inf", "kappa_star", "newton_tol", "newton_max_iter"}, "model");
            c.model.c = get_or(m, "c", 1.0);
            c.model.kappa_inf = get_or(m, "kappa_inf", 0.0);
            c.model.newton_tol = get_or(m, "newton_tol", 1e-12);
            c.model.newton_max_iter = get_or(m, "newton_max_iter", 100);
            if (m.contains("kappa_star")) {
                const json& k = m["kappa_star"];
                check_keys(k, {"family", "alpha", "beta", "gamma"}, "model.kappa_star");
                const auto fam = get_or<std::string>(k, "family", "zero");
                if (fam == "zero") {
                    c.model.kappa_star = KappaStar::zero();
                } else if (fam == "rational") {
                    c.model.kappa_star = KappaStar::rational(get_or(k, "alpha", 0.0), get_or(k, "beta", 1.0),
                                                             get_or(k, "gamma", 0.0));
                } else {
                    config_error("BadConfig", "unknown kappa_star family " + fam);
                }
            }
            c.model.validate();
        }

        if (j.contains("phantom")) {
            const json& p = j["phantom"];
            if (!p.is_array()) config_error("BadConfig", "phantom must be a list of blobs");
            for (const auto& b : p) {
                check_keys(b, {"center", "width", "amplitude"}, "phantom[]");
                Blob blob;
                blob.center = vec3(b.at("center"), "phantom.center");
                blob.width = b.at("width").get<double>();
                blob.amplitude = get_or(b, "amplitude", 1.0);
                c.phantom.blobs.push_back(blob);
            }
            c.phantom.validate();
        }

        if (j.contains("plane")) {
            const json& p = j["plane"];
            check_keys(p, {"t_end", "nt", "n_xi", "patch", "periodic"}, "plane");
            const double t_end = get_or(p, "t_end", 8.0), patch = get_or(p, "patch", 8.0);
            const auto nt = get_or<std::size_t>(p, "nt", 256), nx = get_or<std::size_t>(p, "n_xi", 128);
            c.plane.t = {0.0, t_end / static_cast<double>(nt), nt};
            const double dx = patch / static_cast<double>(nx);
            c.plane.xi1 = c.plane.xi2 = {-0.5 * patch, dx, nx};
            c.plane.period = get_or(p, "periodic", true) ? patch : 0.0;
        } else {
            c.plane.t = {0.0, 8.0 / 256.0, 256};
            c.plane.xi1 = c.plane.xi2 = {-4.0, 8.0 / 128.0, 128};
            c.plane.period = 8.0;
        }

        if (j.contains("sphere")) {
            const json& s = j["sphere"];
            check_keys(s, {"radius", "nodes", "nt", "t_end", "epsilon"}, "sphere");
            c.sphere_radius = get_or(s, "radius", 2.0);
            c.sphere_nodes = get_or(s, "nodes", 2000);
            const auto nt = get_or<std::size_t>(s, "nt", 256);
            const double t_end = get_or(s, "t_end", 2.0 * c.sphere_radius + 5.0);
            c.sphere_t = {0.0, t_end / static_cast<double>(nt), nt};
            c.epsilon = get_or(s, "epsilon", 0.0);
        }
        if (c.geometry == "sphere" && !c.phantom.blobs.empty() &&
            c.phantom.support_radius() >= c.sphere_radius - c.epsilon)
            config_error("SupportOutsideSphere", "phantom support must lie inside radius - epsilon");

        if (j.contains("forward")) {
            const json& f = j["forward"];
            check_keys(f, {"method", "series_J", "noise_sigma", "step_fraction", "time_pad", "self_check"},
                       "forward");
            c.forward.method = get_or<std::string>(f, "method", "oracle");
            if (c.forward.method != "oracle" && c.forward.method != "kernel" && c.forward.method != "series")
                config_error("BadConfig", "forward.method must be oracle, kernel or series");
            c.forward.series_J = get_or(f, "series_J", 8);
            c.forward.noise_sigma = get_or(f, "noise_sigma", 0.0);
            c.forward.kernel.step_fraction = get_or(f, "step_fraction", 0.25);
            c.forward.kernel.time_pad = get_or(f, "time_pad", 2);
            c.forward.kernel.self_check = get_or(f, "self_check", false);
        }

        if (j.contains("target")) {
            c.target = parse_grid(j["target"]);
        } else if (c.geometry == "sphere") {
            c.target = GridSpec::centered_cube(48, 1.0);
        } else {
            c.target.dims = {64, 64, 64};
            c.target.spacing = Vec3(8.0 / 64.0, 8.0 / 64.0, 3.0 / 64.0);
            c.target.origin = Vec3(-4.0, -4.0, 3.0 / 64.0);
        }

        c.plane_recon.target = c.target;
        if (j.contains("plane_recon")) {
            const json& p = j["plane_recon"];
            check_keys(p, {"freq_cutoff", "growth_budget", "damping", "z_window"}, "plane_recon");
            c.plane_recon.freq_cutoff = get_or(p, "freq_cutoff", 0.0);
            c.plane_recon.growth_budget = get_or(p, "growth_budget", 1e6);
            c.plane_recon.damping = get_or(p, "damping", 0.0);
            c.plane_recon.z_window = get_or(p, "z_window", 0.0);
        }

        c.sphere_recon.target = c.target;
        c.sphere_recon.seed = c.seed;
        if (j.contains("sphere_recon")) {
            const json& s = j["sphere_recon"];
            check_keys(s, {"series_J", "neumann_max_iter", "neumann_tol", "laplacian_order", "power_iterations"},
                       "sphere_recon");
            c.sphere_recon.series_J = get_or(s, "series_J", 8);
            c.sphere_recon.neumann_max_iter = get_or(s, "neumann_max_iter", 50);
            c.sphere_recon.neumann_tol = get_or(s, "neumann_tol", 1e-6);
            c.sphere_recon.laplacian_order = get_or(s, "laplacian_order", 2);
            c.sphere_recon.power_iterations = get_or(s, "power_iterations", 12);
        }
        c.sphere_recon.validate();
    } catch (const json::exception& e) {
        config_error("BadConfig", e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::IO, "IOError", "cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        config_error("BadConfig", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace pat

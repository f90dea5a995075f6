#include "attenopat/forward.hpp"
#include "attenopat/io.hpp"
#include "attenopat/recon_plane.hpp"
#include "attenopat/recon_sphere.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

using namespace pat;

namespace {

bool g_verbose = false;

void log(const std::string& msg)
{
    if (g_verbose) std::cerr << "[attenopat] " << msg << '\n';
}

class Timer {
public:
    explicit Timer(std::string what) : what_(std::move(what)), t0_(std::chrono::steady_clock::now()) {}
    ~Timer()
    {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        log(what_ + " took " + std::to_string(s) + " s");
    }

private:
    std::string what_;
    std::chrono::steady_clock::time_point t0_;
};

void require(const std::string& value, const char* flag)
{
    if (value.empty()) config_error("MissingFlag", std::string(flag) + " is required");
}

// Additive Gaussian noise with sigma relative to the peak magnitude.
void add_noise(std::vector<double>& v, double sigma, std::uint64_t seed)
{
    if (sigma <= 0.0) return;
    double peak = 0.0;
    for (double x : v) peak = std::max(peak, std::abs(x));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sigma * peak);
    for (double& x : v) x += nd(rng);
}

int cmd_phantom(const RunConfig& c, const std::string& out)
{
    require(out, "--out");
    Timer t("phantom");
    write_patg(out, rasterize(c.phantom, c.target));
    return 0;
}

int cmd_simulate(const RunConfig& c, const std::string& out)
{
    require(out, "--out");
    Timer t("simulate");
    const std::string& method = c.forward.method;
    if (c.geometry == "plane") {
        PlaneMeasurement q;
        if (method == "oracle") {
            if (!c.model.is_identity())
                config_error("OracleNeedsIdentity", "the oracle method has no attenuation; use kernel or series");
            q = simulate_q_unattenuated(c.phantom, c.plane);
        } else if (method == "kernel") {
            q = simulate_qa_kernel(c.phantom, c.model, c.plane, c.forward.kernel);
        } else {
            q = simulate_qa_series(c.phantom, c.model, c.plane, c.forward.series_J);
        }
        add_noise(q.values, c.forward.noise_sigma, c.seed);
        write_patg(out, q);
    } else {
        const SphereSpec s = c.sphere_spec();
        SphereMeasurement q;
        if (method == "oracle") {
            if (!c.model.is_identity())
                config_error("OracleNeedsIdentity", "the oracle method has no attenuation; use kernel or series");
            q = simulate_q_unattenuated(c.phantom, s);
        } else if (method == "kernel") {
            q = simulate_qa_kernel(c.phantom, c.model, s, c.forward.kernel);
        } else {
            q = simulate_qa_series(c.phantom, c.model, s, c.forward.series_J);
        }
        add_noise(q.values, c.forward.noise_sigma, c.seed);
        write_patg(out, q);
    }
    return 0;
}

int cmd_reconstruct(const RunConfig& c, const std::string& in, const std::string& out)
{
    require(in, "--in");
    require(out, "--out");
    Timer t("reconstruct");
    const PatgData d = read_patg(in);
    if (c.geometry == "plane") {
        if (!std::holds_alternative<PlaneMeasurement>(d))
            config_error("KindMismatch", in + " does not hold plane data");
        PlaneMeasurement q = std::get<PlaneMeasurement>(d);
        q.period = c.plane.period;
        PlaneReconReport rep;
        const VolumeGrid h = reconstruct_plane(q, c.model, c.plane_recon, &rep);
        std::printf("report geometry=plane samples=%zu zeroed_growth=%zu zeroed_noconv=%zu imag_ratio=%.3e\n",
                    rep.samples, rep.zeroed_growth, rep.zeroed_noconv, rep.imag_ratio);
        write_patg(out, h);
    } else {
        if (!std::holds_alternative<SphereMeasurement>(d))
            config_error("KindMismatch", in + " does not hold sphere data");
        const auto& q = std::get<SphereMeasurement>(d);
        SphereReconReport rep;
        const VolumeGrid h = reconstruct_sphere(q, c.model, c.sphere_recon, &rep);
        std::printf("report geometry=sphere norm_estimate=%.6e iterations=%d converged=%d richardson=%d\n",
                    rep.norm_estimate, rep.neumann.iterations, rep.neumann.converged ? 1 : 0,
                    rep.neumann.richardson ? 1 : 0);
        for (std::size_t k = 0; k < rep.neumann.residuals.size(); ++k)
            std::printf("residual iter=%zu value=%.6e\n", k + 1, rep.neumann.residuals[k]);
        write_patg(out, h);
    }
    return 0;
}

const VolumeGrid& as_volume(const PatgData& d, const std::string& path)
{
    if (!std::holds_alternative<VolumeGrid>(d)) config_error("KindMismatch", path + " does not hold a volume");
    return std::get<VolumeGrid>(d);
}

int cmd_compare(const std::vector<std::string>& files)
{
    if (files.size() != 2) config_error("MissingFlag", "compare needs two volume files");
    const PatgData a = read_patg(files[0]), b = read_patg(files[1]);
    const CompareMetrics m = compare_volumes(as_volume(a, files[0]), as_volume(b, files[1]));
    std::printf("rel_l2=%.17g\nmax_abs=%.17g\ncentroid_shift=%.17g,%.17g,%.17g\n", m.rel_l2, m.max_abs,
                m.centroid_shift[0], m.centroid_shift[1], m.centroid_shift[2]);
    return 0;
}

int cmd_slice(const std::string& in, const std::string& out, int axis, int index)
{
    require(in, "--in");
    require(out, "--out");
    const PatgData d = read_patg(in);
    const VolumeGrid& v = as_volume(d, in);
    if (axis < 0 || axis > 2) config_error("BadAxis", "--axis must be 0, 1 or 2");
    if (index < 0) index = v.spec.dims[axis] / 2;
    const std::string ext = std::filesystem::path(out).extension().string();
    if (ext == ".pgm")
        write_slice_pgm(out, v, axis, index);
    else
        write_slice_csv(out, v, axis, index);
    return 0;
}

// Reduced-scale property checks; each prints one line.
int cmd_selftest()
{
    struct Check {
        const char* name;
        std::function<double()> run;
        double limit;
    };
    Phantom p;
    p.blobs.push_back({Vec3(0.1, -0.05, 0.05), 0.25, 1.0});
    AttenuationModel att;
    att.kappa_inf = 0.1;
    att.kappa_star = KappaStar::rational(0.05, 1.0, 0.05);
    const SphereSpec small = make_sphere_spec(2.0, 200, 128, 9.0);

    const std::vector<Check> checks = {
        {"dispersion_relation",
         [&] {
             std::vector<double> om;
             for (int i = 0; i < 8; ++i) om.push_back(0.5 + i);
             Phantom q;
             q.blobs.push_back({Vec3(0.1, 0.0, 0.0), 0.3, 1.0});
             return verify_dispersion_relation(q, att, Vec3(3.0, 0.0, 0.0), om);
         },
         1e-6},
        {"kernel_vs_series",
         [&] {
             return relative_l2(simulate_qa_series(p, att, small, 8).values,
                                simulate_qa_kernel(p, att, small).values);
         },
         1e-3},
        {"identity_kernel_vs_oracle",
         [&] {
             return relative_l2(simulate_qa_kernel(p, AttenuationModel{}, small).values,
                                simulate_q_unattenuated(p, small).values);
         },
         1e-3},
        {"sphere_fbp_round_trip",
         [&] {
             const SphereSpec s = make_sphere_spec(2.0, 1000, 256, 9.0);
             SphereReconConfig cfg;
             cfg.target = GridSpec::centered_cube(24, 1.0);
             AttenuationModel damp;
             damp.kappa_inf = 0.1;
             const VolumeGrid h = fbp_backproject(simulate_qa_series(p, damp, s, 1), damp, cfg);
             return relative_l2(h.values, rasterize(p, cfg.target).values);
         },
         0.05},
        {"neumann_contraction",
         [&] {
             SphereReconConfig cfg;
             cfg.target = GridSpec::centered_cube(10, 0.6);
             return assemble_T(att, small, cfg).norm_estimate();
         },
         1.0},
        {"patg_round_trip",
         [&] {
             const VolumeGrid v = rasterize(p, GridSpec::centered_cube(12, 1.0));
             const auto path = (std::filesystem::temp_directory_path() / "attenopat_selftest.patg").string();
             write_patg(path, v);
             const VolumeGrid r = std::get<VolumeGrid>(read_patg(path));
             std::filesystem::remove(path);
             return r.values == v.values ? 0.0 : 1.0;
         },
         0.0},
    };
    bool ok = true;
    for (const auto& c : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        double v;
        try {
            v = c.run();
        } catch (const Error& e) {
            std::printf("FAIL %s error=%s\n", c.name, e.what());
            ok = false;
            continue;
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = v <= c.limit;
        ok = ok && pass;
        std::printf("%s %s value=%.3e limit=%.1e time=%.1fs\n", pass ? "PASS" : "FAIL", c.name, v, c.limit, s);
        std::fflush(stdout);
    }
    if (!ok) numerical_error("SelftestFailed", "one or more self-test checks failed");
    return 0;
}

int default_threads()
{
    if (const char* env = std::getenv("ATTENOPAT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

int exit_code(ErrorKind k)
{
    switch (k) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Numerical: return 3;
        case ErrorKind::IO: return 4;
    }
    return 1;
}

const char* kind_name(ErrorKind k)
{
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::IO: return "io";
    }
    return "unknown";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Attenuated photoacoustic forward simulation and reconstruction"};
    app.require_subcommand(1);
    std::string config, out, in;
    int threads = default_threads();
    app.add_option("--threads", threads, "worker threads (default: ATTENOPAT_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose", g_verbose, "timings and progress on stderr");

    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config, "JSON run configuration")->required(); };
    auto* phantom = app.add_subcommand("phantom", "rasterize the phantom on the target grid");
    add_config(phantom);
    phantom->add_option("--out", out, "output volume (PATG)");
    auto* simulate = app.add_subcommand("simulate", "forward data for the configured geometry");
    add_config(simulate);
    simulate->add_option("--out", out, "output measurement (PATG)");
    auto* reconstruct = app.add_subcommand("reconstruct", "invert measured data");
    add_config(reconstruct);
    reconstruct->add_option("--in", in, "input measurement (PATG)");
    reconstruct->add_option("--out", out, "output volume (PATG)");
    std::vector<std::string> pair;
    auto* compare = app.add_subcommand("compare", "metrics between a reference and a test volume");
    compare->add_option("files", pair, "reference.patg test.patg")->expected(2);
    app.add_subcommand("selftest", "reduced-scale property checks");
    int axis = 2, index = -1;
    auto* slice = app.add_subcommand("slice", "extract a plane as CSV or PGM (by --out extension)");
    slice->add_option("--in", in, "input volume (PATG)");
    slice->add_option("--out", out, "output .csv or .pgm");
    slice->add_option("--axis", axis, "normal axis 0, 1 or 2");
    slice->add_option("--index", index, "plane index (default: middle)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        set_threads(threads);
        log("threads=" + std::to_string(threads));
        if (*compare) return cmd_compare(pair);
        if (app.got_subcommand("selftest")) return cmd_selftest();
        if (*slice) return cmd_slice(in, out, axis, index);
        const RunConfig c = load_config(config);
        log("geometry=" + c.geometry + " model kappa_inf=" + std::to_string(c.model.kappa_inf) +
            " kappa_star=" + c.model.kappa_star.name());
        if (*phantom) return cmd_phantom(c, out);
        if (*simulate) return cmd_simulate(c, out);
        return cmd_reconstruct(c, in, out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error kind=%s code=%s message=\"%s\"\n", kind_name(e.kind()), e.code().c_str(),
                     e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error kind=internal message=\"%s\"\n", e.what());
        return 1;
    }
}

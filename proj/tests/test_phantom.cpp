#include "doctest.h"

#include "attenopat/phantom.hpp"
#include "attenopat/transforms.hpp"

#include <cmath>
#include <random>

using namespace pat;

namespace {

double sphere_quadrature_mean(const Phantom& p, double t, const Vec3& xi, int n_theta)
{
    const SphereNodes s = product_sphere_rule(n_theta, 2 * n_theta, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += s.w[i] * eval(p, xi + t * s.x[i]);
    return t * acc / (4.0 * kPi);
}

}  // namespace

TEST_CASE("eval examples")
{
    Phantom p;
    p.blobs.push_back({Vec3(0.3, -0.2, 1.0), 0.4, 2.5});
    CHECK(eval(p, Vec3(0.3, -0.2, 1.0)) == 2.5);
    CHECK(eval(p, Vec3(0.3, 0.2, 1.0)) == doctest::Approx(2.5 * std::exp(-0.5)).epsilon(1e-15));
    Phantom two;
    two.blobs.push_back({Vec3(-1.0, 0.0, 0.0), 0.5, 1.0});
    two.blobs.push_back({Vec3(1.0, 0.0, 0.0), 0.8, 2.0});
    const double expect = std::exp(-1.0 / (2.0 * 0.25)) + 2.0 * std::exp(-1.0 / (2.0 * 0.64));
    CHECK(eval(two, Vec3::Zero()) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("spherical mean of a centered blob")
{
    Phantom p;
    p.blobs.push_back({Vec3::Zero(), 0.5, 1.5});
    for (double t : {0.1, 0.5, 1.3})
        CHECK(spherical_mean_oracle(p, t, Vec3::Zero()) ==
              doctest::Approx(t * 1.5 * std::exp(-t * t / 0.5)).epsilon(1e-14));
}

TEST_CASE("spherical mean approaches t h(xi) as t -> 0")
{
    Phantom p;
    p.blobs.push_back({Vec3(0.4, 0.1, -0.3), 0.5, 1.0});
    const Vec3 xi(0.1, 0.2, 0.0);
    CHECK(spherical_mean_oracle(p, 1e-6, xi) / 1e-6 == doctest::Approx(eval(p, xi)).epsilon(1e-6));
    CHECK_THROWS_AS(spherical_mean_oracle(p, 0.0, xi), Error);
}

TEST_CASE("spherical mean matches sphere quadrature at (t, d, s) = (1, 2, 0.5)")
{
    Phantom p;
    p.blobs.push_back({Vec3(2.0, 0.0, 0.0), 0.5, 1.0});
    const double exact = spherical_mean_oracle(p, 1.0, Vec3::Zero());
    CHECK(std::abs(sphere_quadrature_mean(p, 1.0, Vec3::Zero(), 60) - exact) < 1e-10);
}

TEST_CASE("spherical mean matches quadrature for random draws")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.3, 0.8), tt(0.2, 2.5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Phantom p;
        p.blobs.push_back({Vec3(u(rng), u(rng), u(rng)), w(rng), 1.0 + u(rng) * 0.5});
        const Vec3 xi(u(rng), u(rng), u(rng));
        const double t = tt(rng);
        const double exact = spherical_mean_oracle(p, t, xi);
        const double quad = sphere_quadrature_mean(p, t, xi, 48);
        worst = std::max(worst, std::abs(quad - exact) / std::max(std::abs(exact), 1e-3 * t));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("rasterize")
{
    Phantom none;
    const VolumeGrid z = rasterize(none, GridSpec::centered_cube(6, 1.0));
    for (double v : z.values) CHECK(v == 0.0);

    Phantom p;
    p.blobs.push_back({Vec3(0.2, 0.3, 0.4), 0.3, 1.7});
    GridSpec one;
    one.origin = Vec3(0.2, 0.3, 0.4);
    CHECK(rasterize(p, one).values[0] == 1.7);

    // ||a e^{-r^2/2s^2}||_2 = a (s sqrt(pi))^{3/2}.
    Phantom c;
    c.blobs.push_back({Vec3::Zero(), 0.4, 2.0});
    const VolumeGrid g = rasterize(c, GridSpec::centered_cube(49, 2.4));
    CHECK(l2_norm(g) == doctest::Approx(2.0 * std::pow(0.4 * std::sqrt(kPi), 1.5)).epsilon(1e-2));
}

TEST_CASE("positivity and support")
{
    Phantom p;
    p.blobs.push_back({Vec3(0.5, 0.0, 0.0), 0.2, 1.0});
    p.blobs.push_back({Vec3(-0.5, 0.3, 0.0), 0.3, 0.5});
    CHECK(p.support_radius() == doctest::Approx(std::hypot(0.5, 0.3) + 1.8));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const Vec3 d = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        CHECK(eval(p, 0.5 * d) > 0.0);
        CHECK(eval(p, (p.support_radius() + 0.01) * d) < 1e-7);
    }
}

TEST_CASE("grid helpers")
{
    const GridSpec g = GridSpec::centered_cube(5, 1.0);
    CHECK(g.point(0, 0, 0).isApprox(Vec3(-1.0, -1.0, -1.0)));
    CHECK(g.point(4, 4, 4).isApprox(Vec3(1.0, 1.0, 1.0)));
    CHECK(g.index(1, 2, 3) == static_cast<std::size_t>((1 * 5 + 2) * 5 + 3));
    const GridSpec big = g.inflated(2);
    CHECK(big.dims[0] == 9);
    CHECK(big.point(2, 2, 2).isApprox(g.point(0, 0, 0)));
    Phantom bad;
    bad.blobs.push_back({Vec3::Zero(), -1.0, 1.0});
    CHECK_THROWS_AS(bad.validate(), Error);
}

#include "doctest.h"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "maglorentz/experiments.hpp"
#include "maglorentz/kinetic.hpp"

using namespace mlg;
using cd = std::complex<double>;

namespace {

ScalingRegime soft(double eps = 1e-2) {
    ScalingRegime r;
    r.kind = RegimeKind::Intermediate;
    r.mu = 1.0;
    r.eps = eps;
    r.alpha = 0.1;
    return r;
}

ScalingRegime hard(double mu = 1.0) {
    ScalingRegime r;
    r.kind = RegimeKind::BoltzmannGrad;
    r.mu = mu;
    r.eps = 1e-2;
    return r;
}

double max_diff(const AngularField &a, const AngularField &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

std::vector<CollisionKernel> kernels(int n, const FieldParams &f) {
    return {landau_kernel(0.7, n), hard_disk_kernel(0.5, n), boltzmann_kernel(soft(), f, n, 1025),
            boltzmann_kernel(hard(), f, n, 1025), uncut_kernel(3.0, 1.0, 0.05, n, 1025), gbe_kernel(0.4, f, n)};
}

}  // namespace

TEST_CASE("mode indexing") {
    CHECK(mode_of_index(0, 8) == 0);
    CHECK(mode_of_index(4, 8) == 4);
    CHECK(mode_of_index(5, 8) == -3);
    CHECK(mode_of_index(7, 8) == -1);
}

TEST_CASE("multipliers conserve mass and dissipate") {
    FieldParams f{1.0, 1};
    for (auto &K : kernels(32, f)) {
        CAPTURE(K.id);
        CHECK(std::abs(K.lambda[0]) < 1e-13);
        for (auto l : K.lambda) CHECK(l.real() <= 1e-13);
    }
}

TEST_CASE("Landau multipliers") {
    auto K = landau_kernel(0.3, 16);
    for (int j = 0; j < 16; ++j) {
        int m = mode_of_index(j, 16);
        CHECK(K.lambda[j].real() == doctest::Approx(-0.3 * m * m));
    }
    auto g = AngularField::homogeneous_field(16, [](double p) { return 2.0 + std::cos(3 * p); });
    auto h = collide_step(g, K, 0.25);
    for (int j = 0; j < 16; ++j)
        CHECK(h.values[j] == doctest::Approx(2.0 + std::exp(-0.3 * 9 * 0.25) * std::cos(3 * g.phi(j))).epsilon(1e-13));
}

TEST_CASE("hard disk multipliers against a dense matrix") {
    const int n = 64;
    auto K = boltzmann_kernel(hard(), FieldParams{0.0, 1}, n);
    // dense operator (A f)_j = mu int d rho [f~(phi_j + theta) - f_j] with f~ the trigonometric interpolant
    auto dirichlet = [&](double x) {
        double s = 1.0 + std::cos(n / 2 * x);
        for (int m = 1; m < n / 2; ++m) s += 2.0 * std::cos(m * x);
        return s / n;
    };
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    using GL = boost::math::quadrature::gauss<double, 30>;
    const int pieces = 64;
    for (int j = 0; j < n; ++j) {
        double pj = two_pi * j / n;
        for (int p = 0; p < pieces; ++p) {
            double a = -pi / 2 + pi * p / pieces, b = a + pi / pieces;
            // rho = sin u removes the endpoint singularity of theta(rho)
            for (int k = 0; k < n; ++k) {
                double pk = two_pi * k / n;
                A[j][k] += GL::integrate(
                    [&](double u) {
                        double th = pi - 2.0 * u;
                        return dirichlet(pj + th - pk) * std::cos(u);
                    },
                    a, b);
            }
        }
        A[j][j] -= 2.0;
    }
    double mu = 1.0;
    for (int m : {1, 2, 5}) {
        cd acc = 0.0;
        for (int k = 0; k < n; ++k) acc += A[0][k] * std::exp(cd(0, m * two_pi * k / n));
        CHECK(K.lambda[m].real() == doctest::Approx(mu * acc.real()).epsilon(1e-10));
        CHECK(std::abs(K.lambda[m].imag()) < 1e-10);
        CHECK(K.lambda[m].real() == doctest::Approx(mu * (-2.0 / (4.0 * m * m - 1) - 2.0)).epsilon(1e-10));
        auto H = hard_disk_kernel(mu, n);
        CHECK(H.lambda[m].real() == doctest::Approx(K.lambda[m].real()).epsilon(1e-10));
    }
}

TEST_CASE("uniform state is an equilibrium") {
    FieldParams f{1.0, 1};
    auto u = AngularField::homogeneous_field(32, [](double) { return 1.0 / two_pi; });
    for (auto &K : kernels(32, f)) {
        CAPTURE(K.id);
        double T = K.kind == KernelKind::HardDiskGBE ? 2.5 * f.T_L() : 2.0;
        double dt = K.kind == KernelKind::HardDiskGBE ? f.T_L() / 32 : 1.0 / 16;
        auto r = solve(u, K, f, std::round(T / dt) * dt, dt);
        CHECK(max_diff(r.final_field, u) < 1e-10);
    }
}

TEST_CASE("mass is conserved by every solver") {
    FieldParams f{1.0, 1};
    auto f0 = AngularField::homogeneous_field(32, [](double p) { return von_mises(p, 3.0); });
    for (auto &K : kernels(32, f)) {
        CAPTURE(K.id);
        double dt = f.T_L() / 32;
        auto r = solve(f0, K, f, 80 * dt, dt);
        CHECK(r.max_mass_drift <= 1e-12);
        CHECK(std::abs(r.final_field.mass() - f0.mass()) <= 1e-12 * f0.mass());
    }
}

TEST_CASE("full rotation leaves a homogeneous field unchanged") {
    FieldParams f{2.0, 1};
    auto f0 = AngularField::homogeneous_field(64, [](double p) { return von_mises(p, 1.5); });
    auto r = solve(f0, CollisionKernel{}, f, f.T_L(), f.T_L());
    CHECK(max_diff(r.final_field, f0) < 1e-12);
}

TEST_CASE("single mode Landau solution") {
    FieldParams f{1.0, 1};
    auto f0 = AngularField::homogeneous_field(128, [](double p) { return 1.0 + std::cos(p); });
    double T = 3 * f.T_L(), xi = 0.2;
    auto r = solve(f0, landau_kernel(xi, 128), f, T, T / 96);
    double e = 0.0;
    for (int j = 0; j < 128; ++j)
        e = std::max(e, std::abs(r.final_field.values[j] - 1.0 - std::exp(-xi * T) * std::cos(f0.phi(j) - T)));
    CHECK(e < 1e-10);
}

TEST_CASE("x-independent gridded field matches the homogeneous solver") {
    FieldParams f{1.0, 1};
    SpatialGrid g{8, 4, 0.0, 0.0, 0.25, 0.5, Boundary::Periodic};
    auto vm = [](double p) { return von_mises(p, 2.0); };
    auto h0 = AngularField::homogeneous_field(32, vm);
    auto g0 = AngularField::gridded_field(g, 32, [&](double, double, double p) { return vm(p); });
    auto K = boltzmann_kernel(soft(), f, 32, 1025);
    double dt = f.T_L() / 64;
    for (auto interp : {SpatialInterp::Bilinear, SpatialInterp::Spectral}) {
        SolveOptions opt;
        opt.transport.interp = interp;
        auto h = solve(h0, K, f, 40 * dt, dt, opt).final_field;
        auto gr = solve(g0, K, f, 40 * dt, dt, opt).final_field;
        double m = 0.0;
        for (int c = 0; c < gr.cells(); ++c)
            for (int j = 0; j < 32; ++j) m = std::max(m, std::abs(gr.cell(c)[j] - h.values[j]));
        CHECK(m < 1e-10);
    }
}

TEST_CASE("straight line transport") {
    SpatialGrid g{32, 32, 0.0, 0.0, 1.0 / 32, 1.0 / 32, Boundary::Periodic};
    auto init = [](double x, double y, double p) {
        return 2.0 + std::sin(two_pi * x) * std::cos(two_pi * y) + 0.3 * std::cos(p);
    };
    auto f0 = AngularField::gridded_field(g, 16, init);
    double t = 0.37;
    TransportOptions opt{SpatialInterp::Spectral};
    auto a = transport_step(f0, t, FieldParams{0.0, 1}, opt);
    double m = 0.0;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            Vec2 c = g.center(ix, iy);
            for (int j = 0; j < 16; ++j) {
                double p = f0.phi(j);
                double ref = init(c.x - t * std::cos(p), c.y - t * std::sin(p), p);
                m = std::max(m, std::abs(a.cell(iy * g.nx + ix)[j] - ref));
            }
        }
    CHECK(m < 1e-10);

    // weak field: second-order close to the straight line
    double dt = 0.01;
    auto b = transport_step(f0, dt, FieldParams{1e-3, 1}, opt);
    auto s = transport_step(f0, dt, FieldParams{0.0, 1}, opt);
    CHECK(max_diff(b, s) < 1e-3 * dt * 10);
}

TEST_CASE("splitting converges at second order") {
    FieldParams f{1.0, 1};
    SpatialGrid g{16, 16, 0.0, 0.0, 1.0 / 16, 1.0 / 16, Boundary::Periodic};
    auto f0 = AngularField::gridded_field(g, 16, [](double x, double y, double p) {
        return 2.0 + std::sin(two_pi * x) * std::cos(two_pi * y) * (1.0 + std::cos(p));
    });
    auto K = landau_kernel(0.5, 16);
    SolveOptions opt;
    opt.transport.interp = SpatialInterp::Spectral;
    double T = 0.5, dt = f.T_L() / 64;
    T = std::round(T / dt) * dt;
    auto run = [&](double h) { return solve(f0, K, f, T, h, opt).final_field; };
    auto a = run(dt), b = run(dt / 2), ref = run(dt / 4);
    double ratio = max_diff(a, ref) / max_diff(b, ref);
    // e(dt) / e(dt/2) against a dt/4 reference: (1 - 1/16) / (1/4 - 1/16) = 5 for a second order scheme
    CHECK(ratio == doctest::Approx(5.0).epsilon(0.2));
}

TEST_CASE("GBE n-integral closed form against brute force quadrature") {
    const int n = 32;
    std::vector<double> g(n);
    for (int j = 0; j < n; ++j) g[j] = von_mises(two_pi * j / n, 1.3) + 0.2 * std::sin(3 * two_pi * j / n);
    for (double fixed : {std::nan(""), 0.7}) {
        for (int k = 0; k <= 3; ++k) {
            auto mult = gbe_lag_multipliers(k, n, fixed);
            auto brute = gbe_lag_apply_bruteforce(k, g, 4096, fixed);
            // apply the closed form through the DFT
            std::vector<cd> G(n, 0.0);
            for (int m = 0; m < n; ++m)
                for (int j = 0; j < n; ++j) G[m] += g[j] * std::exp(cd(0, -two_pi * m * j / n));
            for (int j = 0; j < n; ++j) {
                cd v = 0.0;
                for (int m = 0; m < n; ++m) v += mult[m] * G[m] * std::exp(cd(0, two_pi * m * j / n));
                CHECK(v.real() / n == doctest::Approx(brute[j]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("GBE reduces to the Markov solve before one period") {
    FieldParams f{1.0, 1};
    double dt = f.T_L() / 64;
    auto f0 = AngularField::homogeneous_field(64, [](double p) { return von_mises(p, 2.0); });
    auto g = solve(f0, gbe_kernel(0.6, f, 64), f, 60 * dt, dt).final_field;
    auto m = solve(f0, hard_disk_kernel(0.6, 64), f, 60 * dt, dt).final_field;
    CHECK(max_diff(g, m) < 1e-10);
    // dense gas: memory is damped by e^{-nu T_L}
    double mu = 20.0 / (2.0 * f.T_L());
    auto g2 = solve(f0, gbe_kernel(mu, f, 64), f, 128 * dt, dt).final_field;
    auto m2 = solve(f0, hard_disk_kernel(mu, 64), f, 128 * dt, dt).final_field;
    CHECK(max_diff(g2, m2) <= 1e-8 * std::max(1.0, m2.min_value()));
}

TEST_CASE("GBE f^G modes") {
    CHECK(parse_fg_mode("active") == FgMode::Active);
    CHECK(std::string(fg_mode_name(FgMode::MemoryReads)) == "memory_reads");
    CHECK_THROWS(parse_fg_mode("sometimes"));
    FieldParams f{2.0, 1};
    double dt = f.T_L() / 32;
    auto f0 = AngularField::homogeneous_field(32, [](double p) { return von_mises(p, 2.0); });
    for (auto fg : {FgMode::MemoryReads, FgMode::Literal, FgMode::Off, FgMode::Active}) {
        GbeOptions o;
        o.fg = fg;
        auto r = solve(f0, gbe_kernel(0.25, f, 32, o), f, 96 * dt, dt);
        CHECK(r.max_mass_drift <= 1e-12);
    }
}

TEST_CASE("DSMC without collisions is a rotation") {
    FieldParams f{1.0, 1};
    auto sampler = [](Stream &rng) { return PhaseState{{0, 0}, unit_from_angle(rng.uniform(-0.1, 0.1))}; };
    auto r = dsmc_sample(sampler, CollisionKernel{}, f, 1.0, 20000, 3, 32, 1);
    CHECK(r.jumps == 0);
    CHECK(std::arg(r.mode1) == doctest::Approx(-1.0).epsilon(1e-2));
}

TEST_CASE("DSMC hard disks without field match the exact mode decay") {
    int n = 32;
    auto K = boltzmann_kernel(hard(0.5), FieldParams{0.0, 1}, n);
    double kap = 1.0;
    auto sampler = [&](Stream &rng) {
        for (;;) {
            double p = rng.uniform(-pi, pi);
            if (rng.uniform() * std::exp(kap) < std::exp(kap * std::cos(p))) return PhaseState{{0, 0}, unit_from_angle(p)};
        }
    };
    auto r = dsmc_sample(sampler, K, FieldParams{0.0, 1}, 1.0, 200000, 8, n, 1);
    double c1 = std::cyl_bessel_i(1.0, kap) / std::cyl_bessel_i(0.0, kap);
    double c2 = std::cyl_bessel_i(2.0, kap) / std::cyl_bessel_i(0.0, kap);
    CHECK(std::abs(r.mode1.real() - c1 * std::exp(K.lambda[1].real())) <= 3 * r.mode1_re_se);
    CHECK(std::abs(r.mode2.real() - c2 * std::exp(K.lambda[2].real())) <= 3 * r.mode2_re_se);
}

TEST_CASE("DSMC is independent of the worker count") {
    auto K = hard_disk_kernel(1.0, 16);
    auto sampler = [](Stream &rng) { return PhaseState{{0, 0}, unit_from_angle(rng.uniform(0, two_pi))}; };
    auto a = dsmc_sample(sampler, boltzmann_kernel(hard(), FieldParams{1.0, 1}, 16, 513), FieldParams{1.0, 1}, 1.0,
                         30000, 5, 16, 1);
    auto b = dsmc_sample(sampler, boltzmann_kernel(hard(), FieldParams{1.0, 1}, 16, 513), FieldParams{1.0, 1}, 1.0,
                         30000, 5, 16, 3);
    CHECK(a.histogram.values == b.histogram.values);
    CHECK(a.mode1 == b.mode1);
    (void)K;
}

TEST_CASE("uncut kernel observables do not depend on the cutoff") {
    FieldParams f{1.0, 1};
    auto sampler = [](Stream &rng) {
        for (;;) {
            double p = rng.uniform(-pi, pi);
            if (rng.uniform() * std::exp(1.0) < std::exp(std::cos(p))) return PhaseState{{0, 0}, unit_from_angle(p)};
        }
    };
    auto a = dsmc_sample(sampler, uncut_kernel(3.0, 0.2, 0.1, 32, 2049), f, 1.0, 200000, 1, 32);
    auto b = dsmc_sample(sampler, uncut_kernel(3.0, 0.2, 0.05, 32, 2049), f, 1.0, 200000, 2, 32);
    double se = std::hypot(a.mode1_re_se, b.mode1_re_se);
    CHECK(std::abs(a.mode1.real() - b.mode1.real()) < 3 * se);
}

TEST_CASE("field checkpoints round trip") {
    SpatialGrid g{3, 2, -1.0, 0.5, 0.1, 0.2, Boundary::Absorbing};
    auto f = AngularField::gridded_field(g, 8, [](double x, double y, double p) { return std::exp(x - y) / 3.0 + p; });
    f.t = 1.0 / 3.0;
    auto path = (std::filesystem::temp_directory_path() / "maglorentz_field_rt.csv").string();
    write_field_csv(f, path, "landau(xi=0.1)");
    auto r = read_field_csv(path);
    CHECK_FALSE(r.homogeneous);
    CHECK(r.grid.nx == 3);
    CHECK(r.grid.ny == 2);
    CHECK(r.grid.x0 == -1.0);
    CHECK(r.grid.dy == 0.2);
    CHECK(r.grid.boundary == Boundary::Absorbing);
    CHECK(r.nphi == 8);
    CHECK(r.t == f.t);
    CHECK(r.values == f.values);
    std::filesystem::remove(path);

    auto h = AngularField::homogeneous_field(16, [](double p) { return von_mises(p, 0.4); });
    write_field_csv(h, path, "none");
    auto hr = read_field_csv(path);
    CHECK(hr.homogeneous);
    CHECK(hr.values == h.values);
    std::filesystem::remove(path);
}

TEST_CASE("step size guard for gridded transport") {
    SpatialGrid g{4, 4, 0, 0, 0.25, 0.25, Boundary::Periodic};
    auto f = AngularField::gridded_field(g, 8, [](double, double, double) { return 1.0; });
    FieldParams fp{1.0, 1};
    CHECK_THROWS(transport_step(f, fp.T_L() / 8, fp));
    CHECK_NOTHROW(transport_step(f, fp.T_L() / 16, fp));
}

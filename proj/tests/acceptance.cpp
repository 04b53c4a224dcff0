#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "maglorentz/config.hpp"
#include "maglorentz/experiments.hpp"
#include "maglorentz/kinetic.hpp"
#include "maglorentz/medium.hpp"
#include "maglorentz/microsim.hpp"
#include "maglorentz/scattering.hpp"

using namespace mlg;
namespace fs = std::filesystem;

namespace {

unsigned g_workers = 1;
std::string g_scratch;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char *f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

Outcome c1() {
    auto t0 = std::chrono::steady_clock::now();
    auto table = cross_section(PotentialSpec::hard_disk(1e-2), FieldParams{0.0, 1}, 1024);
    double err = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        double exact = wrap_angle(pi - 2.0 * std::asin(table.rho[i]));
        err = std::max(err, std::abs(wrap_angle(table.theta[i] - exact)));
    }
    double gerr = 0.0;
    for (double th : linspace(0.05, pi - 0.05, 200)) gerr = std::max(gerr, std::abs(table.gamma(th) - 0.5 * std::sin(th / 2)));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {err <= 1e-12 && gerr <= 1e-8 && secs < 1.0,
            fmt("theta err %.3g, Gamma err %.3g, %.3f s", err, gerr, secs)};
}

Outcome c2() {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::vector<PotentialSpec> pots{PotentialSpec::hard_disk(1e-2), PotentialSpec::smooth(1e-2, 0.1),
                                    PotentialSpec::truncated(1e-2, 3, 0.9)};
    for (const auto &pot : pots) {
        for (double B : {0.0, 1.0}) {
            FieldParams F{B, 1};
            double R = pot.unit_radius(), e = pot.eps;
            for (double rho : linspace(-0.97, 0.97, 32)) {
                PhaseState s{{-e * std::sqrt(R * R - rho * rho), -e * rho}, {1, 0}};
                Obstacle o{{0, 0}, pot.radius(), 1};
                auto [out, t] = integrate_in_potential(s, o, pot, F);
                double ode = -wrap_angle(angle_of(out.v) - angle_of(s.v));
                double quad = pot.is_hard() && B == 0.0 ? hard_disk_angle(rho) : angle_with_field(rho, pot, F);
                worst = std::max(worst, std::abs(wrap_angle(ode - quad)));
            }
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-6 && secs < 60.0, fmt("max |quad - ode| %.3g over 192 angles, %.2f s", worst, secs)};
}

Outcome c3() {
    std::vector<double> eps{1e-2, 1e-3, 1e-4}, d;
    for (double e : eps) {
        auto pot = PotentialSpec::smooth(e, 0.01);
        double m = 0.0;
        for (double rho : linspace(-0.99, 0.99, 100))
            m = std::max(m, std::abs(wrap_angle(angle_with_field(rho, pot, FieldParams{1.0, 1}) - angle_no_field(rho, pot))));
        d.push_back(m);
    }
    double slope = fit_loglog(eps, d).slope;
    return {std::abs(slope - 1.0) <= 0.05, fmt("slope %.4f (gaps %.3g %.3g %.3g)", slope, d[0], d[1], d[2])};
}

Outcome c4() {
    std::vector<double> sups;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        auto table = cross_section(PotentialSpec::truncated(e, 3, 0.9), FieldParams{1.0, 1});
        double m = 0.0;
        for (int i = 0; i <= 120; ++i) {
            double th = 1e-3 * std::pow(pi / 1e-3, i / 120.0);
            th = std::min(th, pi - 1e-9);
            m = std::max(m, table.gamma(th) * std::pow(th, 1.0 + 1.0 / 3.0));
        }
        sups.push_back(m);
    }
    double lo = *std::min_element(sups.begin(), sups.end()), hi = *std::max_element(sups.begin(), sups.end());
    bool finite = std::all_of(sups.begin(), sups.end(), [](double x) { return std::isfinite(x) && x > 0; });
    return {finite && hi <= 2.0 * lo, fmt("sup Gamma theta^(4/3): %.4g %.4g %.4g", sups[0], sups[1], sups[2])};
}

Outcome c5() {
    std::vector<double> es{1e-2, 1e-3, 1e-4}, ts;
    for (double e : es) ts.push_back(collision_time(0.5, PotentialSpec::smooth(e, 0.1), FieldParams{1.0, 1}));
    double a = fit_loglog(es, ts).slope;
    std::vector<double> et{1e-10, 1e-20, 1e-30}, tt;
    for (double e : et) tt.push_back(collision_time(0.5, PotentialSpec::truncated(e, 3, 0.9), FieldParams{1.0, 1}));
    double b = fit_loglog(et, tt).slope;
    return {std::abs(a - 1.0) <= 0.05 && std::abs(b - 0.9) <= 0.05, fmt("smooth slope %.4f, truncated slope %.4f", a, b)};
}

Outcome c6() {
    bool ok = true;
    std::string det;
    for (double alpha : {0.05, 0.1}) {
        std::vector<double> eps, m;
        for (double g : {1e-2, 1e-3, 1e-4}) {
            double e = std::pow(g, 1.0 / alpha);
            auto pot = PotentialSpec::smooth(e, alpha);
            double mx = 0.0;
            for (double rho : linspace(0.0, 0.999, 400)) mx = std::max(mx, std::abs(angle_no_field(rho, pot)));
            eps.push_back(e);
            m.push_back(mx);
        }
        double s = fit_loglog(eps, m).slope;
        ok = ok && std::abs(s - alpha) <= 0.02;
        det += fmt("alpha %.2f slope %.4f; ", alpha, s);
    }
    return {ok, det};
}

Outcome c7() {
    auto dc = landau_diffusion_coefficient(PotentialSpec::smooth(1e-4, 0.1), 1.0, {1e-4});
    double r = dc.limit_value[0] / dc.explicit_value;
    return {r >= 0.98 && r <= 1.02, fmt("xi_limit %.6g / xi_explicit %.6g = %.4f", dc.limit_value[0], dc.explicit_value, r)};
}

Outcome c8() {
    int n = 128;
    FieldParams F{1.0, 1};
    double xi = 0.3, T = 3 * F.T_L();
    auto K = landau_kernel(xi, n);
    auto f0 = AngularField::homogeneous_field(n, [](double p) { return 1.0 + std::cos(p); });
    auto res = solve(f0, K, F, T, T / 384);
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
        double p = f0.phi(j);
        err = std::max(err, std::abs(res.final_field.values[j] - (1.0 + std::exp(-xi * T) * std::cos(p - F.Omega() * T))));
    }
    return {err <= 1e-10, fmt("max error %.3g at t = 3 T_L", err)};
}

Outcome c9() {
    FieldParams F{1.0, 1};
    ScalingRegime hd;
    hd.kind = RegimeKind::BoltzmannGrad;
    hd.mu = 0.05;
    hd.eps = 1e-3;
    auto h = survival_probability_full_orbit(hd, F, 1000000, 9, g_workers);
    double target = std::exp(-two_pi * F.R_L() * hd.mu);
    bool hard_ok = std::abs(h.estimate - target) <= 3.0 * h.stderr_;
    std::string det = fmt("hard disk %.5f +- %.5f vs %.5f (annulus form %.5f); ", h.estimate, h.stderr_, target,
                          h.closed_form_annulus);
    bool smooth_ok = true;
    double prev = 2.0;
    for (double e : {0.1, 0.01, 0.001}) {
        ScalingRegime sm;
        sm.kind = RegimeKind::Intermediate;
        sm.mu = 0.1;
        sm.alpha = 0.1;
        sm.eps = e;
        auto s = survival_probability_full_orbit(sm, F, 20000, 11, g_workers);
        double env = std::exp(-two_pi * F.R_L() * sm.mu * std::pow(e, -2 * sm.alpha));
        smooth_ok = smooth_ok && s.estimate <= env + 3.0 * std::max(s.stderr_, 1.0 / 20000) && s.estimate < prev;
        prev = s.estimate;
        det += fmt("eps %g %.4g (env %.4g) ", e, s.estimate, env);
    }
    return {hard_ok && smooth_ok, det};
}

Outcome c10() {
    FieldParams F{0.5, 1};
    ScalingRegime sm;
    sm.kind = RegimeKind::Intermediate;
    sm.mu = 0.05;
    sm.alpha = 0.05;
    PathologyOptions po;
    po.require_decades = false;
    po.keep_seed_records = false;
    std::vector<double> eps{0.1, 0.03, 0.01};
    std::uint64_t n = 4000;
    auto tab = pathology_scan(sm, eps, 2 * F.T_L(), n, 21, F, g_workers, {}, po);
    auto decreasing = [&](auto get) {
        for (std::size_t i = 1; i < tab.rows.size(); ++i)
            if (!(get(tab.rows[i].counts) < get(tab.rows[i - 1].counts))) return false;
        auto a = wilson_interval(get(tab.rows.front().counts), n), b = wilson_interval(get(tab.rows.back().counts), n);
        return b.hi < a.lo;
    };
    bool circ = decreasing([](const PathologyCounts &c) { return c.circ; });
    bool rec = decreasing([](const PathologyCounts &c) { return c.rec; });
    std::string det = "smooth circ";
    for (auto &r : tab.rows) det += fmt(" %.4f", r.rate(r.counts.circ));
    det += " rec";
    for (auto &r : tab.rows) det += fmt(" %.4f", r.rate(r.counts.rec));

    ScalingRegime hd;
    hd.kind = RegimeKind::BoltzmannGrad;
    hd.mu = 0.05;
    auto htab = pathology_scan(hd, eps, 2 * F.T_L(), n, 23, F, g_workers, {}, po);
    // renewal limit of the circ probability: q(t) = int_0^L nu e^{-nu s} q(t - s) ds, q = 1 on [0, L)
    double L = F.T_L(), nu = 2 * hd.mu;
    int m = 4000;
    double h = L / m;
    std::vector<double> q(2 * m + 1, 1.0);
    for (int i = m; i <= 2 * m; ++i) {
        double acc = 0.0;
        for (int k = 0; k <= m; ++k) {
            double w = (k == 0 || k == m) ? 0.5 : 1.0;
            acc += w * nu * std::exp(-nu * k * h) * (i - k >= 0 ? q[i - k] : 1.0) * h;
        }
        q[i] = acc;
    }
    double limit = 1.0 - q[2 * m];
    bool hard_ok = true;
    det += fmt("; hard circ limit %.4f:", limit);
    for (auto &r : htab.rows) {
        double p = r.rate(r.counts.circ), se = std::sqrt(limit * (1 - limit) / n);
        hard_ok = hard_ok && std::abs(p - limit) <= 3.0 * se;
        det += fmt(" %.4f", p);
    }
    return {circ && rec && hard_ok, det};
}

Outcome c11() {
    double alpha = 0.1;
    std::vector<double> eps{1e-20, 1e-30, 1e-40}, gaps;
    FieldParams F0{0.0, 1};
    for (double e : eps) {
        ScalingRegime r;
        r.kind = RegimeKind::Intermediate;
        r.mu = 1.0;
        r.alpha = alpha;
        r.eps = e;
        auto K = boltzmann_kernel(r, F0, 32);
        double xi = -K.lambda[1].real();
        gaps.push_back(grazing_operator_gap(K, xi, [](double p) { return std::exp(std::cos(p)); }));
    }
    auto fit = fit_loglog(eps, gaps);
    return {std::abs(fit.slope - 2 * alpha) <= 0.05,
            fmt("slope %.4f (gaps %.3g %.3g %.3g)", fit.slope, gaps[0], gaps[1], gaps[2])};
}

Outcome c12() {
    FieldParams F{1.0, 1};
    ScalingRegime R;
    R.kind = RegimeKind::Intermediate;
    R.mu = 1;
    R.eps = 1e-2;
    R.alpha = 0.1;
    int n = 64;
    auto K = boltzmann_kernel(R, F, n);
    double kap = 1.0;
    auto f0 = AngularField::homogeneous_field(n, [&](double p) { return von_mises(p, kap); });
    auto det = solve(f0, K, F, 1.0, 1.0 / 64).final_field;
    auto sampler = [&](Stream &rng) {
        for (;;) {
            double p = rng.uniform(-pi, pi);
            if (rng.uniform() * std::exp(kap) < std::exp(kap * std::cos(p))) return PhaseState{{0, 0}, unit_from_angle(p)};
        }
    };
    auto mc = dsmc_sample(sampler, K, F, 1.0, 1000000, 42, n, g_workers);
    auto m1 = det.mode(1), m2 = det.mode(2);
    auto within = [](double a, double b, double se) { return std::abs(a - b) <= 3.0 * se; };
    bool ok = within(m1.real(), mc.mode1.real(), mc.mode1_re_se) && within(m1.imag(), mc.mode1.imag(), mc.mode1_im_se) &&
              within(m2.real(), mc.mode2.real(), mc.mode2_re_se) && within(m2.imag(), mc.mode2.imag(), mc.mode2_im_se);
    return {ok, fmt("solve m1 (%.5f, %.5f) m2 (%.5f, %.5f); dsmc m1 (%.5f, %.5f) m2 (%.5f, %.5f) se %.1e", m1.real(),
                    m1.imag(), m2.real(), m2.imag(), mc.mode1.real(), mc.mode1.imag(), mc.mode2.real(),
                    mc.mode2.imag(), mc.mode1_re_se)};
}

Outcome c13() {
    FieldParams F{1.0, 1};
    int n = 64;
    double TL = F.T_L(), dt = TL / 64;
    auto f0 = AngularField::homogeneous_field(n, [](double p) { return von_mises(p, 2.0); });
    double mu = 0.5;
    SolveOptions opt;
    for (int i = 1; i < 64; i += 7) opt.checkpoints.push_back(i * dt);
    auto g = solve(f0, gbe_kernel(mu, F, n), F, 63 * dt, dt, opt);
    auto m = solve(f0, hard_disk_kernel(mu, n), F, 63 * dt, dt, opt);
    double early = 0.0;
    for (std::size_t c = 0; c < g.checkpoints.size(); ++c)
        for (int j = 0; j < n; ++j)
            early = std::max(early, std::abs(g.checkpoints[c].values[j] - m.checkpoints[c].values[j]));

    double mu20 = 20.0 / (2.0 * TL);
    auto g2 = solve(f0, gbe_kernel(mu20, F, n), F, 2 * TL, dt).final_field;
    auto m2 = solve(f0, hard_disk_kernel(mu20, n), F, 2 * TL, dt).final_field;
    double late = 0.0;
    for (int j = 0; j < n; ++j) late = std::max(late, std::abs(g2.values[j] - m2.values[j]));
    return {early <= 1e-10 && late <= 1e-8, fmt("t < T_L max diff %.3g; nu T_L = 20 memory correction %.3g", early, late)};
}

Outcome c14() {
    CompareParams p;
    p.workers = g_workers;
    p.samples = 3;
    p.seed = 7;
    auto t0 = std::chrono::steady_clock::now();
    auto r = compare_memory(p);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {r.hard_closer_to_gbe && r.p_value < 0.05 && r.smooth_within,
            fmt("paired diff %.4g t %.3g p %.3g; smooth gap %.3g (3 se %.3g); %.0f s", r.mean_diff, r.t_stat, r.p_value,
                r.smooth_gap, 3 * r.smooth_se, secs)};
}

// small versions of every experiment, run twice and across worker counts
void run_suite(const std::string &dir, unsigned workers) {
    auto go = [&](const std::string &name, const std::string &text) {
        auto cfg = Config::parse(text);
        auto rep = run_experiment(cfg, dir + "/" + name, workers, 5);
        (void)rep;
    };
    go("scatter", "[run]\nexperiment = scatter\n[regime]\nkind = intermediate\neps = 0.01\n[scatter]\nnodes = 257\n");
    go("micro", "[run]\nexperiment = micro\nt_end = 1\n[regime]\nkind = boltzmann_grad\nmu = 0.5\neps_list = 0.1, 0.05\n"
                "[micro]\nn_seeds = 40\n");
    go("pathology", "[run]\nexperiment = pathology\nt_end = 2TL\n[field]\nB = 1\n[regime]\nkind = boltzmann_grad\n"
                    "mu = 0.1\neps_list = 0.1, 0.05\n[micro]\nn_seeds = 60\nrequire_decades = false\n");
    go("kinetic", "[run]\nexperiment = kinetic\nt_end = 1\n[kinetic]\nkernel = boltzmann\nnphi = 32\n"
                  "dsmc_particles = 20000\n");
    go("gbe", "[run]\nexperiment = kinetic\nt_end = 2TL\n[field]\nB = 2\n[regime]\nmu = 0.25\n[kinetic]\n"
              "kernel = gbe\nnphi = 32\ndt = 0.0490873852123405\n");
}

std::vector<fs::path> csvs(const fs::path &root) {
    std::vector<fs::path> out;
    for (auto &e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome c15() {
    std::string a = g_scratch + "/repro_a", b = g_scratch + "/repro_b", c = g_scratch + "/repro_c";
    for (auto &d : {a, b, c}) fs::remove_all(d);
    run_suite(a, g_workers);
    run_suite(b, g_workers);
    run_suite(c, g_workers > 1 ? 1 : 4);
    auto fa = csvs(a), fb = csvs(b), fc = csvs(c);
    bool ok = !fa.empty() && fa == fb && fa == fc;
    int differ = 0;
    if (ok)
        for (auto &f : fa)
            if (slurp(fs::path(a) / f) != slurp(fs::path(b) / f) || slurp(fs::path(a) / f) != slurp(fs::path(c) / f)) ++differ;
    return {ok && differ == 0, fmt("%zu CSVs, %d differ", fa.size(), differ)};
}

}  // namespace

int main(int argc, char **argv) {
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    if (const char *w = std::getenv("MAGLORENTZ_WORKERS")) g_workers = static_cast<unsigned>(std::max(1, std::atoi(w)));
    g_scratch = (fs::temp_directory_path() / "maglorentz_acceptance").string();
    std::vector<int> only, expect_red;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--workers" && i + 1 < argc) g_workers = static_cast<unsigned>(std::atoi(argv[++i]));
        else if (a == "--expect-red" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) expect_red.push_back(std::stoi(tok));
        }
        else if (a == "--scratch" && i + 1 < argc) g_scratch = argv[++i];
        else only.push_back(std::atoi(argv[i]));
    }
    fs::create_directories(g_scratch);
    std::vector<std::function<Outcome()>> all{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14, c15};
    int failed = 0, unexpected = 0;
    for (int i = 1; i <= 15; ++i) {
        if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[i - 1]();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s  %s [%.1f s]\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        bool red = std::find(expect_red.begin(), expect_red.end(), i) != expect_red.end();
        if (!o.pass) ++failed;
        if (o.pass == red) ++unexpected;
    }
    std::printf("%d of %zu criteria failed", failed, only.empty() ? all.size() : only.size());
    if (!expect_red.empty()) std::printf(", %d outside the expected red set", unexpected);
    std::printf("\n");
    return (expect_red.empty() ? failed : unexpected) == 0 ? 0 : 1;
}

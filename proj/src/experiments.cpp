#include "maglorentz/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "maglorentz/io.hpp"
#include "maglorentz/parallel.hpp"

namespace mlg {

namespace fs = std::filesystem;
using cplx = std::complex<double>;

// ---------------------------------------------------------------- config glue

FieldParams field_from(const Config &cfg) {
    return FieldParams{cfg.num("field.B"), static_cast<int>(cfg.integer("field.orientation"))};
}

ScalingRegime regime_from(const Config &cfg, double eps) {
    ScalingRegime r;
    r.kind = parse_regime(cfg.str("regime.kind"));
    r.mu = cfg.num("regime.mu");
    r.eps = eps;
    r.alpha = cfg.num("regime.alpha");
    r.gamma = cfg.num("regime.gamma");
    r.s = cfg.num("regime.s");
    r.profile = cfg.str("regime.profile") == "steep_wall" ? steep_wall_profile(cfg.num("regime.steepness"))
                                                          : cubic_bump_profile();
    return r;
}

std::vector<double> eps_list_from(const Config &cfg) {
    auto l = cfg.list("regime.eps_list");
    if (l.empty()) l.push_back(cfg.num("regime.eps"));
    return l;
}

CollisionKernel kernel_from(const Config &cfg, const ScalingRegime &regime, const FieldParams &field) {
    const std::string k = cfg.str("kinetic.kernel");
    const int n = static_cast<int>(cfg.integer("kinetic.nphi"));
    const auto nodes = static_cast<std::size_t>(cfg.integer("kinetic.nodes"));
    if (k == "landau") {
        double xi = cfg.num("kinetic.xi");
        if (xi == 0.0) xi = landau_diffusion_explicit(regime.profile, regime.mu);
        return landau_kernel(xi, n);
    }
    if (k == "hard_disk") return hard_disk_kernel(regime.mu, n);
    if (k == "boltzmann") return boltzmann_kernel(regime, field, n, nodes);
    if (k == "uncut") return uncut_kernel(regime.s, regime.mu, cfg.num("kinetic.theta_min"), n, nodes);
    if (k == "gbe") {
        GbeOptions o;
        o.fixed_theta = cfg.num("kinetic.fixed_theta");
        o.fg = parse_fg_mode(cfg.str("kinetic.fg_mode"));
        return gbe_kernel(regime.mu, field, n, o);
    }
    CollisionKernel none;
    none.nphi = n;
    none.lambda.assign(n, 0.0);
    none.id = "none";
    return none;
}

double von_mises(double phi, double kappa) { return std::exp(kappa * std::cos(phi)); }

// ---------------------------------------------------------------- numerics

double grazing_operator_gap(const CollisionKernel &K, double xi, const std::function<double(double)> &g) {
    const int n = K.nphi;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        int m = mode_of_index(j, n);
        cplx c = 0.0;
        for (int l = 0; l < n; ++l) c += g(two_pi * l / n) * std::polar(1.0, -m * two_pi * l / n);
        c /= static_cast<double>(n);
        s += std::norm((K.lambda[j] + xi * double(m) * m) * c);
    }
    return std::sqrt(two_pi * s);
}

double angular_l1(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s * two_pi / a.size();
}

double angular_l2(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s * two_pi / a.size());
}

SlopeFit fit_loglog(const std::vector<double> &x, const std::vector<double> &y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    SlopeFit f;
    const double nan = std::nan("");
    if (lx.size() < 2) return {nan, nan, nan};
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) return {nan, nan, nan};
    f.slope = sxy / sxx;
    if (lx.size() < 3) {
        f.lo = f.hi = nan;
        return f;
    }
    double ssr = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double r = ly[i] - (my + f.slope * (lx[i] - mx));
        ssr += r * r;
    }
    double se = std::sqrt(ssr / (n - 2.0) / sxx);
    double q = boost::math::quantile(boost::math::students_t(n - 2.0), 0.975);
    f.lo = f.slope - q * se;
    f.hi = f.slope + q * se;
    return f;
}

FEpsEstimate microsim_angular(const ScalingRegime &regime, const FieldParams &field, int nphi, double kappa, double t,
                              std::uint64_t n_media, std::uint64_t seed, unsigned workers) {
    std::vector<PhaseState> pts;
    for (int j = 0; j < nphi; ++j) pts.push_back({{0.0, 0.0}, unit_from_angle(two_pi * j / nphi)});
    auto f0 = [kappa](const PhaseState &s) { return von_mises(angle_of(s.v), kappa); };
    return estimate_f_eps(f0, pts, t, regime, field, n_media, seed, workers);
}

namespace {

cplx mode1(const std::vector<double> &f) {
    cplx s = 0.0;
    double tot = 0.0;
    const int n = static_cast<int>(f.size());
    for (int j = 0; j < n; ++j) {
        s += f[j] * std::polar(1.0, -two_pi * j / n);
        tot += f[j];
    }
    return s / tot;
}

AngularField von_mises_field(int nphi, double kappa) {
    return AngularField::homogeneous_field(nphi, [kappa](double p) { return von_mises(p, kappa); });
}

}  // namespace

// ---------------------------------------------------------------- converge

ConvergeResult converge_study(const ConvergeParams &p) {
    ConvergeResult res;
    const bool long_range = p.regime.kind == RegimeKind::LongRangeTruncated;
    auto f0 = von_mises_field(p.nphi, p.kappa);
    std::vector<double> eps = p.eps_list;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    CollisionKernel uncut;
    std::vector<double> f_uncut;
    if (long_range) {
        uncut = uncut_kernel(p.regime.s, p.regime.mu, p.theta_min, p.nphi, p.nodes);
        f_uncut = solve(f0, uncut, p.field, p.t_end, p.dt).final_field.values;
    }
    for (double e : eps) {
        ScalingRegime r = p.regime;
        r.eps = e;
        ConvergeRow row;
        row.eps = e;
        auto K = boltzmann_kernel(r, p.field, p.nphi, p.nodes);
        auto fb = solve(f0, K, p.field, p.t_end, p.dt).final_field.values;
        if (long_range) {
            double gap = 0.0;
            for (int m = 1; m <= 2; ++m)
                for (int q = 0; q < 2; ++q) {
                    double s = 0.0;
                    for (int j = 0; j < p.nphi; ++j) {
                        double phi = two_pi * j / p.nphi;
                        s += (fb[j] - f_uncut[j]) * (q ? std::sin(m * phi) : std::cos(m * phi));
                    }
                    gap = std::max(gap, std::abs(s) * two_pi / p.nphi);
                }
            row.d2 = gap;
        } else {
            row.xi = -K.lambda[1].real();
            auto L = landau_kernel(row.xi, p.nphi);
            auto fl = solve(f0, L, p.field, p.t_end, p.dt).final_field.values;
            row.d2 = angular_l2(fb, fl);
        }
        if (p.n_seeds > 0) {
            auto est = microsim_angular(r, p.field, p.nphi, p.kappa, p.t_end, p.n_seeds, hash_key(p.seed, 0xC0), p.workers);
            row.d1 = angular_l1(est.mean, fb);
            double v = 0.0;
            for (double s : est.stderr_) v += s * s;
            row.d1_se = std::sqrt(v) * two_pi / p.nphi;
            row.d1_inconclusive = row.d1_se > 0.5 * row.d1;
        }
        res.rows.push_back(row);
    }
    std::vector<double> x, y1, y2;
    for (const auto &r : res.rows) {
        y2.push_back(r.d2);
        if (!r.d1_inconclusive) {
            x.push_back(r.eps);
            y1.push_back(r.d1);
        }
    }
    std::vector<double> xe;
    for (const auto &r : res.rows) xe.push_back(r.eps);
    res.d1_slope = fit_loglog(x, y1);
    res.d2_slope = fit_loglog(xe, y2);
    res.d1_monotone = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        const auto &a = res.rows[i - 1], &b = res.rows[i];
        if (b.d1 > a.d1 + 1.96 * std::hypot(a.d1_se, b.d1_se)) res.d1_monotone = false;
    }
    return res;
}

// ---------------------------------------------------------------- compare

MemoryComparison compare_memory(const CompareParams &p) {
    MemoryComparison out;
    const FieldParams &F = p.field;
    const double T = F.T_L(), t_end = 2.0 * T;
    const double dt = T / 64.0;
    auto f0 = von_mises_field(p.nphi, p.kappa);
    std::vector<double> times;
    for (int i = 0; i < p.samples; ++i) times.push_back(t_end * i / (p.samples - 1));
    SolveOptions so;
    so.checkpoints = times;

    auto markov_hd = solve(f0, hard_disk_kernel(p.mu, p.nphi), F, t_end, dt, so);
    auto gbe = solve(f0, gbe_kernel(p.mu, F, p.nphi, p.gbe), F, t_end, dt, so);
    GbeOptions act = p.gbe;
    act.fg = FgMode::Active;
    auto gbe_act = solve(f0, gbe_kernel(p.mu, F, p.nphi, act), F, t_end, dt, so);

    ScalingRegime hard;
    hard.kind = RegimeKind::BoltzmannGrad;
    hard.mu = p.mu;
    hard.eps = p.hard_eps;
    ScalingRegime smooth;
    smooth.kind = RegimeKind::Intermediate;
    smooth.mu = p.mu;
    smooth.eps = p.smooth_eps;
    smooth.alpha = p.smooth_alpha;
    smooth.profile = p.profile;
    auto markov_sm = solve(f0, boltzmann_kernel(smooth, F, p.nphi, p.nodes), F, t_end, dt, so);

    // per-block microsim estimates at time t
    auto blocks = [&](const ScalingRegime &r, double t, std::uint64_t nb, std::uint64_t tag) {
        std::vector<std::vector<double>> est(nb);
        parallel_for(nb, p.workers, [&](std::size_t b) {
            est[b] = microsim_angular(r, F, p.nphi, p.kappa, t, p.block_media, hash_key(p.seed, tag, b), 1).mean;
        });
        return est;
    };
    auto pooled_mode = [&](const std::vector<std::vector<double>> &est, cplx &mean, cplx &se) {
        double sr = 0, si = 0, qr = 0, qi = 0;
        const double n = static_cast<double>(est.size());
        for (const auto &e : est) {
            cplx c = mode1(e);
            sr += c.real();
            si += c.imag();
            qr += c.real() * c.real();
            qi += c.imag() * c.imag();
        }
        mean = {sr / n, si / n};
        se = {std::sqrt(std::max(qr / n - mean.real() * mean.real(), 0.0) / (n - 1.0)),
              std::sqrt(std::max(qi / n - mean.imag() * mean.imag(), 0.0) / (n - 1.0))};
    };

    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const bool last = i + 1 == times.size();
        CurvePoint h, s;
        h.t = s.t = t;
        h.gbe = mode1(gbe.checkpoints[i].values);
        h.markov = mode1(markov_hd.checkpoints[i].values);
        h.gbe_active = mode1(gbe_act.checkpoints[i].values);
        s.markov = s.gbe = s.gbe_active = mode1(markov_sm.checkpoints[i].values);
        if (t == 0.0) {
            h.micro = s.micro = mode1(f0.values);
        } else {
            std::uint64_t nb = last ? p.n_blocks : std::min(p.curve_blocks, p.n_blocks);
            auto eh = blocks(hard, t, nb, 0x4A);
            auto es = blocks(smooth, t, nb, 0x5B);
            pooled_mode(eh, h.micro, h.micro_se);
            pooled_mode(es, s.micro, s.micro_se);
            if (last) {
                const auto &fg = gbe.checkpoints[i].values, &fm = markov_hd.checkpoints[i].values;
                std::vector<double> diff;
                for (const auto &e : eh) {
                    out.l1_gbe.push_back(angular_l1(e, fg));
                    out.l1_markov.push_back(angular_l1(e, fm));
                    diff.push_back(out.l1_markov.back() - out.l1_gbe.back());
                }
                const double n = static_cast<double>(diff.size());
                double m = 0, v = 0;
                for (double d : diff) m += d / n;
                for (double d : diff) v += (d - m) * (d - m) / (n - 1.0);
                out.mean_diff = m;
                out.t_stat = v > 0.0 ? m / std::sqrt(v / n) : (m > 0 ? INFINITY : 0.0);
                boost::math::students_t st(n - 1.0);
                out.p_value = std::isfinite(out.t_stat) ? boost::math::cdf(boost::math::complement(st, out.t_stat))
                                                        : (out.t_stat > 0 ? 0.0 : 1.0);
                out.hard_closer_to_gbe = m > 0.0 && out.p_value < 0.05;
                out.smooth_gap = std::abs(s.micro - s.markov);
                out.smooth_se = std::hypot(s.micro_se.real(), s.micro_se.imag());
                out.smooth_within = out.smooth_gap <= 3.0 * out.smooth_se;
            }
        }
        if (t < T) {
            for (int j = 0; j < p.nphi; ++j)
                out.early_gap = std::max(out.early_gap, std::abs(gbe.checkpoints[i].values[j] -
                                                                 markov_hd.checkpoints[i].values[j]));
        }
        out.hard.push_back(h);
        out.smooth.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------- runners

namespace {

struct Out {
    std::string dir;
    RunReport report;
    std::string file(const std::string &name) {
        std::string path = (fs::path(dir) / name).string();
        report.files.push_back(path);
        return path;
    }
    void fail(const std::string &why) {
        report.ok = false;
        report.failures.push_back(why);
    }
};

Out prepare(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    fs::create_directories(out);
    Config resolved = cfg;
    resolved.set("run.seed", std::to_string(seed));
    resolved.set("run.workers", std::to_string(workers));
    resolved.set("run.out", out);
    Out o{out, {}};
    std::ofstream m(o.file("manifest.ini"));
    m << "# maglorentz run manifest v1\n";
    m << resolved.manifest();
    return o;
}

std::string flag01(bool b) { return b ? "1" : "0"; }

}  // namespace

RunReport run_scatter(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    ScalingRegime r = regime_from(cfg, cfg.num("regime.eps"));
    PotentialSpec pot = r.potential();
    FieldParams field = cfg.flag("scatter.with_field") ? field_from(cfg) : FieldParams{0.0, 1};
    double rho_max = cfg.num("scatter.rho_max");
    if (pot.kind == PotentialKind::InversePower && rho_max == 0.0) rho_max = 10.0;
    auto t = cross_section(pot, field, static_cast<std::size_t>(cfg.integer("scatter.nodes")), rho_max);
    write_table_csv(t, o.file("scattering_table.csv"));
    write_gnuplot_stub(o.file("scattering_table.gp"), "scattering_table.csv", 1, {{2, "theta"}, {3, "dtheta/drho"}},
                       "rho", "theta");
    {
        CsvWriter w(o.file("cross_section.csv"), {"theta", "gamma"});
        for (int i = 1; i < 512; ++i) {
            double th = pi * i / 512.0;
            w.row({th, t.gamma(th)});
            w.row({-th, t.gamma(-th)});
        }
    }
    if (pot.is_hard() && field.B == 0.0) {
        double err = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double ex = pi - 2.0 * std::asin(std::min(1.0, std::abs(t.rho[i])));
            err = std::max(err, std::abs(std::abs(t.theta[i]) - ex));
        }
        if (err > 1e-12) o.fail("hard-disk table deviates from pi - 2 asin(rho) by " + fmt17(err));
    }
    return o.report;
}

RunReport run_micro(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    Config c = cfg;
    c.set("run.seed", std::to_string(seed));
    FieldParams field = field_from(c);
    double t_end = c.time("run.t_end", field.T_L());
    ScalingRegime r = regime_from(c, c.num("regime.eps"));
    FlowOptions fo;
    fo.arc_nu = c.num("micro.arc_nu");
    fo.arc_slack = c.num("micro.arc_slack");
    PathologyOptions po;
    po.require_decades = false;
    auto tab = pathology_scan(r, eps_list_from(c), t_end, static_cast<std::uint64_t>(c.integer("micro.n_seeds")), seed,
                              field, workers, fo, po);
    CsvWriter runs(o.file("runs.csv"), {"eps", "seed_index", "x0", "y0", "vx0", "vy0", "x", "y", "vx", "vy",
                                        "collisions", "tau_max", "circ", "arc", "rec", "interf", "overlap",
                                        "not_chi1"});
    CsvWriter agg(o.file("aggregate.csv"), {"eps", "n", "mean_collisions", "circ", "arc", "rec", "interf", "overlap",
                                            "not_chi1", "any"});
    for (const auto &row : tab.rows) {
        double coll = 0.0;
        for (const auto &s : row.seeds) {
            runs.row({row.eps, static_cast<long long>(s.index), s.initial.x.x, s.initial.x.y, s.initial.v.x,
                      s.initial.v.y, s.final_state.x.x, s.final_state.x.y, s.final_state.v.x, s.final_state.v.y,
                      static_cast<long long>(s.collisions), s.tau_max, flag01(s.circ), flag01(s.arc), flag01(s.rec),
                      flag01(s.interf), flag01(s.overlap), flag01(s.not_chi1)});
            coll += s.collisions;
        }
        const auto &k = row.counts;
        agg.row({row.eps, static_cast<long long>(k.n), row.seeds.empty() ? 0.0 : coll / row.seeds.size(),
                 static_cast<long long>(k.circ), static_cast<long long>(k.arc), static_cast<long long>(k.rec),
                 static_cast<long long>(k.interf), static_cast<long long>(k.overlap),
                 static_cast<long long>(k.not_chi1), static_cast<long long>(k.any)});
    }
    write_gnuplot_stub(o.file("aggregate.gp"), "aggregate.csv", 1, {{3, "mean collisions"}}, "eps", "collisions",
                       true);
    return o.report;
}

RunReport run_pathology(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    FieldParams field = field_from(cfg);
    double t_end = cfg.time("run.t_end", field.T_L());
    ScalingRegime r = regime_from(cfg, cfg.num("regime.eps"));
    FlowOptions fo;
    fo.arc_nu = cfg.num("micro.arc_nu");
    fo.arc_slack = cfg.num("micro.arc_slack");
    PathologyOptions po;
    po.require_decades = cfg.flag("micro.require_decades");
    po.keep_seed_records = false;
    auto tab = pathology_scan(r, eps_list_from(cfg), t_end, static_cast<std::uint64_t>(cfg.integer("micro.n_seeds")),
                              seed, field, workers, fo, po);
    CsvWriter w(o.file("pathology.csv"),
                {"eps", "n", "p_circ", "circ_lo", "circ_hi", "p_arc", "arc_lo", "arc_hi", "p_rec", "rec_lo", "rec_hi",
                 "p_interf", "interf_lo", "interf_hi", "p_overlap", "p_not_chi1"});
    for (const auto &row : tab.rows) {
        const auto &k = row.counts;
        auto ci = [&](std::uint64_t x) { return wilson_interval(x, k.n); };
        auto c = ci(k.circ), a = ci(k.arc), rc = ci(k.rec), in = ci(k.interf);
        w.row({row.eps, static_cast<long long>(k.n), row.rate(k.circ), c.lo, c.hi, row.rate(k.arc), a.lo, a.hi,
               row.rate(k.rec), rc.lo, rc.hi, row.rate(k.interf), in.lo, in.hi, row.rate(k.overlap),
               row.rate(k.not_chi1)});
        if (r.kind == RegimeKind::BoltzmannGrad && k.circ == 0)
            o.fail("hard-disk circ frequency vanished at eps = " + fmt17(row.eps));
    }
    CsvWriter s(o.file("pathology_slopes.csv"), {"observable", "loglog_slope"});
    s.row({std::string("circ"), tab.slope_circ});
    s.row({std::string("arc"), tab.slope_arc});
    s.row({std::string("rec"), tab.slope_rec});
    s.row({std::string("interf"), tab.slope_int});
    s.row({std::string("overlap"), tab.slope_overlap});
    write_gnuplot_stub(o.file("pathology.gp"), "pathology.csv", 1, {{3, "circ"}, {6, "arc"}, {9, "rec"}, {12, "interf"}},
                       "eps", "frequency", true);
    return o.report;
}

RunReport run_kinetic(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    FieldParams field = field_from(cfg);
    ScalingRegime r = regime_from(cfg, cfg.num("regime.eps"));
    const double t_end = cfg.time("run.t_end", field.T_L());
    const double dt = cfg.time("kinetic.dt", field.T_L());
    const int nphi = static_cast<int>(cfg.integer("kinetic.nphi"));
    const double kappa = cfg.num("kinetic.kappa");
    const bool gridded = cfg.str("kinetic.mode") == "gridded";
    SpatialGrid grid;
    grid.nx = static_cast<int>(cfg.integer("kinetic.nx"));
    grid.ny = static_cast<int>(cfg.integer("kinetic.ny"));
    grid.dx = cfg.num("kinetic.dx");
    grid.dy = cfg.num("kinetic.dy");
    grid.x0 = cfg.num("kinetic.x0");
    grid.y0 = cfg.num("kinetic.y0");
    grid.boundary = cfg.str("kinetic.boundary") == "periodic" ? Boundary::Periodic : Boundary::Absorbing;
    const double w = cfg.num("kinetic.blob_width");
    AngularField f0 = gridded ? AngularField::gridded_field(grid, nphi,
                                                            [&](double x, double y, double p) {
                                                                return std::exp(-(x * x + y * y) / (2 * w * w)) *
                                                                       von_mises(p, kappa);
                                                            })
                              : von_mises_field(nphi, kappa);
    CollisionKernel K = kernel_from(cfg, r, field);
    SolveOptions so;
    so.transport.interp = cfg.str("kinetic.interp") == "spectral" ? SpatialInterp::Spectral : SpatialInterp::Bilinear;
    so.checkpoints = cfg.times("kinetic.checkpoints", field.T_L());
    if (so.checkpoints.empty())
        for (int i = 0; i <= 8; ++i) so.checkpoints.push_back(dt * std::round(t_end * i / 8.0 / dt));
    auto res = solve(f0, K, field, t_end, dt, so);
    CsvWriter m(o.file("modes.csv"), {"t", "mass", "min", "re1", "im1", "re2", "im2"});
    for (std::size_t i = 0; i < res.checkpoints.size(); ++i) {
        const auto &f = res.checkpoints[i];
        cplx a = f.mode(1), b = f.mode(2);
        m.row({f.t, f.mass(), f.min_value(), a.real(), a.imag(), b.real(), b.imag()});
        char name[64];
        std::snprintf(name, sizeof name, "field_%03zu.csv", i);
        write_field_csv(f, o.file(name), K.id);
    }
    write_field_csv(res.final_field, o.file("field_final.csv"), K.id);
    write_gnuplot_stub(o.file("modes.gp"), "modes.csv", 1, {{4, "Re c1"}, {5, "Im c1"}, {6, "Re c2"}}, "t", "mode");
    if (!(gridded && grid.boundary == Boundary::Absorbing) && res.max_mass_drift > 1e-12)
        o.fail("mass drift " + fmt17(res.max_mass_drift) + " exceeds 1e-12");
    const auto particles = static_cast<std::uint64_t>(cfg.integer("kinetic.dsmc_particles"));
    if (particles > 0) {
        auto sampler = [&](Stream &rng) {
            double p;
            do p = rng.uniform(-pi, pi);
            while (rng.uniform() * std::exp(kappa) >= von_mises(p, kappa));
            Vec2 x{0.0, 0.0};
            if (gridded) x = {w * rng.normal(), w * rng.normal()};
            return PhaseState{x, unit_from_angle(p)};
        };
        auto d = dsmc_sample(sampler, K, field, t_end, particles, seed, nphi, workers, gridded ? &grid : nullptr);
        auto g = res.final_field.angular_marginal();
        double mass = res.final_field.mass();
        auto h = d.histogram.angular_marginal();
        CsvWriter dc(o.file("dsmc.csv"), {"phi_index", "phi", "dsmc", "solve"});
        for (int j = 0; j < nphi; ++j) dc.row({static_cast<long long>(j), two_pi * j / nphi, h[j], g[j] / mass});
        CsvWriter dm(o.file("dsmc_modes.csv"), {"mode", "dsmc_re", "dsmc_re_se", "dsmc_im", "dsmc_im_se", "solve_re",
                                                "solve_im"});
        cplx a = res.final_field.mode(1), b = res.final_field.mode(2);
        dm.row({1LL, d.mode1.real(), d.mode1_re_se, d.mode1.imag(), d.mode1_im_se, a.real(), a.imag()});
        dm.row({2LL, d.mode2.real(), d.mode2_re_se, d.mode2.imag(), d.mode2_im_se, b.real(), b.imag()});
        write_gnuplot_stub(o.file("dsmc.gp"), "dsmc.csv", 2, {{3, "dsmc"}, {4, "solve"}}, "phi", "density");
    }
    return o.report;
}

RunReport run_converge(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    ConvergeParams p;
    p.field = field_from(cfg);
    p.regime = regime_from(cfg, cfg.num("regime.eps"));
    p.eps_list = eps_list_from(cfg);
    p.t_end = cfg.time("run.t_end", p.field.T_L());
    p.dt = cfg.num("converge.dt");
    p.nphi = static_cast<int>(cfg.integer("converge.nphi"));
    p.kappa = cfg.num("converge.kappa");
    p.n_seeds = static_cast<std::uint64_t>(cfg.integer("converge.n_seeds"));
    p.seed = seed;
    p.workers = workers;
    p.theta_min = cfg.num("kinetic.theta_min");
    p.nodes = static_cast<std::size_t>(cfg.integer("kinetic.nodes"));
    if (p.regime.kind != RegimeKind::Intermediate && p.regime.kind != RegimeKind::WeakCoupling &&
        p.regime.kind != RegimeKind::LongRangeTruncated)
        throw ConfigError("regime.kind", "config: 'regime.kind' must be a smooth or long_range regime for converge");
    if (cfg.flag("micro.require_decades")) {
        auto [lo, hi] = std::minmax_element(p.eps_list.begin(), p.eps_list.end());
        if (p.eps_list.size() < 3 || *hi / *lo < 999.0)
            throw ConfigError("regime.eps_list", "config: 'regime.eps_list' must have >= 3 entries spanning 3 decades");
    }
    auto res = converge_study(p);
    CsvWriter w(o.file("converge.csv"), {"eps", "d1", "d1_stderr", "d1_status", "d2", "xi"});
    for (const auto &r : res.rows)
        w.row({r.eps, r.d1, r.d1_se, std::string(r.d1_inconclusive ? "inconclusive" : "ok"), r.d2, r.xi});
    CsvWriter s(o.file("converge_slopes.csv"), {"quantity", "slope", "ci_lo", "ci_hi"});
    s.row({std::string("d1"), res.d1_slope.slope, res.d1_slope.lo, res.d1_slope.hi});
    s.row({std::string("d2"), res.d2_slope.slope, res.d2_slope.lo, res.d2_slope.hi});
    write_gnuplot_stub(o.file("converge.gp"), "converge.csv", 1, {{2, "d1"}, {5, "d2"}}, "eps", "distance", true);
    if (!res.d1_monotone) o.fail("d1 not monotone across the eps list");
    return o.report;
}

RunReport run_compare_memory(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    Out o = prepare(cfg, out, workers, seed);
    CompareParams p;
    p.mu = cfg.num("regime.mu");
    p.field = field_from(cfg);
    p.hard_eps = cfg.num("compare.hard_eps");
    p.smooth_eps = cfg.num("compare.smooth_eps");
    p.smooth_alpha = cfg.num("compare.smooth_alpha");
    p.profile = regime_from(cfg, p.smooth_eps).profile;
    p.nphi = static_cast<int>(cfg.integer("compare.nphi"));
    p.kappa = cfg.num("compare.kappa");
    p.samples = static_cast<int>(cfg.integer("compare.samples"));
    p.n_blocks = static_cast<std::uint64_t>(cfg.integer("compare.n_blocks"));
    p.block_media = static_cast<std::uint64_t>(cfg.integer("compare.block_media"));
    p.curve_blocks = static_cast<std::uint64_t>(cfg.integer("compare.curve_blocks"));
    p.seed = seed;
    p.workers = workers;
    p.gbe.fixed_theta = cfg.num("kinetic.fixed_theta");
    p.gbe.fg = parse_fg_mode(cfg.str("kinetic.fg_mode"));
    p.nodes = static_cast<std::size_t>(cfg.integer("kinetic.nodes"));
    auto res = compare_memory(p);
    auto curve = [&](const std::string &name, const std::vector<CurvePoint> &c) {
        CsvWriter w(o.file(name), {"t", "micro_re", "micro_im", "micro_se_re", "micro_se_im", "gbe_re", "gbe_im",
                                   "markov_re", "markov_im", "gbe_active_re", "gbe_active_im"});
        for (const auto &q : c)
            w.row({q.t, q.micro.real(), q.micro.imag(), q.micro_se.real(), q.micro_se.imag(), q.gbe.real(),
                   q.gbe.imag(), q.markov.real(), q.markov.imag(), q.gbe_active.real(), q.gbe_active.imag()});
    };
    curve("compare_hard.csv", res.hard);
    curve("compare_smooth.csv", res.smooth);
    {
        CsvWriter w(o.file("compare_paired.csv"), {"block", "l1_gbe", "l1_markov"});
        for (std::size_t i = 0; i < res.l1_gbe.size(); ++i)
            w.row({static_cast<long long>(i), res.l1_gbe[i], res.l1_markov[i]});
    }
    {
        CsvWriter w(o.file("compare_summary.csv"), {"quantity", "value"});
        w.row({std::string("mean_l1_markov_minus_gbe"), res.mean_diff});
        w.row({std::string("t_statistic"), res.t_stat});
        w.row({std::string("p_value"), res.p_value});
        w.row({std::string("smooth_mode1_gap"), res.smooth_gap});
        w.row({std::string("smooth_mode1_stderr"), res.smooth_se});
        w.row({std::string("early_gbe_markov_gap"), res.early_gap});
    }
    write_gnuplot_stub(o.file("compare_hard.gp"), "compare_hard.csv", 1,
                       {{2, "microsim"}, {6, "GBE"}, {8, "Markov"}, {10, "GBE active"}}, "t", "Re c1");
    write_gnuplot_stub(o.file("compare_smooth.gp"), "compare_smooth.csv", 1, {{2, "microsim"}, {8, "Markov"}}, "t",
                       "Re c1");
    if (!res.hard_closer_to_gbe) o.fail("hard-disk microsim not significantly closer to the GBE than to Markov");
    if (!res.smooth_within) o.fail("smooth microsim differs from the Markovian solve by more than 3 stderr");
    if (res.early_gap > 1e-10) o.fail("GBE and Markov differ before one Larmor period");
    return o.report;
}

RunReport run_experiment(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed) {
    cfg.validate();
    const std::string e = cfg.str("run.experiment");
    if (e == "scatter") return run_scatter(cfg, out, workers, seed);
    if (e == "micro") return run_micro(cfg, out, workers, seed);
    if (e == "pathology") return run_pathology(cfg, out, workers, seed);
    if (e == "kinetic") return run_kinetic(cfg, out, workers, seed);
    if (e == "converge") return run_converge(cfg, out, workers, seed);
    return run_compare_memory(cfg, out, workers, seed);
}

}  // namespace mlg

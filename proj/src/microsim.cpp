#include "maglorentz/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "maglorentz/parallel.hpp"
#include "maglorentz/rng.hpp"

namespace mlg {

double EventLog::max_tau() const {
    double m = 0.0;
    for (const auto &c : collisions) m = std::max(m, c.s_out - c.s_in);
    return m;
}

std::vector<double> EventLog::gaps() const {
    std::vector<double> out;
    double prev = 0.0;
    for (const auto &c : collisions) {
        out.push_back(c.s_in - prev);
        prev = c.s_in;
    }
    out.push_back(total_time - prev);
    return out;
}

PhaseState Trajectory::state_at(double s) const {
    if (segments.empty()) throw std::logic_error("empty trajectory");
    auto it = std::upper_bound(segments.begin(), segments.end(), s,
                               [](double v, const Segment &seg) { return v < seg.s0; });
    const Segment &seg = it == segments.begin() ? segments.front() : *std::prev(it);
    double ds = std::clamp(s - seg.s0, 0.0, seg.duration);
    if (seg.free) return cyclotron_advance(seg.start, ds, field);
    return interaction_state(seg.interaction, seg.obstacle, ds);
}

namespace {

constexpr std::size_t max_collisions = 1000000;

double velocity_turn(Vec2 in, Vec2 out) { return wrap_angle(angle_of(in) - angle_of(out)); }

void finalize_flags(FlowResult &res, const FieldParams &phys, const PotentialSpec &pot, const FlowOptions &opt) {
    EventLog &log = res.log;
    const int n = static_cast<int>(log.collisions.size());
    const double w = phys.B == 0.0 ? 0.0 : phys.Omega();
    for (int i = 0; i < n; ++i) {
        double next_exit = i + 1 < n ? log.collisions[i + 1].s_in : log.total_time;
        log.collisions[i].phi = w * (next_exit - log.collisions[i].s_out);
    }
    log.initial_arc = w * (n > 0 ? log.collisions[0].s_in : log.total_time);
    if (phys.B > 0.0) {
        double tb = tau_bound_for(log, pot.radius(), opt);
        Flag c = detect_circ(log, phys, tb);
        if (c.set) log.flags.circ.raise(c.time);
        double nu = opt.arc_nu >= 0.0 ? opt.arc_nu : (pot.kind == PotentialKind::SmoothCompact ? pot.alpha : 0.0);
        Flag a = detect_arc(log, phys, phys.T_L() * std::pow(pot.eps, nu), tb);
        if (a.set) log.flags.arc.raise(a.time);
    }
    detect_recollision_interference_overlap(res.trajectory, log);
}

}  // namespace

FlowResult flow_forward(const PhaseState &initial, double t, const MediumSample &sample, const PotentialSpec &pot,
                        const FieldParams &field, const FlowOptions &opt) {
    if (!(t >= 0.0)) throw std::invalid_argument("flow: t must be >= 0");
    if (std::abs(pot.radius() - sample.obstacle_radius()) > 1e-12 * pot.radius())
        throw std::invalid_argument("flow: potential radius does not match the medium");
    FlowResult res;
    Trajectory &traj = res.trajectory;
    EventLog &log = res.log;
    traj.field = field;
    traj.pot = pot;
    traj.total = t;
    log.total_time = t;

    PhaseState st = initial;
    double s = 0.0;
    std::vector<std::uint64_t> transparent;
    auto is_transparent = [&](std::uint64_t id) {
        return std::find(transparent.begin(), transparent.end(), id) != transparent.end();
    };
    auto add_free = [&](const PhaseState &from, double s0, double dur) {
        if (dur <= 0.0) return;
        Segment seg;
        seg.free = true;
        seg.s0 = s0;
        seg.duration = dur;
        seg.start = from;
        traj.segments.push_back(std::move(seg));
    };
    auto run_interaction = [&](const Obstacle &o, double rho) {
        Interaction in = interact(st, o, pot, field, t - s, opt.keep_dense);
        Collision c;
        c.s_in = s;
        c.s_out = in.completed ? s + in.tau : t;
        c.obstacle_id = o.id;
        c.center = o.c;
        c.radius = o.radius;
        c.rho = rho;
        c.theta = velocity_turn(st.v, in.exit.v);
        c.completed = in.completed;
        log.collisions.push_back(c);
        Segment seg;
        seg.free = false;
        seg.s0 = s;
        seg.duration = c.s_out - c.s_in;
        seg.start = st;
        seg.obstacle = o;
        seg.interaction = std::move(in);
        PhaseState exit = seg.interaction.exit;
        traj.segments.push_back(std::move(seg));
        st = exit;
        s = c.completed ? c.s_out : t;
    };

    if (t == 0.0) {
        res.final_state = st;
        return res;
    }

    std::vector<Obstacle> around = sample.obstacles_near(st.x, 0.0);
    std::vector<Obstacle> inside;
    for (const auto &o : around)
        if (norm(o.c - st.x) < o.radius) inside.push_back(o);
    if (!inside.empty()) {
        log.flags.chi1_violated.raise(0.0);
        if (inside.size() > 1) log.flags.overlap.raise(0.0);
        if (pot.is_hard()) {
            for (const auto &o : inside) transparent.push_back(o.id);
        } else {
            auto nearest = std::min_element(inside.begin(), inside.end(), [&](const Obstacle &a, const Obstacle &b) {
                return norm2(a.c - st.x) < norm2(b.c - st.x);
            });
            for (const auto &o : inside)
                if (o.id != nearest->id) transparent.push_back(o.id);
            run_interaction(*nearest, impact_parameter(st, nearest->c) / pot.eps);
        }
    }

    const double cell = sample.cell_size();
    while (s < t) {
        if (log.collisions.size() > max_collisions) throw std::runtime_error("flow: collision budget exceeded");
        double rem = t - s;
        double span = std::min(rem, 2.0 * cell);
        std::vector<Obstacle> obs = sample.obstacles_near(st.x, span);
        if (!transparent.empty())
            obs.erase(std::remove_if(obs.begin(), obs.end(), [&](const Obstacle &o) { return is_transparent(o.id); }),
                      obs.end());
        HitResult hr = first_obstacle_hit(st, obs, field, span);
        if (hr.grazing) ++log.grazing;
        if (!hr.hit) {
            add_free(st, s, span);
            st = cyclotron_advance(st, span, field);
            s = rem <= span ? t : s + span;
            continue;
        }
        const Hit h = *hr.hit;
        add_free(st, s, h.t);
        st = cyclotron_advance(st, h.t, field);
        s += h.t;
        Vec2 d = st.x - h.obstacle.c;
        double dn = norm(d);
        if (dn > 0.0) st.x = h.obstacle.c + (h.obstacle.radius / dn) * d;
        for (const auto &o : obs)
            if (o.id != h.obstacle.id && norm(st.x - o.c) < o.radius) log.flags.overlap.raise(s);
        run_interaction(h.obstacle, h.rho / pot.eps);
        for (const auto &o : obs)
            if (o.id != h.obstacle.id && norm(st.x - o.c) < o.radius) log.flags.overlap.raise(s);
    }
    for (auto &c : log.collisions) {
        c.t_entry = c.s_in;
        c.t_exit = c.s_out;
    }
    res.final_state = st;
    finalize_flags(res, field, pot, opt);
    return res;
}

FlowResult flow(const PhaseState &initial, double t, const MediumSample &sample, const PotentialSpec &pot,
                const FieldParams &field, const FlowOptions &opt) {
    FieldParams back = field.reversed();
    FlowResult res = flow_forward({initial.x, -initial.v}, t, sample, pot, back, opt);
    for (auto &c : res.log.collisions) {
        c.t_entry = t - c.s_out;
        c.t_exit = t - c.s_in;
    }
    // arc angles in the physical field
    const double w = field.B == 0.0 ? 0.0 : field.Omega();
    const int n = static_cast<int>(res.log.collisions.size());
    for (int i = 0; i < n; ++i) {
        const auto &c = res.log.collisions[i];
        double next_exit = i + 1 < n ? t - res.log.collisions[i + 1].s_in : 0.0;
        res.log.collisions[i].phi = w * (c.t_entry - next_exit);
    }
    res.log.initial_arc = w * (t - (n > 0 ? res.log.collisions[0].t_exit : 0.0));
    res.final_state = {res.final_state.x, -res.final_state.v};
    return res;
}

double tau_bound_for(const EventLog &log, double radius, const FlowOptions &opt) {
    return log.max_tau() + opt.arc_slack * radius;
}

Flag detect_arc(const EventLog &log, const FieldParams &field, double window, double tau_bound) {
    Flag f;
    if (field.B == 0.0 || !std::isfinite(window)) return f;
    double threshold = window - tau_bound;
    double start = 0.0;
    const auto gaps = log.gaps();
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        if (gaps[k] >= threshold) {
            f.raise(start + std::max(threshold, 0.0));
            break;
        }
        start += gaps[k];
    }
    // leaving a support, the free orbit can only re-enter it after going around
    for (std::size_t k = 1; k < log.collisions.size(); ++k) {
        if (log.collisions[k].obstacle_id == log.collisions[k - 1].obstacle_id) {
            f.raise(log.collisions[k].s_in);
            break;
        }
    }
    return f;
}

Flag detect_circ(const EventLog &log, const FieldParams &field, double tau_bound) {
    if (field.B == 0.0) return {};
    return detect_arc(log, field, field.T_L(), tau_bound);
}

namespace {

void sort_unique(std::vector<IndexPair> &v) {
    std::sort(v.begin(), v.end(), [](const IndexPair &a, const IndexPair &b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

Obstacle obstacle_of(const Collision &c) { return Obstacle{c.center, c.radius, c.obstacle_id}; }

}  // namespace

void detect_recollision_interference_overlap(const Trajectory &traj, EventLog &log) {
    const auto &cols = log.collisions;
    const int n = static_cast<int>(cols.size());
    // overlapping supports among hit obstacles
    for (int p = 0; p < n; ++p) {
        for (int q = p + 1; q < n; ++q) {
            if (cols[p].obstacle_id == cols[q].obstacle_id) continue;
            double d = norm(cols[p].center - cols[q].center);
            if (d < cols[p].radius + cols[q].radius) log.flags.overlap.raise(cols[q].s_in);
        }
    }
    // each free piece lies between collision k and k+1 (k = 0 before the first)
    int k = 0;
    for (const auto &seg : traj.segments) {
        if (!seg.free) {
            ++k;
            continue;
        }
        double tol = 1e-9 * std::max(1.0, seg.duration);
        for (int p = 1; p <= k - 1; ++p) {
            const auto &c = cols[p - 1];
            HitResult hr = orbit_entry(seg.start, obstacle_of(c), traj.field, seg.duration + tol);
            if (hr.hit) {
                log.flags.recollisions.push_back({p, k + 1});
                log.flags.recollision.raise(seg.s0 + hr.hit->t);
            }
        }
        for (int j = k + 3; j <= n; ++j) {
            const auto &c = cols[j - 1];
            HitResult hr = orbit_entry(seg.start, obstacle_of(c), traj.field, seg.duration + tol);
            if (hr.hit) {
                log.flags.interferences.push_back({k + 1, j});
                log.flags.interference.raise(seg.s0 + hr.hit->t);
            }
        }
    }
    // interaction paths crossing another hit support
    int q = 0;
    for (const auto &seg : traj.segments) {
        if (seg.free) continue;
        ++q;
        const auto &steps = seg.interaction.steps;
        if (steps.empty()) continue;
        for (int p = 1; p <= n; ++p) {
            const auto &c = cols[p - 1];
            if (c.obstacle_id == seg.obstacle.id) continue;
            for (const auto &st : steps) {
                double tm = (st.t0 + 0.5 * st.h) * seg.interaction.unit_scale;
                PhaseState x = interaction_state(seg.interaction, seg.obstacle, tm);
                if (norm(x.x - c.center) < c.radius) {
                    log.flags.overlap.raise(seg.s0 + tm);
                    break;
                }
            }
        }
    }
    sort_unique(log.flags.recollisions);
    sort_unique(log.flags.interferences);
}

std::vector<IndexPair> recollisions_from_ids(const EventLog &log) {
    std::vector<IndexPair> out;
    const auto &cols = log.collisions;
    const int n = static_cast<int>(cols.size());
    for (int p = 0; p < n; ++p)
        for (int q = p + 2; q < n; ++q)
            if (cols[p].obstacle_id == cols[q].obstacle_id) out.push_back({p + 1, q + 1});
    sort_unique(out);
    return out;
}

std::vector<IndexPair> reversed_pairs(const std::vector<IndexPair> &pairs, int n_collisions) {
    std::vector<IndexPair> out;
    for (const auto &pr : pairs) out.push_back({n_collisions + 1 - pr.j, n_collisions + 1 - pr.i});
    sort_unique(out);
    return out;
}

double tube_area(const Trajectory &traj, double radius, double resolution) {
    if (!(radius > 0.0) || traj.total <= 0.0) return 0.0;
    const double h = radius * resolution;
    const double dt = 0.5 * h;
    std::unordered_set<std::uint64_t> marked;
    auto key = [](std::int64_t i, std::int64_t j) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
               static_cast<std::uint32_t>(j);
    };
    const auto steps = static_cast<std::int64_t>(std::ceil(traj.total / dt));
    for (std::int64_t k = 0; k < steps; ++k) {
        double s0 = k * dt, s1 = std::min(traj.total, s0 + dt);
        PhaseState p = traj.state_at(0.5 * (s0 + s1));
        double speed = norm(p.v);
        if (speed == 0.0) continue;
        Vec2 T = (1.0 / speed) * p.v, N = perp(T);
        double half = 0.5 * speed * (s1 - s0);
        double ext = radius + half;
        auto i0 = static_cast<std::int64_t>(std::floor((p.x.x - ext) / h));
        auto i1 = static_cast<std::int64_t>(std::floor((p.x.x + ext) / h));
        auto j0 = static_cast<std::int64_t>(std::floor((p.x.y - ext) / h));
        auto j1 = static_cast<std::int64_t>(std::floor((p.x.y + ext) / h));
        for (auto i = i0; i <= i1; ++i) {
            for (auto j = j0; j <= j1; ++j) {
                Vec2 c{(i + 0.5) * h - p.x.x, (j + 0.5) * h - p.x.y};
                double a = dot(c, T);
                if (a < -half || a >= half) continue;
                if (std::abs(dot(c, N)) >= radius) continue;
                marked.insert(key(i, j));
            }
        }
    }
    return static_cast<double>(marked.size()) * h * h;
}

namespace {

void count_flags(PathologyCounts &pc, const EventFlags &f) {
    ++pc.n;
    pc.circ += f.circ.set;
    pc.arc += f.arc.set;
    pc.rec += f.recollision.set;
    pc.interf += f.interference.set;
    pc.overlap += f.overlap.set;
    pc.not_chi1 += f.chi1_violated.set;
    pc.any += f.any_pathology();
}

void merge(PathologyCounts &a, const PathologyCounts &b) {
    a.n += b.n;
    a.circ += b.circ;
    a.arc += b.arc;
    a.rec += b.rec;
    a.interf += b.interf;
    a.overlap += b.overlap;
    a.not_chi1 += b.not_chi1;
    a.any += b.any;
}

}  // namespace

FEpsEstimate estimate_f_eps(const PhaseFunction &f0, const std::vector<PhaseState> &points, double t,
                            const ScalingRegime &regime, const FieldParams &field, std::uint64_t n_seeds,
                            std::uint64_t seed, unsigned workers, const FlowOptions &opt) {
    FEpsEstimate out;
    const std::size_t m = points.size();
    out.seeds = n_seeds;
    out.mean.assign(m, 0.0);
    out.stderr_.assign(m, 0.0);
    out.flagfree_mean.assign(m, 0.0);
    if (t == 0.0) {
        for (std::size_t i = 0; i < m; ++i) out.mean[i] = out.flagfree_mean[i] = f0(points[i]);
        return out;
    }
    if (n_seeds == 0) throw std::invalid_argument("estimate_f_eps: need at least one seed");
    const PotentialSpec pot = regime.potential();
    std::vector<std::vector<double>> value(n_seeds), flagfree(n_seeds);
    std::vector<PathologyCounts> counts(n_seeds);
    parallel_for(n_seeds, workers, [&](std::size_t k) {
        MediumSample sample(hash_key(seed, k), regime, field);
        value[k].resize(m);
        flagfree[k].resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            FlowResult fr = flow(points[i], t, sample, pot, field, opt);
            double v = f0(fr.final_state);
            value[k][i] = v;
            flagfree[k][i] = fr.log.flags.any_pathology() ? 0.0 : v;
            count_flags(counts[k], fr.log.flags);
        }
    });
    const double n = static_cast<double>(n_seeds);
    for (std::size_t i = 0; i < m; ++i) {
        double s1 = 0.0, s2 = 0.0, sf = 0.0;
        for (std::uint64_t k = 0; k < n_seeds; ++k) {
            s1 += value[k][i];
            s2 += value[k][i] * value[k][i];
            sf += flagfree[k][i];
        }
        double mean = s1 / n;
        out.mean[i] = mean;
        out.flagfree_mean[i] = sf / n;
        double var = n > 1.0 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
        out.stderr_[i] = std::sqrt(var / n);
    }
    for (const auto &c : counts) merge(out.flags, c);
    return out;
}

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    double nn = static_cast<double>(n), p = static_cast<double>(k) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double den = n * sxx - sx * sx;
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / den;
}

PathologyTable pathology_scan(const ScalingRegime &regime, const std::vector<double> &eps_list, double t,
                              std::uint64_t n_seeds, std::uint64_t seed, const FieldParams &field, unsigned workers,
                              const FlowOptions &opt, const PathologyOptions &popt) {
    if (eps_list.empty()) throw std::invalid_argument("pathology_scan: empty eps list");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1])) throw std::invalid_argument("pathology_scan: eps list must decrease");
    if (popt.require_decades &&
        (eps_list.size() < 3 || eps_list.front() / eps_list.back() < 100.0 * (1.0 - 1e-12)))
        throw std::invalid_argument("pathology_scan: need >= 3 eps values spanning >= 2 decades");
    PathologyTable table;
    for (double eps : eps_list) {
        ScalingRegime r = regime;
        r.eps = eps;
        r.validate();
        const PotentialSpec pot = r.potential();
        std::vector<SeedRecord> recs(n_seeds);
        std::vector<EventFlags> flags(n_seeds);
        parallel_for(n_seeds, workers, [&](std::size_t k) {
            MediumSample sample(hash_key(seed, k), r, field);
            Stream rng(hash_key(seed, k, 0x5EED));
            PhaseState init{{0.0, 0.0}, unit_from_angle(two_pi * rng.uniform())};
            FlowResult fr = flow(init, t, sample, pot, field, opt);
            SeedRecord &rec = recs[k];
            rec.index = k;
            rec.initial = init;
            rec.final_state = fr.final_state;
            rec.collisions = static_cast<int>(fr.log.collisions.size());
            rec.tau_max = fr.log.max_tau();
            const auto &f = fr.log.flags;
            rec.circ = f.circ.set;
            rec.arc = f.arc.set;
            rec.rec = f.recollision.set;
            rec.interf = f.interference.set;
            rec.overlap = f.overlap.set;
            rec.not_chi1 = f.chi1_violated.set;
            flags[k] = f;
        });
        PathologyRow row;
        row.eps = eps;
        for (const auto &f : flags) count_flags(row.counts, f);
        if (popt.keep_seed_records) row.seeds = std::move(recs);
        table.rows.push_back(std::move(row));
    }
    auto slope = [&](auto field_of) {
        std::vector<double> x, y;
        for (const auto &row : table.rows) {
            x.push_back(row.eps);
            y.push_back(row.rate(field_of(row.counts)));
        }
        return loglog_slope(x, y);
    };
    table.slope_circ = slope([](const PathologyCounts &c) { return c.circ; });
    table.slope_arc = slope([](const PathologyCounts &c) { return c.arc; });
    table.slope_rec = slope([](const PathologyCounts &c) { return c.rec; });
    table.slope_int = slope([](const PathologyCounts &c) { return c.interf; });
    table.slope_overlap = slope([](const PathologyCounts &c) { return c.overlap; });
    return table;
}

}  // namespace mlg

#include "maglorentz/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlg {

Vec2 cyclotron_center(const PhaseState &s, const FieldParams &f) {
    return s.x + (1.0 / f.Omega()) * perp(s.v);
}

PhaseState cyclotron_advance(const PhaseState &s, double dt, const FieldParams &f) {
    double w = f.Omega();
    double a = w * dt;
    double sa = std::sin(a);
    double h = std::sin(0.5 * a);
    // sin(a)/w and (1 - cos a)/w, both finite as w -> 0
    double c1 = w == 0.0 ? dt : sa / w;
    double c2 = w == 0.0 ? 0.0 : 2.0 * h * h / w;
    PhaseState out;
    out.x = s.x + c1 * s.v + c2 * perp(s.v);
    out.v = rotate(s.v, a);
    return out;
}

double impact_parameter(const PhaseState &s, Vec2 center) { return cross(s.x - center, s.v); }

HitResult orbit_entry(const PhaseState &s, const Obstacle &o, const FieldParams &f, double t_max) {
    HitResult res;
    const double r = o.radius;
    const Vec2 w = o.c - s.x;
    double t_hit;
    if (f.B == 0.0) {
        double p = dot(w, s.v);
        double hp = cross(s.v, w);
        double disc = r * r - hp * hp;
        if (disc <= grazing_tolerance * r * r) {
            if (std::abs(disc) <= grazing_tolerance * r * r && p > 0.0 && p <= t_max) res.grazing = true;
            return res;
        }
        t_hit = p - std::sqrt(disc);
        if (!(t_hit > 0.0) || t_hit > t_max) return res;
    } else {
        const double RL = f.R_L();
        const int orient = f.orientation;
        const Vec2 n = static_cast<double>(orient) * perp(s.v);
        const double nw = dot(n, w);
        const double ww = norm2(w);
        const Vec2 q = w - RL * n;
        const double D = norm(q);
        if (D == 0.0) return res;
        const double d_minus = (ww - 2.0 * RL * nw) / (D + RL);
        const double disc = r * r - d_minus * d_minus;
        if (disc <= grazing_tolerance * r * r) {
            if (std::abs(disc) <= grazing_tolerance * r * r) res.grazing = true;
            return res;
        }
        double s2 = disc / (4.0 * D * RL);
        double a = s2 >= 1.0 ? pi : 2.0 * std::asin(std::sqrt(s2));
        double ang = std::atan2(-cross(n, w), RL - nw);
        double dir = orient > 0 ? ang : -ang;
        dir = wrap_positive(dir);
        double phase = wrap_positive(dir - a);
        t_hit = phase / f.B;
        if (!(t_hit > 0.0) || t_hit > t_max) return res;
    }
    PhaseState e = cyclotron_advance(s, t_hit, f);
    Hit h;
    h.t = t_hit;
    h.obstacle = o;
    h.rho = std::clamp(impact_parameter(e, o.c), -r, r);
    res.hit = h;
    return res;
}

HitResult first_obstacle_hit(const PhaseState &s, std::span<const Obstacle> obstacles, const FieldParams &f,
                             double t_max) {
    HitResult best;
    for (const auto &o : obstacles) {
        HitResult r = orbit_entry(s, o, f, t_max);
        if (r.grazing) best.grazing = true;
        if (r.hit && (!best.hit || r.hit->t < best.hit->t)) best.hit = r.hit;
    }
    return best;
}

Interaction interact(const PhaseState &s, const Obstacle &o, const PotentialSpec &pot, const FieldParams &f,
                     double t_limit, bool keep_dense, const OdeOptions &opt) {
    Interaction out;
    const double L = pot.eps;
    out.unit_scale = L;
    if (pot.is_hard()) {
        Vec2 w = s.x - o.c;
        double d = norm(w);
        Vec2 nrm = d > 0.0 ? (1.0 / d) * w : Vec2{1.0, 0.0};
        out.exit.x = s.x;
        out.exit.v = dot(s.v, nrm) < 0.0 ? s.v - (2.0 * dot(s.v, nrm)) * nrm : s.v;
        out.tau = 0.0;
        return out;
    }
    const double R = pot.unit_radius();
    const double b = L * f.Omega();
    OdeState<4> y0{(s.x.x - o.c.x) / L, (s.x.y - o.c.y) / L, s.v.x, s.v.y};

    double unit_limit = t_limit / L;
    double trap = f.B > 0.0 ? 10.0 * f.T_L() / L : std::numeric_limits<double>::infinity();
    double stop = std::min(unit_limit, trap);
    if (!std::isfinite(stop)) stop = 1e12;

    long evals = 0;
    auto rhs = [&](double, const OdeState<4> &y, OdeState<4> &dy) {
        ++evals;
        double r = std::hypot(y[0], y[1]);
        double fr = r > 0.0 ? -pot.dV(r) / r : 0.0;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -b * y[3] + fr * y[0];
        dy[3] = b * y[2] + fr * y[1];
    };
    auto event = [&](const OdeState<4> &y) { return y[0] * y[0] + y[1] * y[1] - R * R; };
    auto on_step = [&](const DenseStep<4> &ds, double) {
        if (keep_dense) out.steps.push_back(ds);
    };
    OdeOptions o2 = opt;
    o2.h0 = 0.01 * std::min(R, 1.0);
    auto res = dopri5<4>(rhs, 0.0, y0, stop, event, on_step, o2);
    out.rhs_evals = evals;
    if (res.reason == OdeStop::StepLimit || res.reason == OdeStop::StepUnderflow)
        throw DynamicsError(DynamicsFault::StepFailure, "integrator step failure inside obstacle", o.id, s);
    if (res.reason == OdeStop::TimeLimit && unit_limit > trap)
        throw DynamicsError(DynamicsFault::Trapped, "tracer trapped inside obstacle", o.id, s);
    out.completed = res.reason == OdeStop::Event;
    out.tau = res.t * L;
    out.exit.x = {o.c.x + L * res.y[0], o.c.y + L * res.y[1]};
    out.exit.v = {res.y[2], res.y[3]};
    // V vanishes on the support boundary, so the exit speed is exactly 1
    if (out.completed && pot.V(R) == 0.0) out.exit.v *= 1.0 / norm(out.exit.v);
    return out;
}

std::pair<PhaseState, double> integrate_in_potential(const PhaseState &s, const Obstacle &o,
                                                     const PotentialSpec &pot, const FieldParams &f) {
    double d = norm(s.x - o.c);
    if (std::abs(d - o.radius) > 1e-10 * std::max(1.0, o.radius))
        throw DynamicsError(DynamicsFault::EnteredInside, "entry state not on the support boundary", o.id, s);
    Interaction in = interact(s, o, pot, f, std::numeric_limits<double>::infinity(), false);
    return {in.exit, in.tau};
}

PhaseState interaction_state(const Interaction &in, const Obstacle &o, double t) {
    double u = t / in.unit_scale;
    if (in.steps.empty()) return in.exit;
    auto it = std::upper_bound(in.steps.begin(), in.steps.end(), u,
                               [](double val, const InteractionStep &st) { return val < st.t0; });
    const InteractionStep &st = it == in.steps.begin() ? in.steps.front() : *std::prev(it);
    auto y = st.eval(std::clamp(u, st.t0, st.t1()));
    return {{o.c.x + in.unit_scale * y[0], o.c.y + in.unit_scale * y[1]}, {y[2], y[3]}};
}

}  // namespace mlg

#include "doctest.h"

#include <cmath>
#include <vector>

#include "maglorentz/microsim.hpp"
#include "maglorentz/rng.hpp"

using namespace mlg;

namespace {

EventLog synthetic(const std::vector<double> &entries, double total, double tau = 0.0) {
    EventLog log;
    log.total_time = total;
    std::uint64_t id = 1;
    for (double s : entries) {
        Collision c;
        c.s_in = s;
        c.s_out = s + tau;
        c.obstacle_id = id++;
        log.collisions.push_back(c);
    }
    return log;
}

}  // namespace

TEST_CASE("circ detection on synthetic logs") {
    FieldParams f{1.0, 1};
    double T = f.T_L();
    CHECK(detect_circ(synthetic({}, 2 * T), f, 0.0).set);
    std::vector<double> dense;
    for (double s = 0.4; s < 2 * T; s += T / 3) dense.push_back(s);
    CHECK_FALSE(detect_circ(synthetic(dense, 2 * T), f, 0.0).set);
    double tb = 0.1;
    CHECK(detect_circ(synthetic({1.0, 1.0 + T - tb / 2}, 1.0 + T), f, tb).set);
}

TEST_CASE("arc detection") {
    FieldParams f{1.0, 1};
    double T = f.T_L();
    Stream rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> e;
        double s = 0.0;
        while (true) {
            s += rng.exponential(1.0);
            if (s >= 2 * T) break;
            e.push_back(s);
        }
        auto log = synthetic(e, 2 * T);
        CHECK(detect_arc(log, f, T, 0.05).set == detect_circ(log, f, 0.05).set);
        bool wide = detect_arc(log, f, 2.0, 0.0).set, narrow = detect_arc(log, f, 1.0, 0.0).set;
        if (wide) CHECK(narrow);
    }
    std::vector<double> short_gaps;
    for (double s = 0.1; s < 10.0; s += 0.2) short_gaps.push_back(s);
    CHECK_FALSE(detect_arc(synthetic(short_gaps, 10.0), f, 1.0, 0.0).set);
}

TEST_CASE("index bookkeeping") {
    EventLog log = synthetic({0.1, 0.2, 0.3, 0.4, 0.5}, 1.0);
    log.collisions[3].obstacle_id = log.collisions[0].obstacle_id;
    auto rec = recollisions_from_ids(log);
    REQUIRE(rec.size() == 1);
    CHECK(rec[0] == IndexPair{1, 4});
    auto rev = reversed_pairs(rec, 5);
    CHECK(rev[0] == IndexPair{2, 5});
    CHECK(reversed_pairs(rev, 5) == rec);
}

TEST_CASE("Wilson interval") {
    auto w = wilson_interval(50, 100);
    CHECK(w.lo < 0.5);
    CHECK(w.hi > 0.5);
    CHECK(w.lo == doctest::Approx(0.4038).epsilon(1e-3));
    auto z = wilson_interval(0, 100);
    CHECK(z.lo == 0.0);
    CHECK(z.hi > 0.0);
}

TEST_CASE("empty medium is free cyclotron flow") {
    ScalingRegime r;
    r.kind = RegimeKind::BoltzmannGrad;
    r.mu = 0.0;
    r.eps = 1e-2;
    FieldParams f{1.3, 1};
    MediumSample m(1, r, f);
    PhaseState s{{0.2, 0.1}, unit_from_angle(0.7)};
    double t = 2.2 * f.T_L();
    auto res = flow(s, t, m, r.potential(), f);
    auto expect = cyclotron_advance(s, -t, f);
    CHECK(norm(res.final_state.x - expect.x) < 1e-12);
    CHECK(norm(res.final_state.v - expect.v) < 1e-12);
    CHECK(res.log.collisions.empty());
    CHECK(res.log.flags.circ.set);
}

TEST_CASE("head-on hard disk retraces") {
    ScalingRegime r;
    r.kind = RegimeKind::BoltzmannGrad;
    r.mu = 1e-3;
    r.eps = 1e-2;
    FieldParams f{0.0, 1};
    // find a seed with an obstacle near the origin and aim straight at it
    for (std::uint64_t seed = 1; seed < 2000; ++seed) {
        MediumSample m(seed, r, f, 1.0);
        auto cell = m.cell(0, 0);
        if (cell->size() != 1) continue;
        Vec2 c = (*cell)[0].c;
        if (norm(c - Vec2{0.5, 0.5}) > 0.3) continue;
        if (m.obstacles_near(c, 0.5).size() != 1) continue;
        PhaseState s{c - Vec2{0.1, 0.0}, {1, 0}};
        // 0.09 in, 0.09 back out
        auto res = flow_forward(s, 0.18, m, r.potential(), f);
        REQUIRE(res.log.collisions.size() == 1);
        CHECK(norm(res.final_state.v - Vec2{-1, 0}) < 1e-12);
        CHECK(norm(res.final_state.x - s.x) < 1e-12);
        return;
    }
    FAIL("no suitable medium found");
}

TEST_CASE("time reversal replay") {
    ScalingRegime r;
    r.kind = RegimeKind::Intermediate;
    r.mu = 1.0;
    r.eps = 0.05;
    r.alpha = 0.1;
    FieldParams f{1.0, 1};
    MediumSample m(12, r, f);
    auto pot = r.potential();
    PhaseState s{{0.0, 0.0}, unit_from_angle(0.3)};
    // a few collisions: errors grow by a factor ~10 per smooth collision
    double t = 0.6;
    auto fwd = flow_forward(s, t, m, pot, f);
    CHECK(fwd.log.collisions.size() > 0);
    auto back = flow_forward({fwd.final_state.x, -fwd.final_state.v}, t, m, pot, f.reversed());
    CHECK(norm(back.final_state.x - s.x) < 1e-6);
    CHECK(norm(back.final_state.v + s.v) < 1e-6);
}

TEST_CASE("backward log invariants") {
    ScalingRegime r;
    r.kind = RegimeKind::BoltzmannGrad;
    r.mu = 1.0;
    r.eps = 1e-2;
    FieldParams f{1.0, 1};
    MediumSample m(3, r, f);
    auto res = flow({{0, 0}, {1, 0}}, 2 * f.T_L(), m, r.potential(), f, FlowOptions{true});
    const auto &c = res.log.collisions;
    for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(c[i].t_entry < c[i - 1].t_entry);
        CHECK(c[i - 1].phi == doctest::Approx(f.Omega() * (c[i - 1].t_entry - c[i].t_exit)).epsilon(1e-9));
    }
    for (auto &p : res.log.flags.recollisions) CHECK(p.j > p.i + 1);
    const auto &seg = res.trajectory.segments;
    for (std::size_t i = 1; i < seg.size(); ++i) {
        CHECK(seg[i].s0 == doctest::Approx(seg[i - 1].s0 + seg[i - 1].duration).epsilon(1e-10));
        auto end = res.trajectory.state_at(seg[i].s0 - 1e-15);
        CHECK(norm(end.x - res.trajectory.state_at(seg[i].s0).x) < 1e-10);
    }
}

TEST_CASE("overlap flag") {
    ScalingRegime r;
    r.kind = RegimeKind::BoltzmannGrad;
    r.mu = 3.0;
    r.eps = 0.05;
    FieldParams f{1.0, 1};
    // at this density overlapping supports are common; whenever both are hit the flag must be raised
    int raised = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        MediumSample m(seed, r, f);
        auto res = flow({{0, 0}, {1, 0}}, 3.0, m, r.potential(), f);
        bool overlap = false;
        const auto &c = res.log.collisions;
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j)
                if (c[i].obstacle_id != c[j].obstacle_id && norm(c[i].center - c[j].center) < 2 * r.eps) overlap = true;
        if (overlap) {
            CHECK(res.log.flags.overlap.set);
            ++raised;
        }
    }
    CHECK(raised > 0);
}

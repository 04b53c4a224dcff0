#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mlg {

template <std::size_t N>
using OdeState = std::array<double, N>;

// One accepted Dormand-Prince step with its continuous extension.
template <std::size_t N>
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    std::array<OdeState<N>, 5> rc{};

    OdeState<N> eval(double t) const {
        double th = h > 0.0 ? (t - t0) / h : 0.0;
        double th1 = 1.0 - th;
        OdeState<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = rc[0][i] + th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
        return y;
    }
    double t1() const { return t0 + h; }
};

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h0 = 1e-3;
    double event_tol = 1e-13;
    long max_steps = 2000000;
};

enum class OdeStop { Event, TimeLimit, StepLimit, StepUnderflow };

template <std::size_t N>
struct OdeResult {
    double t = 0.0;
    OdeState<N> y{};
    OdeStop reason = OdeStop::TimeLimit;
    long steps = 0;
};

// Adaptive Dormand-Prince 5(4) with dense output. Integration stops when
// event(y) changes sign from negative to non-negative, located by bisection
// on the dense output, or when t reaches t_limit.
template <std::size_t N, class Rhs, class Event, class OnStep>
OdeResult<N> dopri5(Rhs &&f, double t0, OdeState<N> y0, double t_limit, Event &&event,
                    OnStep &&on_step, const OdeOptions &opt) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                     a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    using S = OdeState<N>;
    auto axpy = [](const S &y, double h, std::initializer_list<std::pair<double, const S *>> terms) {
        S out = y;
        for (auto &[c, k] : terms)
            if (c != 0.0)
                for (std::size_t i = 0; i < N; ++i) out[i] += h * c * (*k)[i];
        return out;
    };

    OdeResult<N> res;
    double t = t0;
    S y = y0;
    S k1, k2, k3, k4, k5, k6, k7;
    f(t, y, k1);
    double h = std::min(opt.h0, t_limit - t0);
    double g_prev = event(y);

    while (res.steps < opt.max_steps) {
        if (t >= t_limit) {
            res.t = t;
            res.y = y;
            res.reason = OdeStop::TimeLimit;
            return res;
        }
        bool last = false;
        if (t + h >= t_limit) {
            h = t_limit - t;
            last = true;
        }
        S y2 = axpy(y, h, {{a21, &k1}});
        f(t + c2 * h, y2, k2);
        S y3 = axpy(y, h, {{a31, &k1}, {a32, &k2}});
        f(t + c3 * h, y3, k3);
        S y4 = axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        f(t + c4 * h, y4, k4);
        S y5 = axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        f(t + c5 * h, y5, k5);
        S y6 = axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        f(t + h, y6, k6);
        S y1 = axpy(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        f(t + h, y1, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / static_cast<double>(N));

        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (h < 1e-15 * std::max(1.0, std::abs(t))) {
                res.t = t;
                res.y = y;
                res.reason = OdeStop::StepUnderflow;
                return res;
            }
            continue;
        }
        ++res.steps;

        DenseStep<N> ds;
        ds.t0 = t;
        ds.h = h;
        for (std::size_t i = 0; i < N; ++i) {
            ds.rc[0][i] = y[i];
            ds.rc[1][i] = y1[i] - y[i];
            ds.rc[2][i] = h * k1[i] - ds.rc[1][i];
            ds.rc[3][i] = ds.rc[1][i] - h * k7[i] - ds.rc[2][i];
            ds.rc[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }

        double g1 = event(y1);
        if (g1 >= 0.0) {
            double lo = t, hi = t + h;
            bool bracket = g_prev < 0.0;
            if (!bracket) {
                // step started on the event surface: find the last interior point
                constexpr int probes = 64;
                double last_neg = -1.0;
                for (int j = 1; j < probes; ++j) {
                    double tj = t + h * j / probes;
                    if (event(ds.eval(tj)) < 0.0) last_neg = tj;
                }
                if (last_neg >= 0.0) {
                    lo = last_neg;
                    bracket = true;
                }
            }
            if (bracket) {
                while (hi - lo > opt.event_tol * std::max(1.0, std::abs(hi))) {
                    double mid = 0.5 * (lo + hi);
                    if (event(ds.eval(mid)) < 0.0) lo = mid;
                    else hi = mid;
                }
                DenseStep<N> cut = ds;
                on_step(cut, hi);
                res.t = hi;
                res.y = ds.eval(hi);
                res.reason = OdeStop::Event;
                return res;
            }
            if (g_prev >= 0.0 && t == t0) {
                on_step(ds, t0);
                res.t = t0;
                res.y = y0;
                res.reason = OdeStop::Event;
                return res;
            }
        }

        on_step(ds, t + h);
        t = last ? t_limit : t + h;
        y = y1;
        k1 = k7;
        g_prev = g1;
        double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
    }
    res.t = t;
    res.y = y;
    res.reason = OdeStop::StepLimit;
    return res;
}

}  // namespace mlg

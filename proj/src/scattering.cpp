#include "maglorentz/scattering.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mlg {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

template <class F>
double quad(F &&f, double a, double b, double tol = 1e-12) {
    double err = 0.0;
    return gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &err);
}

template <class F>
double solve_bracket(F &&f, double a, double b, double fa, double fb, const char *what, double rho) {
    std::uintmax_t iters = 200;
    boost::math::tools::eps_tolerance<double> tol(50);
    try {
        auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
        return 0.5 * (r.first + r.second);
    } catch (const std::exception &) {
        throw std::runtime_error(std::string("root bracketing failed (") + what + ") at rho=" + std::to_string(rho));
    }
}

double d2V(const PotentialSpec &pot, double r) {
    switch (pot.kind) {
    case PotentialKind::SmoothCompact:
        return r < 1.0 && pot.profile.ddphi ? pot.coupling() * pot.profile.ddphi(r) : 0.0;
    case PotentialKind::TruncatedPower:
        if (r >= pot.unit_radius()) return 0.0;
        [[fallthrough]];
    case PotentialKind::InversePower:
        return pot.s * (pot.s + 1.0) * std::pow(r, -pot.s - 2.0);
    default:
        return 0.0;
    }
}

// Turning point of u^2 + 2 V(rho/u) = 1 on [u_lo, 1]. Far from the support
// edge we solve in u, close to it in w = 1 - u; either way D = u_max - u_lo
// keeps its relative precision.
struct Turning {
    bool in_u = true;
    double ulo = 0.0, wlo = 1.0;
    double umax = 1.0, D = 0.0;
};

Turning find_turning(const PotentialSpec &pot, double ra) {
    const double R = pot.unit_radius();
    Turning t;
    t.wlo = std::isfinite(R) ? (R - ra) / R : 1.0;
    t.ulo = std::isfinite(R) ? ra / R : 0.0;
    t.in_u = t.ulo <= 0.5;
    if (t.in_u) {
        auto F = [&](double u) { return u * u + 2.0 * pot.V(ra / u) - 1.0; };
        double f1 = F(1.0);
        if (f1 <= 0.0) {
            t.umax = 1.0;
        } else {
            double flo = F(t.ulo);
            if (!(flo < 0.0)) throw std::runtime_error("root bracketing failed (u_max) at rho=" + std::to_string(ra));
            t.umax = solve_bracket(F, t.ulo, 1.0, flo, f1, "u_max", ra);
        }
        t.D = t.umax - t.ulo;
    } else {
        auto F = [&](double w) { return 2.0 * pot.V(ra / (1.0 - w)) - w * (2.0 - w); };
        double f0 = F(0.0);
        double wmin = 0.0;
        if (f0 > 0.0) {
            double flo = F(t.wlo);
            if (!(flo < 0.0)) throw std::runtime_error("root bracketing failed (u_max) at rho=" + std::to_string(ra));
            wmin = solve_bracket(F, 0.0, t.wlo, f0, flo, "u_max", ra);
        }
        t.umax = 1.0 - wmin;
        t.D = t.wlo - wmin;
    }
    return t;
}

struct RIntegrals {
    double theta = 0.0;
    double tau_unit = 0.0;
};

// Quadrature over r in [r_min, R], carried out in the gap d = R - r so that
// 1 - L(r) keeps its precision when |rho| approaches the support radius.
RIntegrals r_integrals(double rho, const PotentialSpec &pot, double b) {
    const double R = pot.unit_radius();
    if (!std::isfinite(R)) throw std::invalid_argument("field quadrature needs a compact support");
    const double M = rho - 0.5 * b * R * R;
    const double gap = R - rho, gap_neg = R + rho;
    // Q = (1 - L)(1 + L) - 2V with L = M / r + b r / 2 and r = R - d
    auto Qd = [&](double d) {
        double r = R - d;
        double fb = 0.5 * b * d * (2.0 * R - d) / r;
        return ((gap - d) / r + fb) * ((gap_neg - d) / r - fb) - 2.0 * pot.V(r);
    };

    double dmax = R;
    bool found = false;
    double prev = 0.0, qprev = Qd(0.0);
    constexpr int N = 512;
    auto try_bracket = [&](double d) {
        double q = Qd(d);
        if (q < 0.0) {
            dmax = solve_bracket(Qd, prev, d, qprev, q, "r_min", rho);
            if (Qd(dmax) < 0.0) dmax = std::nextafter(dmax, 0.0);
            found = true;
        }
        prev = d;
        qprev = q;
    };
    // geometric start resolves turning points hugging the support edge
    for (double d = R * 1e-12; d < R / N && !found; d *= 4.0) try_bracket(d);
    for (int k = 1; k < N && !found; ++k) try_bracket(R * static_cast<double>(k) / N);
    for (double r = R - prev; !found && r > 1e-300;) {
        r *= 0.5;
        try_bracket(R - r);
    }
    const double rmin = R - dmax;
    const double qp = found ? -2.0 * pot.dV(rmin) + 2.0 * (M / rmin + 0.5 * b * rmin) * (M / (rmin * rmin) - 0.5 * b) : 0.0;
    auto weight = [&](double psi) {
        // dr/dpsi / sqrt(Q) with d = dmax cos^2(psi/2)
        double ch = std::cos(0.5 * psi);
        double q = Qd(dmax * ch * ch);
        if (found && (psi < 1e-6 || q <= 0.0)) return std::sqrt(dmax / qp) * ch;
        return 0.5 * dmax * std::sin(psi) / std::sqrt(q);
    };
    RIntegrals out;
    double sweep = 2.0 * quad(
                             [&](double psi) {
                                 double ch = std::cos(0.5 * psi);
                                 double r = R - dmax * ch * ch;
                                 if (r <= 0.0) return 0.5 * b * weight(psi);
                                 return (M / (r * r) + 0.5 * b) * weight(psi);
                             },
                             0.0, pi);
    if (!found) sweep += pi;
    double base = rho >= 0.0 ? 4.0 * std::asin(std::sqrt(0.5 * gap / R)) : pi + 2.0 * std::asin(std::min(1.0, -rho / R));
    out.theta = wrap_angle(base - sweep);
    out.tau_unit = 2.0 * quad(weight, 0.0, pi);
    return out;
}

double unit_field(const PotentialSpec &pot, const FieldParams &f) { return f.B == 0.0 ? 0.0 : pot.eps * f.Omega(); }

}  // namespace

double hard_disk_angle(double rho) {
    if (std::abs(rho) > 1.0) throw std::domain_error("hard_disk_angle: |rho| > 1");
    double t = pi - 2.0 * std::asin(std::abs(rho));
    return rho < 0.0 ? -t : t;
}

double angle_no_field(double rho, const PotentialSpec &pot) {
    if (pot.is_hard()) return hard_disk_angle(std::clamp(rho, -1.0, 1.0));
    const double R = pot.unit_radius();
    const double ra = std::abs(rho);
    if (ra >= R) return 0.0;
    if (ra == 0.0) return 2.0 * pot.V(0.0) >= 1.0 ? pi : 0.0;
    const Turning tp = find_turning(pot, ra);
    const double D = tp.D, umax = tp.umax;
    const double fp = 2.0 * umax - 2.0 * pot.dV(ra / umax) * ra / (umax * umax);
    double I = quad(
        [&](double psi) {
            double c = std::cos(psi), sn = std::sin(psi);
            double G;
            if (tp.in_u) {
                double u = tp.ulo + D * sn;
                G = 1.0 - u * u - 2.0 * pot.V(ra / u);
            } else {
                double w = tp.wlo - D * sn;
                G = w * (2.0 - w) - 2.0 * pot.V(ra / (1.0 - w));
            }
            if (c < 1e-6 || G <= 0.0) return std::sqrt(D * (1.0 + sn) / fp);
            return D * c / std::sqrt(G);
        },
        0.0, 0.5 * pi);
    // pi - 2 asin(u_lo) = 2 acos(u_lo)
    double t = (tp.in_u ? pi - 2.0 * std::asin(tp.ulo) : 4.0 * std::asin(std::sqrt(0.5 * tp.wlo))) - 2.0 * I;
    return wrap_angle(rho < 0.0 ? -t : t);
}

double angle_with_field(double rho, const PotentialSpec &pot, const FieldParams &field) {
    if (field.B == 0.0) return angle_no_field(rho, pot);
    if (pot.is_hard()) return hard_disk_angle(std::clamp(rho, -1.0, 1.0));
    double R = pot.unit_radius();
    if (std::abs(rho) >= R) return 0.0;
    return r_integrals(rho, pot, unit_field(pot, field)).theta;
}

double collision_time(double rho, const PotentialSpec &pot, const FieldParams &field) {
    if (pot.is_hard()) return 0.0;
    if (std::abs(rho) >= pot.unit_radius()) return 0.0;
    return pot.eps * r_integrals(rho, pot, unit_field(pot, field)).tau_unit;
}

double angle_derivative_no_field(double rho, const PotentialSpec &pot) {
    const double ra = std::abs(rho);
    if (pot.is_hard()) return -2.0 / std::sqrt(1.0 - rho * rho);
    const double R = pot.unit_radius();
    if (ra >= R || ra == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const Turning tp = find_turning(pot, ra);
    const double u0 = tp.ulo;
    const double umax = tp.umax, Dspan = tp.D;
    auto Dfun = [&](double u) { return u - pot.dV(ra / u) * ra / (u * u); };
    const double fp = 2.0 * Dfun(umax);
    // theta = 2 int_{b0}^{pi/2} (1 - sin b / D) db with sin^2 b = u^2 + 2V(rho/u);
    // its rho-derivative at fixed b, rewritten over u (d b = D du / (sin b cos b))
    double I = quad(
        [&](double psi) {
            double c = std::cos(psi), sn = std::sin(psi);
            double u, G;
            if (tp.in_u) {
                u = tp.ulo + Dspan * sn;
                G = 1.0 - u * u - 2.0 * pot.V(ra / u);
            } else {
                double w = tp.wlo - Dspan * sn;
                u = 1.0 - w;
                G = w * (2.0 - w) - 2.0 * pot.V(ra / u);
            }
            double jac = (c < 1e-6 || G <= 0.0) ? std::sqrt(Dspan * (1.0 + sn) / fp) : Dspan * c / std::sqrt(G);
            double r = ra / u;
            double v1 = pot.dV(r), v2 = d2V(pot, r);
            double D = Dfun(u);
            double u_rho = -v1 / (u * D);
            double D_u = 1.0 + v2 * ra * ra / (u * u * u * u) + 2.0 * v1 * ra / (u * u * u);
            double D_p = -v2 * ra / (u * u * u) - v1 / (u * u);
            return (D_u * u_rho + D_p) / D * jac;
        },
        0.0, 0.5 * pi);
    double boundary = 0.0;
    if (std::isfinite(R) && u0 > 0.0) boundary = 2.0 * (1.0 - u0 / Dfun(u0)) / std::sqrt(R * R - ra * ra);
    return 2.0 * I - boundary;
}

double rho_for_angle(double theta, const PotentialSpec &pot, double rho_hi) {
    auto F = [&](double r) { return std::abs(angle_no_field(r, pot)) - theta; };
    double lo = rho_hi * 1e-6;
    double flo = F(lo), fhi = F(rho_hi);
    while (fhi > 0.0) {
        rho_hi *= 2.0;
        fhi = F(rho_hi);
    }
    if (flo < 0.0) throw std::runtime_error("rho_for_angle: angle below threshold at small rho");
    return solve_bracket(F, lo, rho_hi, flo, fhi, "rho_for_angle", rho_hi);
}

// ---------------------------------------------------------------- table

namespace {

struct Hermite {
    double s0, h, y0, y1, m0, m1;
    double value(double t) const {
        double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 +
               (t3 - t2) * h * m1;
    }
    double slope(double t) const {
        double t2 = t * t;
        return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * h * m0 + (-6 * t2 + 6 * t) * y1 +
                (3 * t2 - 2 * t) * h * m1) / h;
    }
};

}  // namespace

double ScatteringTable::drho_ds(double si) const { return rho_max * 0.5 * pi * std::cos(0.5 * pi * si); }

static std::vector<double> unwrap(const std::vector<double> &th) {
    std::vector<double> u(th.size());
    if (th.empty()) return u;
    u[0] = th[0];
    for (std::size_t i = 1; i < th.size(); ++i) u[i] = u[i - 1] + wrap_angle(th[i] - th[i - 1]);
    return u;
}

namespace {

Hermite segment(const ScatteringTable &t, const std::vector<double> &uw, std::size_t i) {
    return {t.s[i], t.s[i + 1] - t.s[i], uw[i], uw[i + 1], t.dtheta_ds[i], t.dtheta_ds[i + 1]};
}

}  // namespace

double ScatteringTable::theta_at_s(double sq) const {
    std::vector<double> local;
    if (theta_unwrapped.size() != theta.size()) local = unwrap(theta);
    const std::vector<double> &uw = local.empty() ? theta_unwrapped : local;
    sq = std::clamp(sq, -1.0, 1.0);
    double pos = (sq + 1.0) * 0.5 * static_cast<double>(s.size() - 1);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), s.size() - 2);
    Hermite hm = segment(*this, uw, i);
    return wrap_angle(hm.value((sq - s[i]) / hm.h));
}

double ScatteringTable::theta_at(double r) const {
    double x = std::clamp(r / rho_max, -1.0, 1.0);
    return theta_at_s(2.0 / pi * std::asin(x));
}

double ScatteringTable::dtheta_drho(std::size_t i) const {
    double d = (i == 0 || i + 1 == s.size()) ? 0.0 : drho_ds(s[i]);
    if (d == 0.0) return dtheta_ds[i] == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), dtheta_ds[i]);
    return dtheta_ds[i] / d;
}

namespace {

// s on segment i (inside one monotone branch) where the unwrapped angle equals x
double invert_segment(const Hermite &hm, double x) {
    double lo = 0.0, hi = 1.0;
    bool inc = hm.y1 >= hm.y0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        double v = hm.value(mid);
        if ((v < x) == inc) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// returns s values where branch b crosses unwrapped angle x
bool branch_invert(const ScatteringTable &t, const std::vector<double> &uw, const Branch &b, double x,
                   double &s_out, double &slope_out) {
    if (x < b.theta_lo || x > b.theta_hi) return false;
    std::size_t lo = b.first, hi = b.last;
    // find segment [k, k+1] with x between uw[k], uw[k+1]
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if ((uw[mid] <= x) == b.increasing) lo = mid;
        else hi = mid;
    }
    Hermite hm = segment(t, uw, lo);
    double tt = invert_segment(hm, x);
    s_out = hm.s0 + tt * hm.h;
    slope_out = hm.slope(tt);
    return true;
}

}  // namespace

double ScatteringTable::gamma(double x) const {
    std::vector<double> uw = unwrap(theta);
    double g = 0.0;
    for (const auto &b : branches) {
        for (int m = -2; m <= 2; ++m) {
            double xx = x + two_pi * m;
            double sv, sl;
            if (branch_invert(*this, uw, b, xx, sv, sl)) {
                if (sl == 0.0) return std::numeric_limits<double>::infinity();
                g += std::abs(drho_ds(sv) / sl);
            }
        }
    }
    return g;
}

double ScatteringTable::measure_below(double x, double theta_min) const {
    std::vector<double> uw = unwrap(theta);
    double total = 0.0;
    const double cuts[] = {x, theta_min, -theta_min, pi};
    for (const auto &b : branches) {
        std::vector<double> ss{s[b.first], s[b.last]};
        for (double c : cuts) {
            for (int m = -3; m <= 3; ++m) {
                double sv, sl;
                if (branch_invert(*this, uw, b, c + two_pi * m, sv, sl)) ss.push_back(sv);
            }
        }
        std::sort(ss.begin(), ss.end());
        for (std::size_t k = 0; k + 1 < ss.size(); ++k) {
            if (ss[k + 1] <= ss[k]) continue;
            double th = theta_at_s(0.5 * (ss[k] + ss[k + 1]));
            if (th <= x && std::abs(th) >= theta_min) {
                double r0 = rho_max * std::sin(0.5 * pi * ss[k]);
                double r1 = rho_max * std::sin(0.5 * pi * ss[k + 1]);
                total += r1 - r0;
            }
        }
    }
    return total;
}

double ScatteringTable::measure_cut(double theta_min) const { return measure_below(pi, theta_min); }

std::complex<double> ScatteringTable::fourier_integral(int k) const {
    std::vector<double> uw = unwrap(theta);
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        Hermite hm = segment(*this, uw, i);
        auto re = [&](double sv) {
            double th = hm.value((sv - hm.s0) / hm.h);
            return (std::cos(k * th) - 1.0) * drho_ds(sv);
        };
        auto im = [&](double sv) {
            double th = hm.value((sv - hm.s0) / hm.h);
            return std::sin(k * th) * drho_ds(sv);
        };
        acc += std::complex<double>(gauss<double, 10>::integrate(re, s[i], s[i + 1]),
                                    gauss<double, 10>::integrate(im, s[i], s[i + 1]));
    }
    return acc;
}

double ScatteringTable::moment(int power) const {
    std::vector<double> uw = unwrap(theta);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        Hermite hm = segment(*this, uw, i);
        auto f = [&](double sv) {
            double th = wrap_angle(hm.value((sv - hm.s0) / hm.h));
            return std::pow(th, power) * drho_ds(sv);
        };
        acc += gauss<double, 10>::integrate(f, s[i], s[i + 1]);
    }
    return acc;
}

double ScatteringTable::sin2_integral() const { return -2.0 * fourier_integral(1).real(); }

bool ScatteringTable::odd_symmetric() const {
    std::size_t n = theta.size();
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(wrap_angle(theta[i] + theta[n - 1 - i])) > 1e-8) return false;
    return true;
}

ScatteringTable cross_section(const PotentialSpec &pot, const FieldParams &field, std::size_t nodes,
                              double rho_max) {
    pot.validate();
    if (nodes < 3) throw std::invalid_argument("cross_section: need at least 3 nodes");
    ScatteringTable t;
    t.pot = pot;
    t.field = field;
    t.rho_max = rho_max > 0.0 ? rho_max : pot.unit_radius();
    if (!std::isfinite(t.rho_max)) throw std::invalid_argument("cross_section: rho range must be finite");
    const bool fieldless = field.B == 0.0;
    auto angle = [&](double sv) {
        double r = t.rho_max * std::sin(0.5 * pi * std::clamp(sv, -1.0, 1.0));
        return fieldless ? angle_no_field(r, pot) : angle_with_field(r, pot, field);
    };
    t.s.resize(nodes);
    t.rho.resize(nodes);
    t.theta.resize(nodes);
    t.dtheta_ds.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        t.s[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(nodes - 1);
        t.rho[i] = t.rho_max * std::sin(0.5 * pi * t.s[i]);
        t.theta[i] = angle(t.s[i]);
    }
    t.rho.front() = -t.rho_max;
    t.rho.back() = t.rho_max;
    const double ds = t.s[1] - t.s[0];

    auto fd = [&](std::size_t i) {
        auto diff = [&](double h) {
            double sv = t.s[i];
            if (i == 0) return (-3.0 * t.theta[0] + 4.0 * angle(sv + h) - angle(sv + 2 * h)) / (2 * h);
            if (i == nodes - 1) return (3.0 * t.theta[i] - 4.0 * angle(sv - h) + angle(sv - 2 * h)) / (2 * h);
            return wrap_angle(angle(sv + h) - angle(sv - h)) / (2 * h);
        };
        double h = 0.25 * ds;
        return (4.0 * diff(0.5 * h) - diff(h)) / 3.0;
    };

    const bool analytic = fieldless && pot.kind != PotentialKind::HardDisk;
    for (std::size_t i = 0; i < nodes; ++i) {
        if (pot.is_hard() && t.rho_max == 1.0) {
            t.dtheta_ds[i] = -pi;
        } else if (analytic && i > 0 && i + 1 < nodes && t.rho[i] != 0.0) {
            t.dtheta_ds[i] = angle_derivative_no_field(t.rho[i], pot) * t.drho_ds(t.s[i]);
        } else {
            t.dtheta_ds[i] = fd(i);
        }
        if (!std::isfinite(t.dtheta_ds[i])) t.dtheta_ds[i] = fd(i);
    }
    // field-free soft potentials leave the support tangentially: d theta / d rho -> 0 at the edge
    if (analytic) t.dtheta_ds.front() = t.dtheta_ds.back() = 0.0;

    std::vector<double> uw = unwrap(t.theta);
    t.theta_unwrapped = uw;
    // spline route, on the unwrapped angle
    t.dtheta_ds_spline.resize(nodes);
    {
        boost::math::interpolators::cardinal_cubic_b_spline<double> sp(uw.begin(), uw.end(), t.s[0], ds);
        for (std::size_t i = 0; i < nodes; ++i) t.dtheta_ds_spline[i] = sp.prime(t.s[i]);
    }

    Branch cur;
    cur.first = 0;
    int dir = 0;
    for (std::size_t i = 0; i + 1 < nodes; ++i) {
        double d = uw[i + 1] - uw[i];
        int sd = d > 0.0 ? 1 : (d < 0.0 ? -1 : dir);
        if (dir == 0) dir = sd;
        if (sd != dir && sd != 0) {
            cur.last = i;
            cur.increasing = dir > 0;
            t.branches.push_back(cur);
            t.turning_angles.push_back(t.theta[i]);
            cur = Branch{};
            cur.first = i;
            dir = sd;
        }
    }
    cur.last = nodes - 1;
    cur.increasing = dir >= 0;
    t.branches.push_back(cur);
    for (auto &b : t.branches) {
        b.theta_lo = std::min(uw[b.first], uw[b.last]);
        b.theta_hi = std::max(uw[b.first], uw[b.last]);
    }
    return t;
}

void write_table_csv(const ScatteringTable &t, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# maglorentz scattering table v1\n";
    out << "# potential " << t.pot.describe() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", t.field.B);
    out << "# B " << buf << " nodes " << t.size() << " branches " << t.branches.size() << "\n";
    out << "rho,theta,dtheta_drho\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", t.rho[i], t.theta[i], t.dtheta_drho(i));
        out << line;
    }
}

// ---------------------------------------------------------------- samplers

AngleSampler::AngleSampler(const ScatteringTable &t, double theta_min) {
    if (theta_min <= 0.0 && t.pot.kind == PotentialKind::InversePower)
        throw std::invalid_argument("sampler: zero cutoff with a divergent cross section");
    theta_min = std::max(theta_min, 0.0);
    constexpr int n_uniform = 4096;
    for (int i = 0; i <= n_uniform; ++i) grid_.push_back(-pi + two_pi * i / n_uniform);
    if (theta_min > 0.0 && theta_min < 1.0) {
        constexpr int n_log = 1024;
        double l0 = std::log(theta_min);
        for (int i = 0; i <= n_log; ++i) {
            double v = std::exp(l0 - l0 * i / n_log);
            grid_.push_back(v);
            grid_.push_back(-v);
        }
    }
    if (theta_min > 0.0) {
        grid_.push_back(theta_min);
        grid_.push_back(-theta_min);
    }
    std::sort(grid_.begin(), grid_.end());
    grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
    total_ = t.measure_cut(theta_min);
    if (!(total_ > 0.0)) throw std::invalid_argument("sampler: empty angular support above the cutoff");
    cdf_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) cdf_[i] = t.measure_below(grid_[i], theta_min) / total_;
    for (std::size_t i = 1; i < cdf_.size(); ++i) cdf_[i] = std::max(cdf_[i], cdf_[i - 1]);
    cdf_.front() = 0.0;
    cdf_.back() = 1.0;
}

double AngleSampler::cdf(double x) const {
    auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    if (it == grid_.begin()) return 0.0;
    if (it == grid_.end()) return 1.0;
    std::size_t j = static_cast<std::size_t>(it - grid_.begin()) - 1;
    double w = (x - grid_[j]) / (grid_[j + 1] - grid_[j]);
    return cdf_[j] + w * (cdf_[j + 1] - cdf_[j]);
}

double AngleSampler::sample(Stream &rng) const {
    double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t j = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
    if (j + 1 >= grid_.size()) return grid_.back();
    double span = cdf_[j + 1] - cdf_[j];
    double w = span > 0.0 ? (u - cdf_[j]) / span : 0.0;
    return grid_[j] + w * (grid_[j + 1] - grid_[j]);
}

double sample_uniform_rho(const ScatteringTable &t, Stream &rng) {
    return t.theta_at(rng.uniform(-t.rho_max, t.rho_max));
}

// ---------------------------------------------------------------- diffusion

double landau_inner_integral(double rho, const RadialProfile &profile) {
    double ra = std::abs(rho);
    if (ra >= 1.0 || ra == 0.0) return 0.0;
    return quad(
        [&](double psi) {
            double r = ra / std::sin(psi);
            return r * profile.dphi(r);
        },
        std::asin(ra), 0.5 * pi, 1e-13);
}

double landau_diffusion_explicit(const RadialProfile &profile, double mu) {
    double I = quad(
        [&](double r) {
            double v = landau_inner_integral(r, profile);
            return v * v;
        },
        0.0, 1.0, 1e-12);
    return 4.0 * mu * I;
}

DiffusionCoefficient landau_diffusion_coefficient(const PotentialSpec &pot, double mu,
                                                  const std::vector<double> &eps_list) {
    if (pot.kind != PotentialKind::SmoothCompact)
        throw std::invalid_argument("diffusion coefficient needs a smooth compact potential");
    DiffusionCoefficient d;
    d.explicit_value = landau_diffusion_explicit(pot.profile, mu);
    d.half_mu_value = d.explicit_value / 4.0;
    for (double e : eps_list) {
        PotentialSpec p = pot;
        p.eps = e;
        ScatteringTable t = cross_section(p, FieldParams{0.0, 1});
        double pref = 0.5 * mu * std::pow(e, -2.0 * pot.alpha);
        d.eps.push_back(e);
        d.limit_value.push_back(pref * t.moment(2));
        d.finite_value.push_back(pref * t.sin2_integral());
    }
    return d;
}

}  // namespace mlg

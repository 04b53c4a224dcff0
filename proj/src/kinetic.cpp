#include "maglorentz/kinetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include <unsupported/Eigen/FFT>

#include "maglorentz/parallel.hpp"

namespace mlg {

using cplx = std::complex<double>;

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_nphi(int n) {
    if (!power_of_two(n) || n < 4) throw std::invalid_argument("angular grid: nphi must be a power of two >= 4");
}

std::vector<cplx> fwd(const double *f, int n) {
    thread_local Eigen::FFT<double> fft;
    std::vector<cplx> in(f, f + n), out;
    fft.fwd(out, in);
    return out;
}

void inv(const std::vector<cplx> &F, double *f) {
    thread_local Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.inv(out, F);
    for (std::size_t i = 0; i < out.size(); ++i) f[i] = out[i].real();
}

// multiply every cell's angular spectrum by mult[j]
void apply_multiplier(AngularField &f, const std::vector<cplx> &mult) {
    const int n = f.nphi;
    parallel_for(static_cast<std::size_t>(f.cells()), 1, [&](std::size_t c) {
        double *row = f.cell(static_cast<int>(c));
        auto F = fwd(row, n);
        for (int j = 0; j < n; ++j) F[j] *= mult[j];
        // the zero mode is carried over untouched so the mass is bit-stable
        double before = 0.0;
        for (int j = 0; j < n; ++j) before += row[j];
        inv(F, row);
        if (mult[0] == cplx(1.0, 0.0)) {
            double after = 0.0;
            for (int j = 0; j < n; ++j) after += row[j];
            double shift = (before - after) / n;
            for (int j = 0; j < n; ++j) row[j] += shift;
        }
    });
}

std::vector<cplx> rotation_multiplier(int n, double angle) {
    std::vector<cplx> m(n);
    for (int j = 0; j < n; ++j) {
        int k = mode_of_index(j, n);
        m[j] = std::polar(1.0, -k * angle);
    }
    // keep the Nyquist mode real so the output stays real
    m[n / 2] = cplx(std::cos(0.5 * n * angle), 0.0);
    return m;
}

void fft2(std::vector<cplx> &a, int nx, int ny, bool inverse) {
    thread_local Eigen::FFT<double> fft;
    std::vector<cplx> line, out;
    line.resize(nx);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) line[ix] = a[static_cast<std::size_t>(iy) * nx + ix];
        if (inverse) fft.inv(out, line); else fft.fwd(out, line);
        for (int ix = 0; ix < nx; ++ix) a[static_cast<std::size_t>(iy) * nx + ix] = out[ix];
    }
    line.resize(ny);
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) line[iy] = a[static_cast<std::size_t>(iy) * nx + ix];
        if (inverse) fft.inv(out, line); else fft.fwd(out, line);
        for (int iy = 0; iy < ny; ++iy) a[static_cast<std::size_t>(iy) * nx + ix] = out[iy];
    }
}

// int_{a1}^{a2} cos(a) e^{i (q a + c)} da
cplx cos_phase_integral(double a1, double a2, double q, double c) {
    auto E = [&](double p) -> cplx {
        if (p == 0.0) return {a2 - a1, 0.0};
        return (std::polar(1.0, p * a2) - std::polar(1.0, p * a1)) / cplx(0.0, p);
    };
    return std::polar(1.0, c) * 0.5 * (E(q + 1.0) + E(q - 1.0));
}

struct Piece {
    double a1, a2;
    double slope;   // shift = slope * a + offset
    double offset;
};

// hemisphere pieces of the lag-k n-integral; a = angle(n) - angle(v)
std::vector<Piece> lag_pieces(int k, double fixed_theta) {
    std::vector<Piece> p;
    if (std::isnan(fixed_theta)) {
        p.push_back({0.0, 0.5 * pi, 2.0 + 2.0 * k, pi * (1 - k)});
        p.push_back({-0.5 * pi, 0.0, 2.0 + 2.0 * k, pi * (1 + k)});
        p.push_back({0.5 * pi, pi, -2.0 * k, k * pi});
        p.push_back({-pi, -0.5 * pi, -2.0 * k, -k * pi});
    } else {
        p.push_back({-0.5 * pi, 0.5 * pi, 2.0, pi - k * fixed_theta});
        p.push_back({0.5 * pi, 1.5 * pi, 0.0, -k * fixed_theta});
    }
    return p;
}

}  // namespace

int mode_of_index(int j, int n) { return j <= n / 2 ? j : j - n; }

// ---------------------------------------------------------------- field

AngularField AngularField::homogeneous_field(int nphi, const std::function<double(double)> &f) {
    check_nphi(nphi);
    AngularField a;
    a.homogeneous = true;
    a.nphi = nphi;
    a.values.resize(nphi);
    for (int j = 0; j < nphi; ++j) a.values[j] = f(a.phi(j));
    return a;
}

AngularField AngularField::gridded_field(const SpatialGrid &grid, int nphi,
                                         const std::function<double(double, double, double)> &f) {
    check_nphi(nphi);
    if (grid.nx < 1 || grid.ny < 1 || !(grid.dx > 0.0) || !(grid.dy > 0.0))
        throw std::invalid_argument("angular field: bad spatial grid");
    AngularField a;
    a.homogeneous = false;
    a.grid = grid;
    a.nphi = nphi;
    a.values.resize(static_cast<std::size_t>(grid.nx) * grid.ny * nphi);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            Vec2 c = grid.center(ix, iy);
            double *row = a.cell(iy * grid.nx + ix);
            for (int j = 0; j < nphi; ++j) row[j] = f(c.x, c.y, a.phi(j));
        }
    return a;
}

double AngularField::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * (two_pi / nphi) * (homogeneous ? 1.0 : grid.cell_area());
}

double AngularField::min_value() const { return *std::min_element(values.begin(), values.end()); }

std::vector<double> AngularField::angular_marginal() const {
    std::vector<double> m(nphi, 0.0);
    double w = homogeneous ? 1.0 : grid.cell_area();
    for (int c = 0; c < cells(); ++c)
        for (int j = 0; j < nphi; ++j) m[j] += w * cell(c)[j];
    return m;
}

std::complex<double> AngularField::mode(int m) const {
    auto g = angular_marginal();
    cplx s = 0.0;
    double tot = 0.0;
    for (int j = 0; j < nphi; ++j) {
        s += g[j] * std::polar(1.0, -m * phi(j));
        tot += g[j];
    }
    return s / tot;
}

// ---------------------------------------------------------------- kernels

const char *fg_mode_name(FgMode m) {
    switch (m) {
    case FgMode::MemoryReads: return "memory_reads";
    case FgMode::Literal: return "literal";
    case FgMode::Off: return "off";
    case FgMode::Active: return "active";
    }
    return "?";
}

FgMode parse_fg_mode(const std::string &s) {
    for (FgMode m : {FgMode::MemoryReads, FgMode::Literal, FgMode::Off, FgMode::Active})
        if (s == fg_mode_name(m)) return m;
    throw std::invalid_argument("unknown f^G mode '" + s + "'");
}

const char *kernel_name(KernelKind k) {
    switch (k) {
    case KernelKind::None: return "none";
    case KernelKind::BoltzmannEps: return "boltzmann_eps";
    case KernelKind::TruncatedBoltzmann: return "truncated_boltzmann";
    case KernelKind::UncutBoltzmann: return "uncut_boltzmann";
    case KernelKind::Landau: return "landau";
    case KernelKind::HardDisk: return "hard_disk";
    case KernelKind::HardDiskGBE: return "hard_disk_gbe";
    }
    return "?";
}

CollisionKernel landau_kernel(double xi, int nphi) {
    check_nphi(nphi);
    if (!(xi >= 0.0)) throw std::invalid_argument("landau kernel: xi must be >= 0");
    CollisionKernel K;
    K.kind = KernelKind::Landau;
    K.nphi = nphi;
    K.xi = xi;
    K.lambda.resize(nphi);
    for (int j = 0; j < nphi; ++j) {
        double m = mode_of_index(j, nphi);
        K.lambda[j] = -xi * m * m;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "landau(xi=%.17g)", xi);
    K.id = buf;
    return K;
}

CollisionKernel hard_disk_kernel(double mu, int nphi) {
    check_nphi(nphi);
    CollisionKernel K;
    K.kind = KernelKind::HardDisk;
    K.nphi = nphi;
    K.mu = mu;
    K.nu = 2.0 * mu;
    K.rate = 2.0 * mu;
    K.lambda.resize(nphi);
    for (int j = 0; j < nphi; ++j) {
        double m = mode_of_index(j, nphi);
        K.lambda[j] = j == 0 ? 0.0 : mu * (-2.0 / (4.0 * m * m - 1.0) - 2.0);
    }
    K.table = std::make_shared<ScatteringTable>(cross_section(PotentialSpec::hard_disk(1.0), FieldParams{0.0, 1}));
    K.uniform_rho = true;
    char buf[64];
    std::snprintf(buf, sizeof buf, "hard_disk(mu=%.17g)", mu);
    K.id = buf;
    return K;
}

static void table_multipliers(CollisionKernel &K, double pref) {
    K.lambda.assign(K.nphi, 0.0);
    for (int j = 1; j <= K.nphi / 2; ++j) {
        cplx v = pref * K.table->fourier_integral(j);
        K.lambda[j] = v;
        if (j < K.nphi / 2) K.lambda[K.nphi - j] = std::conj(v);
        else K.lambda[j] = v.real();
    }
}

CollisionKernel boltzmann_kernel(const ScalingRegime &regime, const FieldParams &field, int nphi, std::size_t nodes) {
    check_nphi(nphi);
    regime.validate();
    CollisionKernel K;
    K.nphi = nphi;
    K.mu = regime.mu;
    K.kind = regime.kind == RegimeKind::LongRangeTruncated ? KernelKind::TruncatedBoltzmann : KernelKind::BoltzmannEps;
    PotentialSpec pot = regime.potential();
    K.table = std::make_shared<ScatteringTable>(cross_section(pot, field, nodes));
    // mu_eps eps per unit rho
    double pref = regime.intensity() * regime.eps;
    table_multipliers(K, pref);
    K.rate = pref * 2.0 * K.table->rho_max;
    K.uniform_rho = true;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s(%s,mu=%.17g,B=%.17g)", kernel_name(K.kind), pot.describe().c_str(), regime.mu,
                  field.B);
    K.id = buf;
    return K;
}

CollisionKernel uncut_kernel(double s, double mu, double theta_min, int nphi, std::size_t nodes) {
    check_nphi(nphi);
    if (!(theta_min > 0.0)) throw std::invalid_argument("uncut kernel: theta_min must be > 0");
    PotentialSpec pot = PotentialSpec::inverse_power(s);
    double rho_cut = rho_for_angle(theta_min, pot, 1.0);
    double rate = mu * 2.0 * rho_cut;
    if (!(rate < 1e7)) throw std::invalid_argument("uncut kernel: jump rate overflow, raise theta_min");
    CollisionKernel K;
    K.kind = KernelKind::UncutBoltzmann;
    K.nphi = nphi;
    K.mu = mu;
    K.table = std::make_shared<ScatteringTable>(cross_section(pot, FieldParams{0.0, 1}, nodes, rho_cut));
    table_multipliers(K, mu);
    K.sampler = std::make_shared<AngleSampler>(*K.table, theta_min);
    K.rate = mu * K.sampler->total_measure();
    char buf[128];
    std::snprintf(buf, sizeof buf, "uncut_boltzmann(s=%.17g,mu=%.17g,theta_min=%.17g)", s, mu, theta_min);
    K.id = buf;
    return K;
}

std::vector<std::complex<double>> gbe_lag_multipliers(int k, int nphi, double fixed_theta) {
    check_nphi(nphi);
    auto pieces = lag_pieces(k, fixed_theta);
    std::vector<cplx> out(nphi);
    for (int j = 0; j < nphi; ++j) {
        double m = mode_of_index(j, nphi);
        cplx s = 0.0;
        for (const auto &p : pieces) s += cos_phase_integral(p.a1, p.a2, m * p.slope, m * p.offset);
        out[j] = s;
    }
    out[0] = 0.0;
    out[nphi / 2] = out[nphi / 2].real();
    return out;
}

std::vector<double> gbe_lag_apply_bruteforce(int k, const std::vector<double> &g, int n_quad, double fixed_theta) {
    const int n = static_cast<int>(g.size());
    check_nphi(n);
    if (n_quad % 4 != 0) throw std::invalid_argument("bruteforce: n_quad must be a multiple of 4");
    // trigonometric interpolant of g
    std::vector<double> re(n / 2 + 1), im(n / 2 + 1);
    for (int m = 0; m <= n / 2; ++m) {
        cplx s = 0.0;
        for (int l = 0; l < n; ++l) s += g[l] * std::polar(1.0, -m * two_pi * l / n);
        re[m] = s.real() / n;
        im[m] = s.imag() / n;
    }
    auto interp = [&](double x) {
        double v = re[0];
        for (int m = 1; m < n / 2; ++m) v += 2.0 * (re[m] * std::cos(m * x) - im[m] * std::sin(m * x));
        v += re[n / 2] * std::cos(0.5 * n * x);
        return v;
    };
    auto shift = [&](double a) {
        if (!std::isnan(fixed_theta)) return std::abs(a) < 0.5 * pi ? 2.0 * a + pi - k * fixed_theta : -k * fixed_theta;
        if (std::abs(a) <= 0.5 * pi) {
            double th = (a >= 0.0 ? pi : -pi) - 2.0 * a;  // pre to post
            return 2.0 * a + pi - k * th;
        }
        double th = a > 0.0 ? 2.0 * a - pi : 2.0 * a + pi;
        return -k * th;
    };
    std::vector<double> out(n, 0.0);
    const double h = two_pi / n_quad;
    for (int j = 0; j < n; ++j) {
        double phi = two_pi * j / n, s = 0.0;
        for (int q = 0; q < n_quad; ++q) {
            double a = -pi + q * h;
            double w = std::cos(a);
            if (std::abs(std::abs(a) - 0.5 * pi) < 1e-12) continue;
            s += w * interp(phi + shift(a));
        }
        out[j] = s * h;
    }
    return out;
}

CollisionKernel gbe_kernel(double mu, const FieldParams &field, int nphi, const GbeOptions &opt) {
    if (!(field.B > 0.0)) throw std::invalid_argument("gbe kernel: needs B > 0");
    CollisionKernel K = hard_disk_kernel(mu, nphi);
    K.kind = KernelKind::HardDiskGBE;
    K.T_L = field.T_L();
    K.fixed_theta = opt.fixed_theta;
    K.fg = opt.fg;
    char buf[160];
    std::snprintf(buf, sizeof buf, "hard_disk_gbe(mu=%.17g,T_L=%.17g,nu=%.17g%s)", mu, K.T_L, K.nu,
                  std::isnan(opt.fixed_theta) ? "" : ",fixed_theta");
    K.id = buf;
    return K;
}

const std::vector<std::complex<double>> &CollisionKernel::memory_multipliers(int k) const {
    if (k < 1) throw std::invalid_argument("memory multipliers: lag must be >= 1");
    while (static_cast<int>(memory.size()) < k)
        memory.push_back(gbe_lag_multipliers(static_cast<int>(memory.size()) + 1, nphi, fixed_theta));
    return memory[k - 1];
}

// ---------------------------------------------------------------- transport

AngularField transport_step(const AngularField &f, double dt, const FieldParams &field, const TransportOptions &opt) {
    AngularField out = f;
    out.t = f.t + dt;
    const int n = f.nphi;
    const double Omega = field.B > 0.0 ? field.Omega() : 0.0;
    if (f.homogeneous) {
        if (Omega != 0.0) apply_multiplier(out, rotation_multiplier(n, Omega * dt));
        return out;
    }
    if (field.B > 0.0 && dt > field.T_L() / 16.0 * (1.0 + 1e-12))
        throw std::invalid_argument("transport: dt exceeds T_L/16");
    // angular rotation first, then the spatial translation of each angle slice
    AngularField rot = f;
    if (Omega != 0.0) apply_multiplier(rot, rotation_multiplier(n, Omega * dt));
    const auto &g = f.grid;
    const int nx = g.nx, ny = g.ny;
    for (int j = 0; j < n; ++j) {
        PhaseState back = cyclotron_advance({{0.0, 0.0}, unit_from_angle(f.phi(j))}, -dt, field);
        Vec2 d = back.x;  // foot = x + d
        if (opt.interp == SpatialInterp::Spectral) {
            if (g.boundary != Boundary::Periodic) throw std::invalid_argument("transport: spectral needs periodic");
            std::vector<cplx> a(static_cast<std::size_t>(nx) * ny);
            for (int c = 0; c < nx * ny; ++c) a[c] = rot.cell(c)[j];
            fft2(a, nx, ny, false);
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    int kx = mode_of_index(ix, nx), ky = mode_of_index(iy, ny);
                    double ph = two_pi * (kx * d.x / (nx * g.dx) + ky * d.y / (ny * g.dy));
                    cplx m = std::polar(1.0, ph);
                    if ((nx % 2 == 0 && ix == nx / 2) || (ny % 2 == 0 && iy == ny / 2)) m = std::cos(ph);
                    a[static_cast<std::size_t>(iy) * nx + ix] *= m;
                }
            fft2(a, nx, ny, true);
            for (int c = 0; c < nx * ny; ++c) out.cell(c)[j] = a[c].real();
        } else {
            double ux = d.x / g.dx, uy = d.y / g.dy;
            double fx = std::floor(ux), fy = std::floor(uy);
            double wx = ux - fx, wy = uy - fy;
            long sx = static_cast<long>(fx), sy = static_cast<long>(fy);
            auto at = [&](long ix, long iy) -> double {
                if (g.boundary == Boundary::Periodic) {
                    ix = ((ix % nx) + nx) % nx;
                    iy = ((iy % ny) + ny) % ny;
                } else if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) {
                    return 0.0;
                }
                return rot.cell(static_cast<int>(iy * nx + ix))[j];
            };
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    long bx = ix + sx, by = iy + sy;
                    out.cell(iy * nx + ix)[j] = (1 - wx) * (1 - wy) * at(bx, by) + wx * (1 - wy) * at(bx + 1, by) +
                                               (1 - wx) * wy * at(bx, by + 1) + wx * wy * at(bx + 1, by + 1);
                }
        }
    }
    return out;
}

AngularField collide_step(const AngularField &f, const CollisionKernel &kernel, double dt) {
    if (kernel.kind == KernelKind::None) {
        AngularField out = f;
        return out;
    }
    if (kernel.nphi != f.nphi) throw std::invalid_argument("collide: kernel built for a different nphi");
    std::vector<cplx> m(f.nphi);
    for (int j = 0; j < f.nphi; ++j) m[j] = std::exp(kernel.lambda[j] * dt);
    m[0] = 1.0;
    AngularField out = f;
    apply_multiplier(out, m);
    return out;
}

// ---------------------------------------------------------------- GBE

namespace {

double fg_factor(const CollisionKernel &K, long read_step, int steps_per_period) {
    switch (K.fg) {
    case FgMode::Off:
    case FgMode::Active: return 1.0;
    case FgMode::MemoryReads: return 1.0 - std::exp(-K.nu * K.T_L);
    case FgMode::Literal: return read_step > steps_per_period ? 1.0 - std::exp(-K.nu * K.T_L) : 1.0;
    }
    return 1.0;
}

// memory sum at step index n (time n dt), in Fourier space
std::vector<cplx> memory_source(const GbeHistory &h, long n, const CollisionKernel &K) {
    const int N = K.nphi;
    std::vector<cplx> S(N, 0.0);
    const int P = h.steps_per_period;
    for (int k = 1; static_cast<long>(k) * P <= n; ++k) {
        long idx = n - static_cast<long>(k) * P;
        if (idx < 0 || idx >= static_cast<long>(h.frames.size()) || h.frames[idx].empty())
            throw std::out_of_range("gbe: missing history lag");
        const auto &M = K.memory_multipliers(k);
        double w = K.mu * std::exp(-K.nu * k * K.T_L) * fg_factor(K, idx, P);
        if (w == 0.0) break;
        for (int j = 0; j < N; ++j) S[j] += w * M[j] * h.frames[idx][j];
    }
    return S;
}

AngularField rotated(const AngularField &f, double angle) {
    AngularField out = f;
    if (angle != 0.0) apply_multiplier(out, rotation_multiplier(f.nphi, angle));
    return out;
}

int steps_per_period(double dt, double T_L) {
    double r = T_L / dt;
    long p = std::lround(r);
    if (p < 1 || std::abs(r - p) > 1e-9 * r) throw std::invalid_argument("gbe: dt must divide T_L");
    return static_cast<int>(p);
}

}  // namespace

AngularField gbe_step(const GbeHistory &history, const AngularField &current, double dt, const CollisionKernel &kernel,
                      const FieldParams &field) {
    if (kernel.kind != KernelKind::HardDiskGBE) throw std::invalid_argument("gbe_step: needs a HardDiskGBE kernel");
    if (!current.homogeneous) throw std::invalid_argument("gbe_step: homogeneous fields only");
    if (kernel.nphi != current.nphi) throw std::invalid_argument("gbe_step: kernel built for a different nphi");
    const int N = current.nphi;
    int P = steps_per_period(dt, kernel.T_L);
    if (P != history.steps_per_period) throw std::invalid_argument("gbe_step: history sampled with another dt");
    long n = std::lround(current.t / dt);
    std::vector<cplx> E(N);
    auto rot = rotation_multiplier(N, field.Omega() * dt);
    for (int j = 0; j < N; ++j) E[j] = std::exp(kernel.lambda[j] * dt) * rot[j];
    E[0] = 1.0;
    auto F = fwd(current.values.data(), N);
    auto S0 = memory_source(history, n, kernel);
    auto S1 = memory_source(history, n + 1, kernel);
    for (int j = 0; j < N; ++j) F[j] = E[j] * F[j] + 0.5 * dt * (E[j] * S0[j] + S1[j]);
    F[0] = fwd(current.values.data(), N)[0];
    AngularField out = current;
    out.t = current.t + dt;
    inv(F, out.values.data());
    double before = 0.0, after = 0.0;
    for (int j = 0; j < N; ++j) {
        before += current.values[j];
        after += out.values[j];
    }
    for (int j = 0; j < N; ++j) out.values[j] += (before - after) / N;
    return out;
}

// ---------------------------------------------------------------- solve

SolveResult solve(const AngularField &f0, const CollisionKernel &kernel, const FieldParams &field, double t_end,
                  double dt, const SolveOptions &opt) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("solve: need dt > 0 and t_end >= 0");
    long steps = std::lround(t_end / dt);
    if (std::abs(steps * dt - t_end) > 1e-9 * std::max(1.0, t_end))
        throw std::invalid_argument("solve: dt must divide t_end");
    SolveResult res;
    AngularField f = f0;
    const double m0 = f0.mass();
    res.min_value = f0.min_value();
    std::vector<double> cps = opt.checkpoints;
    std::sort(cps.begin(), cps.end());
    std::size_t next_cp = 0;
    auto record = [&](long i) {
        while (next_cp < cps.size() && std::abs(cps[next_cp] - i * dt) <= 0.5 * dt) {
            res.checkpoints.push_back(f);
            ++next_cp;
        }
    };
    auto monitor = [&](long i) {
        double m = f.mass();
        double drift = std::abs(m - m0) / std::max(std::abs(m0), 1e-300);
        res.max_mass_drift = std::max(res.max_mass_drift, drift);
        res.min_value = std::min(res.min_value, f.min_value());
        if (opt.monitor && (drift > 1e-9 || res.min_value < -1e-6)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "solve: unstable at step %ld (t=%.6g): mass drift %.3g, min f %.3g", i,
                          f.t, drift, res.min_value);
            throw std::runtime_error(buf);
        }
    };
    record(0);
    if (kernel.kind == KernelKind::HardDiskGBE) {
        GbeHistory h;
        h.dt = dt;
        h.steps_per_period = steps_per_period(dt, kernel.T_L);
        h.frames.reserve(steps + 1);
        h.frames.push_back(fwd(f.values.data(), f.nphi));
        const bool split = kernel.fg == FgMode::Active;
        const double trapped = std::exp(-kernel.nu * kernel.T_L);
        AngularField act = f;
        for (long i = 0; i < steps; ++i) {
            act = gbe_step(h, act, dt, kernel, field);
            if (split && i + 1 == h.steps_per_period)
                for (std::size_t q = 0; q < act.values.size(); ++q)
                    act.values[q] -= trapped * rotated(f0, field.Omega() * act.t).values[q];
            h.frames.push_back(fwd(act.values.data(), act.nphi));
            f = act;
            if (split && i + 1 >= h.steps_per_period) {
                AngularField free = rotated(f0, field.Omega() * act.t);
                for (std::size_t q = 0; q < f.values.size(); ++q) f.values[q] += trapped * free.values[q];
            }
            monitor(i + 1);
            record(i + 1);
        }
    } else {
        for (long i = 0; i < steps; ++i) {
            double t0 = f.t;
            f = transport_step(f, 0.5 * dt, field, opt.transport);
            f = collide_step(f, kernel, dt);
            f = transport_step(f, 0.5 * dt, field, opt.transport);
            f.t = t0 + dt;
            monitor(i + 1);
            record(i + 1);
        }
    }
    res.final_field = f;
    res.steps = steps;
    return res;
}

// ---------------------------------------------------------------- DSMC

DsmcResult dsmc_sample(const PhaseSampler &f0, const CollisionKernel &kernel, const FieldParams &field, double t_end,
                       std::uint64_t n_particles, std::uint64_t seed, int nphi, unsigned workers,
                       const SpatialGrid *grid) {
    check_nphi(nphi);
    if (kernel.kind == KernelKind::HardDiskGBE) throw std::invalid_argument("dsmc: memory kernels not supported");
    if (kernel.is_jump() && !(kernel.rate < 1e8)) throw std::invalid_argument("dsmc: jump rate overflow");
    if (n_particles == 0) throw std::invalid_argument("dsmc: need particles");
    const int cells = grid ? grid->nx * grid->ny : 1;
    constexpr std::uint64_t block = 4096;
    const std::uint64_t nblocks = (n_particles + block - 1) / block;
    struct Partial {
        std::vector<double> counts;
        double c1r = 0, c1i = 0, c2r = 0, c2i = 0;
        double q1r = 0, q1i = 0, q2r = 0, q2i = 0;
        std::uint64_t jumps = 0, lost = 0;
    };
    std::vector<Partial> parts(nblocks);
    const double bin = two_pi / nphi;
    parallel_for(nblocks, workers, [&](std::size_t b) {
        Partial &P = parts[b];
        P.counts.assign(static_cast<std::size_t>(cells) * nphi, 0.0);
        std::uint64_t lo = b * block, hi = std::min<std::uint64_t>(n_particles, lo + block);
        for (std::uint64_t p = lo; p < hi; ++p) {
            Stream rng(hash_key(seed, p));
            PhaseState s = f0(rng);
            double t = 0.0;
            if (kernel.kind == KernelKind::Landau) {
                s = cyclotron_advance(s, t_end, field);
                double dphi = std::sqrt(2.0 * kernel.xi * t_end) * rng.normal();
                s.v = rotate(s.v, dphi);
            } else if (kernel.is_jump()) {
                while (true) {
                    double tau = rng.exponential(kernel.rate);
                    if (t + tau >= t_end) {
                        s = cyclotron_advance(s, t_end - t, field);
                        break;
                    }
                    s = cyclotron_advance(s, tau, field);
                    t += tau;
                    double th = kernel.uniform_rho ? sample_uniform_rho(*kernel.table, rng) : kernel.sampler->sample(rng);
                    s.v = rotate(s.v, -th);
                    ++P.jumps;
                }
            } else {
                s = cyclotron_advance(s, t_end, field);
            }
            double phi = wrap_positive(angle_of(s.v));
            int j = static_cast<int>(std::floor(phi / bin + 0.5)) % nphi;
            int c = 0;
            if (grid) {
                double ux = (s.x.x - grid->x0) / grid->dx, uy = (s.x.y - grid->y0) / grid->dy;
                long ix = static_cast<long>(std::floor(ux)), iy = static_cast<long>(std::floor(uy));
                if (grid->boundary == Boundary::Periodic) {
                    ix = ((ix % grid->nx) + grid->nx) % grid->nx;
                    iy = ((iy % grid->ny) + grid->ny) % grid->ny;
                } else if (ix < 0 || ix >= grid->nx || iy < 0 || iy >= grid->ny) {
                    ++P.lost;
                    continue;
                }
                c = static_cast<int>(iy * grid->nx + ix);
            }
            P.counts[static_cast<std::size_t>(c) * nphi + j] += 1.0;
            double c1 = std::cos(phi), s1 = -std::sin(phi), c2 = std::cos(2 * phi), s2 = -std::sin(2 * phi);
            P.c1r += c1; P.c1i += s1; P.c2r += c2; P.c2i += s2;
            P.q1r += c1 * c1; P.q1i += s1 * s1; P.q2r += c2 * c2; P.q2i += s2 * s2;
        }
    });
    DsmcResult r;
    Partial tot;
    tot.counts.assign(static_cast<std::size_t>(cells) * nphi, 0.0);
    for (const auto &P : parts) {
        for (std::size_t i = 0; i < tot.counts.size(); ++i) tot.counts[i] += P.counts[i];
        tot.c1r += P.c1r; tot.c1i += P.c1i; tot.c2r += P.c2r; tot.c2i += P.c2i;
        tot.q1r += P.q1r; tot.q1i += P.q1i; tot.q2r += P.q2r; tot.q2i += P.q2i;
        tot.jumps += P.jumps;
    }
    const double N = static_cast<double>(n_particles);
    auto se = [&](double s, double q) {
        double m = s / N;
        return std::sqrt(std::max(q / N - m * m, 0.0) / N);
    };
    r.mode1 = {tot.c1r / N, tot.c1i / N};
    r.mode2 = {tot.c2r / N, tot.c2i / N};
    r.mode1_re_se = se(tot.c1r, tot.q1r);
    r.mode1_im_se = se(tot.c1i, tot.q1i);
    r.mode2_re_se = se(tot.c2r, tot.q2r);
    r.mode2_im_se = se(tot.c2i, tot.q2i);
    r.particles = n_particles;
    r.jumps = tot.jumps;
    r.histogram.homogeneous = grid == nullptr;
    if (grid) r.histogram.grid = *grid;
    r.histogram.nphi = nphi;
    r.histogram.t = t_end;
    const double area = grid ? grid->cell_area() : 1.0;
    r.histogram.values.resize(tot.counts.size());
    r.stderr_.resize(tot.counts.size());
    for (std::size_t i = 0; i < tot.counts.size(); ++i) {
        double p = tot.counts[i] / N;
        r.histogram.values[i] = p / (bin * area);
        r.stderr_[i] = std::sqrt(p * (1.0 - p) / N) / (bin * area);
    }
    return r;
}

// ---------------------------------------------------------------- checkpoints

void write_field_csv(const AngularField &f, const std::string &path, const std::string &kernel_id) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    nlohmann::ordered_json h;
    h["format"] = "maglorentz-field";
    h["version"] = 1;
    h["mode"] = f.homogeneous ? "homogeneous" : "gridded";
    h["nx"] = f.homogeneous ? 1 : f.grid.nx;
    h["ny"] = f.homogeneous ? 1 : f.grid.ny;
    h["nphi"] = f.nphi;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    h["x0"] = num(f.grid.x0);
    h["y0"] = num(f.grid.y0);
    h["dx"] = num(f.grid.dx);
    h["dy"] = num(f.grid.dy);
    h["boundary"] = f.grid.boundary == Boundary::Periodic ? "periodic" : "absorbing";
    h["kernel"] = kernel_id;
    h["time"] = num(f.t);
    os << "# " << h.dump() << "\n";
    os << "x_index,y_index,phi_index,value\n";
    const int nx = f.homogeneous ? 1 : f.grid.nx;
    for (int c = 0; c < f.cells(); ++c)
        for (int j = 0; j < f.nphi; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", f.cell(c)[j]);
            os << (c % nx) << ',' << (c / nx) << ',' << j << ',' << buf << '\n';
        }
}

AngularField read_field_csv(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(is, line);
    if (line.rfind("# ", 0) != 0) throw std::runtime_error("field csv: missing header");
    auto h = nlohmann::json::parse(line.substr(2));
    if (h.at("format") != "maglorentz-field" || h.at("version") != 1)
        throw std::runtime_error("field csv: unsupported format or version");
    AngularField f;
    f.homogeneous = h.at("mode") == "homogeneous";
    f.nphi = h.at("nphi");
    f.grid.nx = h.at("nx");
    f.grid.ny = h.at("ny");
    f.grid.x0 = std::stod(h.at("x0").get<std::string>());
    f.grid.y0 = std::stod(h.at("y0").get<std::string>());
    f.grid.dx = std::stod(h.at("dx").get<std::string>());
    f.grid.dy = std::stod(h.at("dy").get<std::string>());
    f.grid.boundary = h.at("boundary") == "periodic" ? Boundary::Periodic : Boundary::Absorbing;
    f.t = std::stod(h.at("time").get<std::string>());
    f.values.assign(static_cast<std::size_t>(f.cells()) * f.nphi, 0.0);
    std::getline(is, line);
    const int nx = f.homogeneous ? 1 : f.grid.nx;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b, c, v;
        std::getline(ls, a, ',');
        std::getline(ls, b, ',');
        std::getline(ls, c, ',');
        std::getline(ls, v);
        int ix = std::stoi(a), iy = std::stoi(b), j = std::stoi(c);
        f.cell(iy * nx + ix)[j] = std::stod(v);
    }
    return f;
}

}  // namespace mlg

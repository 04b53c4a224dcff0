#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "maglorentz/dynamics.hpp"
#include "maglorentz/medium.hpp"
#include "maglorentz/rng.hpp"
#include "maglorentz/scattering.hpp"

namespace mlg {

enum class Boundary { Periodic, Absorbing };
enum class SpatialInterp { Bilinear, Spectral };

struct SpatialGrid {
    int nx = 1;
    int ny = 1;
    double x0 = 0.0;
    double y0 = 0.0;
    double dx = 1.0;
    double dy = 1.0;
    Boundary boundary = Boundary::Periodic;
    double cell_area() const { return dx * dy; }
    Vec2 center(int ix, int iy) const { return {x0 + (ix + 0.5) * dx, y0 + (iy + 0.5) * dy}; }
};

// f(x, phi) on nphi equispaced angles phi_j = 2 pi j / nphi; homogeneous
// fields carry a single cell of unit area.
struct AngularField {
    bool homogeneous = true;
    SpatialGrid grid;
    int nphi = 64;
    double t = 0.0;
    std::vector<double> values;

    static AngularField homogeneous_field(int nphi, const std::function<double(double)> &f);
    static AngularField gridded_field(const SpatialGrid &grid, int nphi,
                                      const std::function<double(double, double, double)> &f);

    double phi(int j) const { return two_pi * j / nphi; }
    int cells() const { return homogeneous ? 1 : grid.nx * grid.ny; }
    double *cell(int c) { return values.data() + static_cast<std::size_t>(c) * nphi; }
    const double *cell(int c) const { return values.data() + static_cast<std::size_t>(c) * nphi; }
    double mass() const;
    double min_value() const;
    // angular marginal (summed over cells with the cell area)
    std::vector<double> angular_marginal() const;
    // normalized Fourier coefficient c_m = sum f e^{-i m phi} / sum f of the marginal
    std::complex<double> mode(int m) const;
};

enum class KernelKind { None, BoltzmannEps, TruncatedBoltzmann, UncutBoltzmann, Landau, HardDisk, HardDiskGBE };
const char *kernel_name(KernelKind k);

// How the k >= 1 memory reads of the GBE are weighted by the f^G factor.
// Active evolves only the particles still able to collide: at t = T_L the
// never-collided fraction e^{-nu T_L} leaves on its empty orbit and is added
// back as free rotation.
enum class FgMode { MemoryReads, Literal, Off, Active };
const char *fg_mode_name(FgMode m);
FgMode parse_fg_mode(const std::string &s);

struct CollisionKernel {
    KernelKind kind = KernelKind::None;
    std::string id;
    int nphi = 0;
    // lambda[j] for the DFT index j (m = j for j <= nphi/2, m = j - nphi above)
    std::vector<std::complex<double>> lambda;
    double xi = 0.0;
    double rate = 0.0;  // total jump rate
    std::shared_ptr<const ScatteringTable> table;
    std::shared_ptr<const AngleSampler> sampler;
    bool uniform_rho = false;
    // GBE
    double mu = 0.0;
    double nu = 0.0;
    double T_L = 0.0;
    double fixed_theta = std::numeric_limits<double>::quiet_NaN();
    FgMode fg = FgMode::MemoryReads;
    // memory[k - 1][j]: multiplier of the lag-k term, without e^{-nu k T_L} and f^G factors
    mutable std::vector<std::vector<std::complex<double>>> memory;

    const std::vector<std::complex<double>> &memory_multipliers(int k) const;
    bool is_jump() const { return rate > 0.0; }
};

int mode_of_index(int j, int n);

CollisionKernel landau_kernel(double xi, int nphi);
// Markovian hard-disk operator, closed-form multipliers
CollisionKernel hard_disk_kernel(double mu, int nphi);
// BoltzmannEps / TruncatedBoltzmann from the regime's potential and the field
CollisionKernel boltzmann_kernel(const ScalingRegime &regime, const FieldParams &field, int nphi,
                                 std::size_t nodes = 4097);
CollisionKernel uncut_kernel(double s, double mu, double theta_min, int nphi, std::size_t nodes = 4097);
struct GbeOptions {
    double fixed_theta = std::numeric_limits<double>::quiet_NaN();
    FgMode fg = FgMode::MemoryReads;
};
CollisionKernel gbe_kernel(double mu, const FieldParams &field, int nphi, const GbeOptions &opt = {});

// closed-form lag-k multipliers of the n-integral (in units of mu)
std::vector<std::complex<double>> gbe_lag_multipliers(int k, int nphi, double fixed_theta);
// the same operator applied by brute-force quadrature over n on the angular grid
std::vector<double> gbe_lag_apply_bruteforce(int k, const std::vector<double> &g, int n_quad, double fixed_theta);

struct TransportOptions {
    SpatialInterp interp = SpatialInterp::Bilinear;
};

AngularField transport_step(const AngularField &f, double dt, const FieldParams &field,
                            const TransportOptions &opt = {});
AngularField collide_step(const AngularField &f, const CollisionKernel &kernel, double dt);

// Frames of the homogeneous solution at every step n dt; frames[n] must exist
// for each lag read.
struct GbeHistory {
    double dt = 0.0;
    int steps_per_period = 0;
    std::vector<std::vector<std::complex<double>>> frames;  // Fourier coefficients
};

AngularField gbe_step(const GbeHistory &history, const AngularField &current, double dt,
                      const CollisionKernel &kernel, const FieldParams &field);

struct SolveOptions {
    std::vector<double> checkpoints;
    TransportOptions transport;
    bool monitor = true;
};

struct SolveResult {
    AngularField final_field;
    std::vector<AngularField> checkpoints;
    double max_mass_drift = 0.0;
    double min_value = 0.0;
    long steps = 0;
};

SolveResult solve(const AngularField &f0, const CollisionKernel &kernel, const FieldParams &field, double t_end,
                  double dt, const SolveOptions &opt = {});

struct DsmcResult {
    AngularField histogram;
    std::vector<double> stderr_;
    std::complex<double> mode1, mode2;
    double mode1_re_se = 0.0, mode1_im_se = 0.0, mode2_re_se = 0.0, mode2_im_se = 0.0;
    std::uint64_t particles = 0;
    std::uint64_t jumps = 0;
};

using PhaseSampler = std::function<PhaseState(Stream &)>;

DsmcResult dsmc_sample(const PhaseSampler &f0, const CollisionKernel &kernel, const FieldParams &field, double t_end,
                       std::uint64_t n_particles, std::uint64_t seed, int nphi, unsigned workers = 1,
                       const SpatialGrid *grid = nullptr);

void write_field_csv(const AngularField &f, const std::string &path, const std::string &kernel_id);
AngularField read_field_csv(const std::string &path);

}  // namespace mlg

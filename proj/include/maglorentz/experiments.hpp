#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maglorentz/config.hpp"
#include "maglorentz/kinetic.hpp"
#include "maglorentz/medium.hpp"
#include "maglorentz/microsim.hpp"

namespace mlg {

FieldParams field_from(const Config &cfg);
ScalingRegime regime_from(const Config &cfg, double eps);
std::vector<double> eps_list_from(const Config &cfg);
CollisionKernel kernel_from(const Config &cfg, const ScalingRegime &regime, const FieldParams &field);

// f0(phi) proportional to exp(kappa cos phi)
double von_mises(double phi, double kappa);

// ||(L_eps - xi Lap) g||_2 on S1 from the kernel multipliers and the Fourier
// coefficients of g sampled on the kernel's grid
double grazing_operator_gap(const CollisionKernel &boltzmann, double xi, const std::function<double(double)> &g);

double angular_l1(const std::vector<double> &a, const std::vector<double> &b);
double angular_l2(const std::vector<double> &a, const std::vector<double> &b);

struct SlopeFit {
    double slope = 0.0;
    double lo = 0.0, hi = 0.0;  // 95% interval
};
SlopeFit fit_loglog(const std::vector<double> &x, const std::vector<double> &y);

// microsim estimate of f_eps(v, t) on the angular grid, for f0 = von_mises(kappa)
FEpsEstimate microsim_angular(const ScalingRegime &regime, const FieldParams &field, int nphi, double kappa, double t,
                              std::uint64_t n_media, std::uint64_t seed, unsigned workers);

struct ConvergeRow {
    double eps = 0.0;
    double d1 = 0.0, d1_se = 0.0;
    bool d1_inconclusive = false;
    double d2 = 0.0;
    double xi = 0.0;
};

struct ConvergeResult {
    std::vector<ConvergeRow> rows;
    SlopeFit d1_slope, d2_slope;
    bool d1_monotone = false;
};

struct ConvergeParams {
    ScalingRegime regime;  // eps overridden per row
    FieldParams field;
    std::vector<double> eps_list;
    double t_end = 1.0;
    double dt = 1.0 / 64.0;
    int nphi = 32;
    double kappa = 1.0;
    std::uint64_t n_seeds = 400;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    double theta_min = 0.05;  // long-range regime: cutoff of the un-cutoff comparison
    std::size_t nodes = 4097;
};

ConvergeResult converge_study(const ConvergeParams &p);

struct CurvePoint {
    double t = 0.0;
    std::complex<double> micro, micro_se, gbe, markov, gbe_active;
};

struct MemoryComparison {
    std::vector<CurvePoint> hard;    // microsim hard disks, GBE, Markov
    std::vector<CurvePoint> smooth;  // microsim smooth, Markov (gbe columns repeat Markov)
    // paired test over blocks at t = 2 T_L
    std::vector<double> l1_gbe, l1_markov;
    double mean_diff = 0.0, t_stat = 0.0, p_value = 1.0;
    bool hard_closer_to_gbe = false;
    // smooth: k = 1 mode gap to Markov and its block stderr
    double smooth_gap = 0.0, smooth_se = 0.0;
    bool smooth_within = false;
    // t < T_L: max difference of GBE and Markov curves
    double early_gap = 0.0;
};

struct CompareParams {
    double mu = 0.25;
    FieldParams field{2.0, 1};
    double hard_eps = 0.01;
    double smooth_eps = 1e-3;
    double smooth_alpha = 0.1;
    RadialProfile profile = cubic_bump_profile();
    int nphi = 32;
    double kappa = 2.0;
    int samples = 9;
    std::uint64_t n_blocks = 200;
    std::uint64_t block_media = 16;
    std::uint64_t curve_blocks = 25;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    GbeOptions gbe;
    std::size_t nodes = 4097;
};

MemoryComparison compare_memory(const CompareParams &p);

struct RunReport {
    bool ok = true;
    std::vector<std::string> files;
    std::vector<std::string> failures;
};

// Dispatch on run.experiment; writes manifest.ini, CSVs and gnuplot stubs into out.
RunReport run_experiment(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);

RunReport run_scatter(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);
RunReport run_micro(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);
RunReport run_pathology(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);
RunReport run_kinetic(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);
RunReport run_converge(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);
RunReport run_compare_memory(const Config &cfg, const std::string &out, unsigned workers, std::uint64_t seed);

}  // namespace mlg

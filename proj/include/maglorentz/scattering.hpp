#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "maglorentz/dynamics.hpp"
#include "maglorentz/potential.hpp"
#include "maglorentz/rng.hpp"

namespace mlg {

// Angles: theta > 0 rotates the velocity clockwise, v' = R(-theta) v, and is
// reported in (-pi, pi]. rho > 0 means the obstacle center lies to the left
// of the incoming line. rho and times inside are in obstacle units (scale eps).

double hard_disk_angle(double rho);
double angle_no_field(double rho, const PotentialSpec &pot);
double angle_with_field(double rho, const PotentialSpec &pot, const FieldParams &field);
// macroscopic time spent inside the support
double collision_time(double rho, const PotentialSpec &pot, const FieldParams &field);
// d theta / d rho at B = 0 from the differentiated angle integral
double angle_derivative_no_field(double rho, const PotentialSpec &pot);
// impact parameter where |theta| drops to theta_min (B = 0)
double rho_for_angle(double theta, const PotentialSpec &pot, double rho_hi);

struct Branch {
    std::size_t first = 0;
    std::size_t last = 0;
    bool increasing = true;
    double theta_lo = 0.0;
    double theta_hi = 0.0;
};

class ScatteringTable {
public:
    PotentialSpec pot;
    FieldParams field{0.0, 1};
    double rho_max = 1.0;
    std::vector<double> s;
    std::vector<double> rho;
    std::vector<double> theta;
    std::vector<double> theta_unwrapped;
    std::vector<double> dtheta_ds;
    std::vector<double> dtheta_ds_spline;
    std::vector<Branch> branches;
    std::vector<double> turning_angles;

    double drho_ds(double si) const;
    double theta_at(double rho_query) const;
    double theta_at_s(double s_query) const;
    double dtheta_drho(std::size_t i) const;
    // sum over monotone branches of |d rho / d theta|
    double gamma(double theta_query) const;
    // rho-measure of {rho : theta(rho) <= x} restricted to |theta| >= theta_min
    double measure_below(double x, double theta_min) const;
    double measure_cut(double theta_min) const;
    // int d rho (exp(i k theta(rho)) - 1) over the table range
    std::complex<double> fourier_integral(int k) const;
    double moment(int power) const;
    double sin2_integral() const;

    std::size_t size() const { return rho.size(); }
    bool odd_symmetric() const;
};

ScatteringTable cross_section(const PotentialSpec &pot, const FieldParams &field, std::size_t nodes = 4097,
                              double rho_max = 0.0);

void write_table_csv(const ScatteringTable &t, const std::string &path);

// Inverse-CDF sampler over Gamma with a small-angle cutoff.
class AngleSampler {
public:
    AngleSampler(const ScatteringTable &t, double theta_min);
    double sample(Stream &rng) const;
    double total_measure() const { return total_; }
    double cdf(double x) const;

private:
    std::vector<double> grid_;
    std::vector<double> cdf_;
    double total_ = 0.0;
};

double sample_uniform_rho(const ScatteringTable &t, Stream &rng);

struct DiffusionCoefficient {
    double explicit_value = 0.0;  // 2 mu int inner^2
    double half_mu_value = 0.0;   // (mu/2) int inner^2
    std::vector<double> eps;
    std::vector<double> limit_value;  // (mu eps^{-2 alpha}/2) int theta_eps^2
    std::vector<double> finite_value; // (mu eps^{-2 alpha}/2) int 4 sin^2(theta_eps/2)
};

double landau_inner_integral(double rho, const RadialProfile &profile);
double landau_diffusion_explicit(const RadialProfile &profile, double mu);
DiffusionCoefficient landau_diffusion_coefficient(const PotentialSpec &pot, double mu,
                                                  const std::vector<double> &eps_list = {});

}  // namespace mlg

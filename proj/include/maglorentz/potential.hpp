#pragma once

#include <functional>
#include <limits>
#include <string>

namespace mlg {

enum class PotentialKind { HardDisk, SmoothCompact, TruncatedPower, InversePower };

struct RadialProfile {
    std::string name;
    std::function<double(double)> phi;
    std::function<double(double)> dphi;
    std::function<double(double)> ddphi;
};

// phi(r) = (1 - r^2)^3 on [0,1], zero outside
RadialProfile cubic_bump_profile();
// 1 - exp(-k (1 - r)): a wall of height ~1 whose width shrinks like 1/k
RadialProfile steep_wall_profile(double steepness);
RadialProfile zero_profile();

// All lengths below are in units of the scale eps (obstacle frame): the
// tracer sees V(r) with r = |x - c| / eps and moves at unit speed.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::HardDisk;
    RadialProfile profile;
    double eps = 1e-2;
    double alpha = 0.1;
    double s = 3.0;
    double gamma = 0.9;

    static PotentialSpec hard_disk(double eps);
    static PotentialSpec smooth(double eps, double alpha, RadialProfile profile = cubic_bump_profile());
    static PotentialSpec truncated(double eps, double s, double gamma);
    static PotentialSpec inverse_power(double s);

    double unit_radius() const;
    double radius() const;
    double coupling() const;
    double V(double r) const;
    double dV(double r) const;
    bool is_hard() const { return kind == PotentialKind::HardDisk; }
    std::string describe() const;
    void validate() const;
};

const char *kind_name(PotentialKind k);

}  // namespace mlg

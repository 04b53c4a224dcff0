#include "maglorentz/potential.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mlg {

RadialProfile cubic_bump_profile() {
    RadialProfile p;
    p.name = "cubic_bump";
    p.phi = [](double r) {
        if (r >= 1.0) return 0.0;
        double w = 1.0 - r * r;
        return w * w * w;
    };
    p.dphi = [](double r) {
        if (r >= 1.0) return 0.0;
        double w = 1.0 - r * r;
        return -6.0 * r * w * w;
    };
    p.ddphi = [](double r) {
        if (r >= 1.0) return 0.0;
        double w = 1.0 - r * r;
        return -6.0 * w * w + 24.0 * r * r * w;
    };
    return p;
}

RadialProfile steep_wall_profile(double k) {
    RadialProfile p;
    p.name = "steep_wall";
    p.phi = [k](double r) { return r >= 1.0 ? 0.0 : -std::expm1(-k * (1.0 - r)); };
    p.dphi = [k](double r) { return r >= 1.0 ? 0.0 : -k * std::exp(-k * (1.0 - r)); };
    p.ddphi = [k](double r) { return r >= 1.0 ? 0.0 : -k * k * std::exp(-k * (1.0 - r)); };
    return p;
}

RadialProfile zero_profile() {
    RadialProfile p;
    p.name = "zero";
    p.phi = [](double) { return 0.0; };
    p.dphi = [](double) { return 0.0; };
    p.ddphi = [](double) { return 0.0; };
    return p;
}

PotentialSpec PotentialSpec::hard_disk(double eps) {
    PotentialSpec p;
    p.kind = PotentialKind::HardDisk;
    p.eps = eps;
    return p;
}

PotentialSpec PotentialSpec::smooth(double eps, double alpha, RadialProfile profile) {
    PotentialSpec p;
    p.kind = PotentialKind::SmoothCompact;
    p.eps = eps;
    p.alpha = alpha;
    p.profile = std::move(profile);
    return p;
}

PotentialSpec PotentialSpec::truncated(double eps, double s, double gamma) {
    PotentialSpec p;
    p.kind = PotentialKind::TruncatedPower;
    p.eps = eps;
    p.s = s;
    p.gamma = gamma;
    return p;
}

PotentialSpec PotentialSpec::inverse_power(double s) {
    PotentialSpec p;
    p.kind = PotentialKind::InversePower;
    p.eps = 1.0;
    p.s = s;
    return p;
}

double PotentialSpec::unit_radius() const {
    switch (kind) {
    case PotentialKind::TruncatedPower: return std::pow(eps, gamma - 1.0);
    case PotentialKind::InversePower: return std::numeric_limits<double>::infinity();
    default: return 1.0;
    }
}

double PotentialSpec::radius() const { return eps * unit_radius(); }

double PotentialSpec::coupling() const {
    return kind == PotentialKind::SmoothCompact ? std::pow(eps, alpha) : 1.0;
}

double PotentialSpec::V(double r) const {
    switch (kind) {
    case PotentialKind::HardDisk:
        return r < 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
    case PotentialKind::SmoothCompact:
        return r < 1.0 ? coupling() * profile.phi(r) : 0.0;
    case PotentialKind::TruncatedPower: {
        double a = unit_radius();
        return r < a ? std::pow(r, -s) - std::pow(a, -s) : 0.0;
    }
    case PotentialKind::InversePower:
        return std::pow(r, -s);
    }
    return 0.0;
}

double PotentialSpec::dV(double r) const {
    switch (kind) {
    case PotentialKind::HardDisk: return 0.0;
    case PotentialKind::SmoothCompact: return r < 1.0 ? coupling() * profile.dphi(r) : 0.0;
    case PotentialKind::TruncatedPower:
        return r < unit_radius() ? -s * std::pow(r, -s - 1.0) : 0.0;
    case PotentialKind::InversePower: return -s * std::pow(r, -s - 1.0);
    }
    return 0.0;
}

const char *kind_name(PotentialKind k) {
    switch (k) {
    case PotentialKind::HardDisk: return "hard_disk";
    case PotentialKind::SmoothCompact: return "smooth";
    case PotentialKind::TruncatedPower: return "truncated_power";
    case PotentialKind::InversePower: return "inverse_power";
    }
    return "?";
}

std::string PotentialSpec::describe() const {
    std::ostringstream os;
    os << kind_name(kind) << "(eps=" << eps;
    if (kind == PotentialKind::SmoothCompact) os << ", alpha=" << alpha << ", profile=" << profile.name;
    if (kind == PotentialKind::TruncatedPower || kind == PotentialKind::InversePower) os << ", s=" << s;
    if (kind == PotentialKind::TruncatedPower) os << ", gamma=" << gamma;
    os << ")";
    return os.str();
}

void PotentialSpec::validate() const {
    if (kind != PotentialKind::InversePower && !(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("potential: eps must lie in (0, 1]");
    if (kind == PotentialKind::SmoothCompact) {
        if (!profile.phi || !profile.dphi) throw std::invalid_argument("potential: smooth profile missing");
        if (!(alpha > 0.0)) throw std::invalid_argument("potential: alpha must be positive");
        for (int i = 0; i <= 1024; ++i) {
            double r = static_cast<double>(i) / 1024.0;
            double f = profile.phi(r), d = profile.dphi(r);
            if (f < 0.0 || (r > 0.0 && r < 1.0 && d > 0.0))
                throw std::invalid_argument("potential: profile not repulsive at r=" + std::to_string(r));
        }
        if (std::abs(profile.phi(1.0)) > 1e-12) throw std::invalid_argument("potential: profile must vanish at r=1");
    }
    if (kind == PotentialKind::TruncatedPower || kind == PotentialKind::InversePower) {
        if (!(s > 2.0)) throw std::invalid_argument("potential: exponent s must exceed 2");
    }
    if (kind == PotentialKind::TruncatedPower && !(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("potential: gamma must lie in (0, 1)");
}

}  // namespace mlg

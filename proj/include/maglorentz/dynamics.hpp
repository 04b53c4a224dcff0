#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "maglorentz/geometry.hpp"
#include "maglorentz/ode.hpp"
#include "maglorentz/potential.hpp"

namespace mlg {

// Field of magnitude B; orientation +1 gyrates counterclockwise (center of
// the orbit to the left of v), -1 clockwise. B = 0 is the straight-line flow.
struct FieldParams {
    double B = 1.0;
    int orientation = 1;

    double Omega() const { return orientation * B; }
    double R_L() const { return 1.0 / B; }
    double T_L() const { return two_pi / B; }
    FieldParams reversed() const { return {B, -orientation}; }
};

struct PhaseState {
    Vec2 x;
    Vec2 v;
};

struct Obstacle {
    Vec2 c;
    double radius = 0.0;
    std::uint64_t id = 0;
};

struct Hit {
    double t = 0.0;
    Obstacle obstacle;
    double rho = 0.0;
};

struct HitResult {
    std::optional<Hit> hit;
    bool grazing = false;
};

enum class DynamicsFault { Trapped, EnteredInside, StepFailure };

struct DynamicsError : std::runtime_error {
    DynamicsFault fault;
    std::uint64_t obstacle_id;
    PhaseState entry;
    DynamicsError(DynamicsFault f, const std::string &what, std::uint64_t id, PhaseState s)
        : std::runtime_error(what), fault(f), obstacle_id(id), entry(s) {}
};

inline constexpr double grazing_tolerance = 1e-13;

Vec2 cyclotron_center(const PhaseState &s, const FieldParams &f);
PhaseState cyclotron_advance(const PhaseState &s, double dt, const FieldParams &f);

// Entry time of the free orbit into one support disk, if any within t_max.
HitResult orbit_entry(const PhaseState &s, const Obstacle &o, const FieldParams &f, double t_max);
HitResult first_obstacle_hit(const PhaseState &s, std::span<const Obstacle> obstacles, const FieldParams &f,
                             double t_max);

using InteractionStep = DenseStep<4>;

struct Interaction {
    PhaseState exit;
    double tau = 0.0;
    bool completed = true;
    std::vector<InteractionStep> steps;  // obstacle frame, unit time
    double unit_scale = 1.0;             // macroscopic length per unit length
    long rhs_evals = 0;
};

// Integrates inside one support starting anywhere in it; stops on exit or
// after t_limit (macroscopic time). Keeps dense output when requested.
Interaction interact(const PhaseState &s, const Obstacle &o, const PotentialSpec &pot, const FieldParams &f,
                     double t_limit, bool keep_dense, const OdeOptions &opt = {});

// Entry state must lie on the support boundary.
std::pair<PhaseState, double> integrate_in_potential(const PhaseState &s, const Obstacle &o,
                                                     const PotentialSpec &pot, const FieldParams &f);

// State in macroscopic coordinates at macroscopic time t after the entry.
PhaseState interaction_state(const Interaction &in, const Obstacle &o, double t);

double impact_parameter(const PhaseState &s, Vec2 center);

}  // namespace mlg

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maglorentz/dynamics.hpp"
#include "maglorentz/medium.hpp"
#include "maglorentz/potential.hpp"

namespace mlg {

// One collision of the backward trajectory. s_in/s_out are elapsed backward
// times; t_entry/t_exit are the matching physical times (t - s_out, t - s_in),
// so t_entry decreases along the log. rho and theta are measured in the
// backward frame (reversed velocity and field).
struct Collision {
    double s_in = 0.0;
    double s_out = 0.0;
    double t_entry = 0.0;
    double t_exit = 0.0;
    std::uint64_t obstacle_id = 0;
    Vec2 center;
    double radius = 0.0;
    double rho = 0.0;
    double theta = 0.0;
    double phi = 0.0;  // Omega (t_entry - next t_exit), next t_exit = 0 after the last
    bool completed = true;
};

struct IndexPair {
    int i = 0;
    int j = 0;
    bool operator==(const IndexPair &) const = default;
};

struct Flag {
    bool set = false;
    double time = 0.0;  // backward time of first occurrence
    void raise(double s) {
        if (!set || s < time) time = s;
        set = true;
    }
};

struct EventFlags {
    Flag chi1_violated;
    Flag overlap;
    Flag circ;
    Flag arc;
    Flag recollision;
    Flag interference;
    std::vector<IndexPair> recollisions;   // 1-based collision indices, j >= i + 2
    std::vector<IndexPair> interferences;
    bool any_pathology() const {
        return chi1_violated.set || overlap.set || circ.set || arc.set || recollision.set || interference.set;
    }
};

struct EventLog {
    std::vector<Collision> collisions;
    EventFlags flags;
    double total_time = 0.0;
    double initial_arc = 0.0;  // Omega (t - t_exit of the first collision)
    int grazing = 0;
    double max_tau() const;
    // entry-to-entry gaps in backward time, including the start and end pieces
    std::vector<double> gaps() const;
};

struct Segment {
    bool free = true;
    double s0 = 0.0;
    double duration = 0.0;
    PhaseState start;  // engine frame
    Obstacle obstacle;
    Interaction interaction;  // dense output when kept
};

// Piecewise record of the flow in the engine frame: the backward flow is run
// forward with reversed velocity and field.
struct Trajectory {
    std::vector<Segment> segments;
    FieldParams field;  // engine field
    PotentialSpec pot;
    double total = 0.0;
    PhaseState state_at(double s) const;
};

struct FlowOptions {
    bool keep_dense = false;
    // chi_arc window is T_L eps^nu; nu < 0 selects nu = alpha
    double arc_nu = -1.0;
    // extra slack added to the measured collision time in the circ/arc tests,
    // in units of the support radius
    double arc_slack = 0.0;
};

struct FlowResult {
    Trajectory trajectory;
    EventLog log;
    PhaseState final_state;  // physical T^{-t}(x, v)
};

// Forward flow of the full dynamics; the backward flow is built on it.
FlowResult flow_forward(const PhaseState &initial, double t, const MediumSample &sample, const PotentialSpec &pot,
                        const FieldParams &field, const FlowOptions &opt = {});
// T^{-t}: the state at time 0 of the physical trajectory through (x, v) at time t.
FlowResult flow(const PhaseState &initial, double t, const MediumSample &sample, const PotentialSpec &pot,
                const FieldParams &field, const FlowOptions &opt = {});

double tau_bound_for(const EventLog &log, double radius, const FlowOptions &opt = {});
Flag detect_circ(const EventLog &log, const FieldParams &field, double tau_bound);
Flag detect_arc(const EventLog &log, const FieldParams &field, double window, double tau_bound);
// geometric re-scan; also raises overlap when two hit supports intersect
void detect_recollision_interference_overlap(const Trajectory &traj, EventLog &log);
// same pairs read off repeated obstacle ids in the log
std::vector<IndexPair> recollisions_from_ids(const EventLog &log);
// backward pairs expressed on the reversed collision order
std::vector<IndexPair> reversed_pairs(const std::vector<IndexPair> &pairs, int n_collisions);

// area swept by the normal segments of half-width `radius` along the path
double tube_area(const Trajectory &traj, double radius, double resolution = 1.0 / 16.0);

using PhaseFunction = std::function<double(const PhaseState &)>;

struct PathologyCounts {
    std::uint64_t n = 0;
    std::uint64_t circ = 0, arc = 0, rec = 0, interf = 0, overlap = 0, not_chi1 = 0, any = 0;
};

struct FEpsEstimate {
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::vector<double> flagfree_mean;  // f0 restricted to flag-free trajectories
    PathologyCounts flags;              // over all (seed, point) trajectories
    std::uint64_t seeds = 0;
};

FEpsEstimate estimate_f_eps(const PhaseFunction &f0, const std::vector<PhaseState> &points, double t,
                            const ScalingRegime &regime, const FieldParams &field, std::uint64_t n_seeds,
                            std::uint64_t seed, unsigned workers = 1, const FlowOptions &opt = {});

struct SeedRecord {
    std::uint64_t index = 0;
    PhaseState initial;
    PhaseState final_state;
    int collisions = 0;
    double tau_max = 0.0;
    bool circ = false, arc = false, rec = false, interf = false, overlap = false, not_chi1 = false;
};

struct Interval {
    double lo = 0.0, hi = 0.0;
};
Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = 1.96);

struct PathologyRow {
    double eps = 0.0;
    PathologyCounts counts;
    std::vector<SeedRecord> seeds;
    double rate(std::uint64_t k) const { return counts.n ? static_cast<double>(k) / counts.n : 0.0; }
};

struct PathologyTable {
    std::vector<PathologyRow> rows;
    // log-log slope of each frequency against eps, NaN when fewer than two nonzero rates
    double slope_circ = 0.0, slope_arc = 0.0, slope_rec = 0.0, slope_int = 0.0, slope_overlap = 0.0;
};

struct PathologyOptions {
    bool require_decades = true;
    bool keep_seed_records = true;
};

PathologyTable pathology_scan(const ScalingRegime &regime, const std::vector<double> &eps_list, double t,
                              std::uint64_t n_seeds, std::uint64_t seed, const FieldParams &field,
                              unsigned workers = 1, const FlowOptions &opt = {},
                              const PathologyOptions &popt = {});

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y);

}  // namespace mlg

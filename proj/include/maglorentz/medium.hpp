#pragma once

#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "maglorentz/dynamics.hpp"
#include "maglorentz/potential.hpp"

namespace mlg {

enum class RegimeKind { WeakCoupling, Intermediate, BoltzmannGrad, LongRangeTruncated };

const char *regime_name(RegimeKind k);
RegimeKind parse_regime(const std::string &name);

struct ScalingRegime {
    RegimeKind kind = RegimeKind::BoltzmannGrad;
    double mu = 1.0;
    double eps = 1e-2;
    double alpha = 0.1;
    double gamma = 0.9;
    double s = 3.0;
    RadialProfile profile = cubic_bump_profile();

    // mu_eps: mu eps^{-(1+2 alpha)} for the soft regimes, mu / eps otherwise
    double intensity() const;
    // macroscopic support radius of one scatterer
    double obstacle_radius() const;
    double coupling() const;
    PotentialSpec potential() const;
    // strict applies the exponent windows of the limit theorems
    void validate(bool strict = false) const;
};

// Obstacle centers of one cell; a pure function of (seed, i, j).
std::vector<Obstacle> generate_cell(std::uint64_t seed, std::int64_t i, std::int64_t j, double cell, double intensity,
                                    double radius);

class MediumSample {
public:
    MediumSample(std::uint64_t seed, const ScalingRegime &regime, const FieldParams &field, double cell = 0.0);

    std::uint64_t seed() const { return seed_; }
    const ScalingRegime &regime() const { return regime_; }
    double cell_size() const { return cell_; }
    double intensity() const { return intensity_; }
    double obstacle_radius() const { return radius_; }

    // every obstacle whose support meets the disk B(p, r); r <= 64 cells
    std::vector<Obstacle> obstacles_near(Vec2 p, double r) const;
    std::shared_ptr<const std::vector<Obstacle>> cell(std::int64_t i, std::int64_t j) const;
    std::size_t realized_cells() const;

private:
    std::uint64_t seed_;
    ScalingRegime regime_;
    double intensity_;
    double radius_;
    double cell_;
    mutable std::shared_mutex mutex_;
    struct KeyHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t> &k) const;
    };
    mutable std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::shared_ptr<const std::vector<Obstacle>>, KeyHash>
        cells_;
};

double default_cell_size(double radius, const FieldParams &field);

struct SurvivalEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t survivors = 0;
    double annulus_area = 0.0;
    double closed_form_annulus = 0.0;  // exp(-mu_eps * annulus area)
    double closed_form_circle = 0.0;  // exp(-2 pi R_L mu_eff)
};

SurvivalEstimate survival_probability_full_orbit(const ScalingRegime &regime, const FieldParams &field,
                                                 std::uint64_t n_samples, std::uint64_t seed, unsigned workers = 1);

}  // namespace mlg

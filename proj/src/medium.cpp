#include "maglorentz/medium.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "maglorentz/parallel.hpp"
#include "maglorentz/rng.hpp"

namespace mlg {

const char *regime_name(RegimeKind k) {
    switch (k) {
    case RegimeKind::WeakCoupling: return "weak_coupling";
    case RegimeKind::Intermediate: return "intermediate";
    case RegimeKind::BoltzmannGrad: return "boltzmann_grad";
    case RegimeKind::LongRangeTruncated: return "long_range";
    }
    return "?";
}

RegimeKind parse_regime(const std::string &name) {
    for (auto k : {RegimeKind::WeakCoupling, RegimeKind::Intermediate, RegimeKind::BoltzmannGrad,
                   RegimeKind::LongRangeTruncated})
        if (name == regime_name(k)) return k;
    throw std::invalid_argument("unknown regime '" + name + "'");
}

double ScalingRegime::intensity() const {
    if (kind == RegimeKind::WeakCoupling || kind == RegimeKind::Intermediate)
        return mu * std::pow(eps, -(1.0 + 2.0 * alpha));
    return mu / eps;
}

PotentialSpec ScalingRegime::potential() const {
    switch (kind) {
    case RegimeKind::BoltzmannGrad: return PotentialSpec::hard_disk(eps);
    case RegimeKind::LongRangeTruncated: return PotentialSpec::truncated(eps, s, gamma);
    default: return PotentialSpec::smooth(eps, alpha, profile);
    }
}

double ScalingRegime::obstacle_radius() const { return potential().radius(); }

double ScalingRegime::coupling() const {
    return kind == RegimeKind::WeakCoupling || kind == RegimeKind::Intermediate ? std::pow(eps, alpha) : 1.0;
}

void ScalingRegime::validate(bool strict) const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("regime: mu must be >= 0");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("regime: eps must lie in (0, 1]");
    if (kind == RegimeKind::WeakCoupling || kind == RegimeKind::Intermediate) {
        if (!(alpha > 0.0)) throw std::invalid_argument("regime: alpha must be > 0");
        if (strict && !(alpha < 0.125)) throw std::invalid_argument("regime: alpha must lie in (0, 1/8)");
    }
    if (kind == RegimeKind::LongRangeTruncated) {
        if (!(s > 2.0)) throw std::invalid_argument("regime: s must be > 2");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("regime: gamma must lie in (0, 1)");
        if (strict && !(gamma > 6.0 / 7.0)) throw std::invalid_argument("regime: gamma must lie in (6/7, 1)");
    }
    potential().validate();
}

std::vector<Obstacle> generate_cell(std::uint64_t seed, std::int64_t i, std::int64_t j, double cell, double intensity,
                                    double radius) {
    std::uint64_t key = hash_key(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    Stream rng(key);
    std::uint64_t n = intensity > 0.0 ? rng.poisson(intensity * cell * cell) : 0;
    std::vector<Obstacle> out;
    out.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        double x = (static_cast<double>(i) + rng.uniform()) * cell;
        double y = (static_cast<double>(j) + rng.uniform()) * cell;
        out.push_back(Obstacle{{x, y}, radius, hash_key(key, k + 1)});
    }
    return out;
}

double default_cell_size(double radius, const FieldParams &field) {
    double larmor = field.B > 0.0 ? field.R_L() : 1.0;
    return std::max(4.0 * radius, larmor / 8.0);
}

std::size_t MediumSample::KeyHash::operator()(const std::pair<std::int64_t, std::int64_t> &k) const {
    return static_cast<std::size_t>(hash_key(static_cast<std::uint64_t>(k.first), static_cast<std::uint64_t>(k.second)));
}

MediumSample::MediumSample(std::uint64_t seed, const ScalingRegime &regime, const FieldParams &field, double cell)
    : seed_(seed), regime_(regime) {
    regime_.validate();
    intensity_ = regime_.intensity();
    radius_ = regime_.obstacle_radius();
    cell_ = cell > 0.0 ? cell : default_cell_size(radius_, field);
}

std::shared_ptr<const std::vector<Obstacle>> MediumSample::cell(std::int64_t i, std::int64_t j) const {
    auto key = std::make_pair(i, j);
    {
        std::shared_lock lock(mutex_);
        auto it = cells_.find(key);
        if (it != cells_.end()) return it->second;
    }
    auto fresh = std::make_shared<const std::vector<Obstacle>>(generate_cell(seed_, i, j, cell_, intensity_, radius_));
    std::unique_lock lock(mutex_);
    // first publication wins; a racing generator produced the same content
    auto [it, inserted] = cells_.try_emplace(key, std::move(fresh));
    return it->second;
}

std::vector<Obstacle> MediumSample::obstacles_near(Vec2 p, double r) const {
    if (r > 64.0 * cell_) throw std::invalid_argument("obstacles_near: query radius exceeds 64 cells");
    std::vector<Obstacle> out;
    double reach = r + radius_;
    auto lo_i = static_cast<std::int64_t>(std::floor((p.x - reach) / cell_));
    auto hi_i = static_cast<std::int64_t>(std::floor((p.x + reach) / cell_));
    auto lo_j = static_cast<std::int64_t>(std::floor((p.y - reach) / cell_));
    auto hi_j = static_cast<std::int64_t>(std::floor((p.y + reach) / cell_));
    for (auto i = lo_i; i <= hi_i; ++i)
        for (auto j = lo_j; j <= hi_j; ++j)
            for (const auto &o : *cell(i, j))
                if (norm2(o.c - p) <= reach * reach) out.push_back(o);
    return out;
}

std::size_t MediumSample::realized_cells() const {
    std::shared_lock lock(mutex_);
    return cells_.size();
}

SurvivalEstimate survival_probability_full_orbit(const ScalingRegime &regime, const FieldParams &field,
                                                 std::uint64_t n_samples, std::uint64_t seed, unsigned workers) {
    regime.validate();
    if (!(field.B > 0.0)) throw std::invalid_argument("survival: needs B > 0");
    SurvivalEstimate est;
    est.samples = n_samples;
    const double mu_eps = regime.intensity();
    const double r = regime.obstacle_radius();
    const double RL = field.R_L();
    const double outer = RL + r, inner = std::max(0.0, RL - r);
    est.annulus_area = pi * (outer * outer - inner * inner);
    est.closed_form_annulus = std::exp(-mu_eps * est.annulus_area);
    double mu_eff = regime.mu;
    if (regime.kind == RegimeKind::WeakCoupling || regime.kind == RegimeKind::Intermediate)
        mu_eff *= std::pow(regime.eps, -2.0 * regime.alpha);
    else if (regime.kind == RegimeKind::LongRangeTruncated)
        mu_eff *= std::pow(regime.eps, regime.gamma - 1.0);
    est.closed_form_circle = std::exp(-two_pi * RL * mu_eff);
    if (n_samples == 0) return est;
    if (mu_eps == 0.0) {
        est.survivors = n_samples;
        est.estimate = 1.0;
        return est;
    }

    const Vec2 xc = cyclotron_center(PhaseState{{0.0, 0.0}, {1.0, 0.0}}, field);
    const double cell = default_cell_size(r, field);
    struct CellRef {
        std::int64_t i, j;
        double angle;
    };
    std::vector<CellRef> ring;
    auto lo_i = static_cast<std::int64_t>(std::floor((xc.x - outer) / cell));
    auto hi_i = static_cast<std::int64_t>(std::floor((xc.x + outer) / cell));
    auto lo_j = static_cast<std::int64_t>(std::floor((xc.y - outer) / cell));
    auto hi_j = static_cast<std::int64_t>(std::floor((xc.y + outer) / cell));
    for (auto i = lo_i; i <= hi_i; ++i) {
        for (auto j = lo_j; j <= hi_j; ++j) {
            double x0 = i * cell, x1 = x0 + cell, y0 = j * cell, y1 = y0 + cell;
            double dx = std::max({x0 - xc.x, 0.0, xc.x - x1}), dy = std::max({y0 - xc.y, 0.0, xc.y - y1});
            double dmin = std::hypot(dx, dy);
            double fx = std::max(std::abs(x0 - xc.x), std::abs(x1 - xc.x));
            double fy = std::max(std::abs(y0 - xc.y), std::abs(y1 - xc.y));
            double dmax = std::hypot(fx, fy);
            if (dmin <= outer && dmax >= inner)
                ring.push_back({i, j, angle_of(Vec2{x0 + 0.5 * cell - xc.x, y0 + 0.5 * cell - xc.y})});
        }
    }
    std::sort(ring.begin(), ring.end(), [](const CellRef &a, const CellRef &b) { return a.angle < b.angle; });

    constexpr std::uint64_t chunk = 4096;
    std::uint64_t chunks = (n_samples + chunk - 1) / chunk;
    std::vector<std::uint64_t> alive(chunks, 0);
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::uint64_t begin = c * chunk, end = std::min<std::uint64_t>(n_samples, begin + chunk);
        std::uint64_t count = 0;
        for (std::uint64_t k = begin; k < end; ++k) {
            std::uint64_t sample_seed = hash_key(seed, k);
            bool hit = false;
            for (const auto &cr : ring) {
                for (const auto &o : generate_cell(sample_seed, cr.i, cr.j, cell, mu_eps, r)) {
                    double d = norm(o.c - xc);
                    if (d < outer && d > inner) {
                        hit = true;
                        break;
                    }
                }
                if (hit) break;
            }
            if (!hit) ++count;
        }
        alive[c] = count;
    });
    for (auto a : alive) est.survivors += a;
    double n = static_cast<double>(n_samples);
    est.estimate = static_cast<double>(est.survivors) / n;
    est.stderr_ = std::sqrt(std::max(est.estimate * (1.0 - est.estimate), 1.0 / n) / n);
    return est;
}

}  // namespace mlg

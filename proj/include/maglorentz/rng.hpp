#pragma once

#include <cmath>
#include <cstdint>

namespace mlg {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_key(hash_key(a, b), c);
}

// Counter-based stream: the i-th draw is splitmix64(key + i*golden), so a
// stream is fully determined by its key and nothing else.
class Stream {
public:
    explicit Stream(std::uint64_t key = 0) : key_(key) {}

    std::uint64_t next_u64() {
        ++counter_;
        return splitmix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1]
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    double normal() {
        double u1 = uniform_pos(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 0.0) {
            double lam = mean > 30.0 ? 30.0 : mean;
            mean -= lam;
            double p = std::exp(-lam), cdf = p, u = uniform();
            std::uint64_t k = 0;
            while (u > cdf && k < 1000) {
                ++k;
                p *= lam / static_cast<double>(k);
                cdf += p;
            }
            total += k;
        }
        return total;
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mlg

#pragma once

#include <cstdint>

namespace nearcrit {

// Stateless counter-based generator: every draw is a pure function of
// (key, counter), so label fields are reproducible and independent of the
// order (or thread) in which carriers are evaluated. The mixer is the
// SplitMix64 finalizer applied to the keyed counter; two rounds of it keep
// avalanche strong when counters are sequential.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
    return mix64(mix64(key ^ 0x6a09e667f3bcc909ULL) + counter);
}

// Uniform in the open interval (0,1), 53 significant bits.
inline double u01(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::uint64_t key, std::uint64_t counter) {
    return u01(at(key, counter));
}

// Derived stream key for replica / purpose separation.
inline std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    return mix64(master ^ mix64(stream + 0x9e3779b97f4a7c15ULL));
}

// Small sequential helper for test/tooling draws (shuffles, sampling).
class Sequence {
public:
    explicit Sequence(std::uint64_t key, std::uint64_t start = 0)
        : key_(key), counter_(start) {}
    std::uint64_t next_u64() { return at(key_, counter_++); }
    double next_u01() { return u01(next_u64()); }
    // Unbiased integer in [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t v = next_u64();
            if (v >= threshold) return v % n;
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace rng
}  // namespace nearcrit

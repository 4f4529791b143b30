#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace nrn {

// Seeded RNG with hand-rolled draw helpers so that every sampled artifact is
// reproducible byte-for-byte across stdlib versions. The engine state is
// serializable, which lets training resume mid-sequence from a checkpoint.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t u64() { return eng_(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = u64();
            if (r >= threshold) return r % n;
        }
    }

    int index(std::size_t n) { return static_cast<int>(below(n)); }

    // Uniform double in [0, 1) with 53 random bits.
    double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

    bool bernoulli(double p) { return real01() < p; }

    // Fisher-Yates; std::shuffle is implementation-defined in its draw count.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace nrn

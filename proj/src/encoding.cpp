#include "nrn/encoding.hpp"

#include <algorithm>
#include <cmath>

namespace nrn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* encoder_kind_name(EncoderKind k) {
    return k == EncoderKind::Dice ? "dice" : "sinusoidal";
}

std::optional<EncoderKind> encoder_kind_from_name(const std::string& name) {
    if (name == "dice") return EncoderKind::Dice;
    if (name == "sinusoidal") return EncoderKind::Sinusoidal;
    return std::nullopt;
}

void EncodingSpec::validate() const {
    if (dim < 2) throw std::invalid_argument("encoding dimension must be >= 2");
    if (kind == EncoderKind::Sinusoidal) {
        if (dim % 2 != 0) throw std::invalid_argument("sinusoidal encoding needs an even dimension");
        if (base <= 1.0) throw std::invalid_argument("sinusoidal base must exceed 1");
    }
    for (const auto& [type, range] : ranges)
        if (!(range.first < range.second))
            throw std::invalid_argument("empty value range for type id " + std::to_string(type));
}

std::vector<double> dice_encode(double v, int value_type, const EncodingSpec& spec) {
    auto it = spec.ranges.find(value_type);
    if (it == spec.ranges.end())
        throw std::invalid_argument("no value range registered for type id " +
                                    std::to_string(value_type));
    auto [lo, hi] = it->second;
    double frac = (std::clamp(v, lo, hi) - lo) / (hi - lo);
    double alpha = kPi * frac;

    int D = spec.dim;
    std::vector<double> out(D);
    double s = std::sin(alpha);
    double c = std::cos(alpha);
    // the angle endpoints are exact in exact arithmetic; keep them exact here
    if (frac == 0.0) {
        s = 0.0;
        c = 1.0;
    } else if (frac == 1.0) {
        s = 0.0;
        c = -1.0;
    }
    double s_pow = 1.0;  // sin^(d-1)
    for (int d = 1; d < D; ++d) {
        out[d - 1] = s_pow * c;
        s_pow *= s;
    }
    out[D - 1] = s_pow * s;  // sin^D, as the construction is stated
    return out;
}

std::vector<double> sinusoidal_encode(double v, const EncodingSpec& spec) {
    int D = spec.dim;
    std::vector<double> out(D);
    for (int d = 0; d < D; d += 2) {
        double freq = std::pow(spec.base, static_cast<double>(d) / D);
        out[d] = std::sin(v / freq);
        out[d + 1] = std::cos(v / freq);
    }
    return out;
}

std::vector<double> encode_value(double v, int value_type, const EncodingSpec& spec) {
    return spec.kind == EncoderKind::Dice ? dice_encode(v, value_type, spec)
                                          : sinusoidal_encode(v, spec);
}

std::map<int, std::pair<double, double>> value_ranges_of(const KnowledgeGraph& g) {
    std::map<int, std::pair<double, double>> ranges;
    for (const auto& node : g.vocab.values) {
        auto it = ranges.find(node.type);
        if (it == ranges.end()) {
            ranges.emplace(node.type, std::make_pair(node.value, node.value));
        } else {
            it->second.first = std::min(it->second.first, node.value);
            it->second.second = std::max(it->second.second, node.value);
        }
    }
    // degenerate single-value types get a unit-width window so the angle map
    // stays defined
    for (auto& [type, range] : ranges)
        if (range.first == range.second) {
            range.first -= 0.5;
            range.second += 0.5;
        }
    return ranges;
}

}  // namespace nrn

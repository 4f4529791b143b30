#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/kg.hpp"

namespace nrn {

enum class EncoderKind { Dice, Sinusoidal };

const char* encoder_kind_name(EncoderKind k);
std::optional<EncoderKind> encoder_kind_from_name(const std::string& name);

// Deterministic map from a real value to R^dim. DICE needs a per-value-type
// range (values are clamped into it); Sinusoidal needs the frequency base.
struct EncodingSpec {
    EncoderKind kind = EncoderKind::Sinusoidal;
    int dim = 16;
    double base = 10000.0;                             // Sinusoidal
    std::map<int, std::pair<double, double>> ranges;   // DICE: type -> (min, max)

    void validate() const;
};

std::vector<double> dice_encode(double v, int value_type, const EncodingSpec& spec);
std::vector<double> sinusoidal_encode(double v, const EncodingSpec& spec);

// Dispatches on spec.kind; value_type is ignored by Sinusoidal.
std::vector<double> encode_value(double v, int value_type, const EncodingSpec& spec);

// Observed min/max per value type over the graph's value nodes; the ranges
// DICE uses at training and evaluation time.
std::map<int, std::pair<double, double>> value_ranges_of(const KnowledgeGraph& g);

}  // namespace nrn

#pragma once

#include <string>
#include <vector>

#include "nrn/model.hpp"
#include "nrn/rng.hpp"
#include "nrn/sampler.hpp"

namespace nrn {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over every registered tensor; moment buffers parallel the store.
class Adam {
public:
    Adam(const ParamStore& params, AdamConfig cfg);
    void step(ParamStore& params);

    AdamConfig config;
    long t = 0;
    std::vector<std::vector<double>> m, v;
};

struct TrainConfig {
    long steps = 1000;
    int batch_size = 128;
    // alternation pattern: this many entity-loss steps, then this many
    // attribute-loss steps, repeating
    int entity_steps = 1;
    int attr_steps = 1;
    // global gradient-norm clip; the density loss is unbounded below and
    // unclipped steps through the shared projections stall the entity loss
    double clip_norm = 1.0;
    AdamConfig adam;
};

struct TraceEntry {
    long step;
    char kind;  // 'E' or 'A'
    double loss;
};

// Mutable training bookkeeping serialized into checkpoints so a resumed run
// continues the exact rng-driven batch sequence.
struct TrainState {
    long step = 0;
    std::string rng_state;
    double train_ms_total = 0.0;
    long queries_seen = 0;

    double train_ms_per_query() const {
        return queries_seen > 0 ? train_ms_total / static_cast<double>(queries_seen) : 0.0;
    }
};

// Runs cfg.steps optimizer steps, alternating the two losses over the
// entity-rooted / numeric-rooted pools of `records`. Aborts on a non-finite
// loss, naming the step.
std::vector<TraceEntry> train_model(Model& model, const std::vector<QueryRecord>& records,
                                    const TrainConfig& cfg, Adam& adam, Rng& rng,
                                    TrainState& state);

// --- checkpointing ---

struct Checkpoint {
    Model model;
    Adam adam;
    TrainState state;
    std::string run_config_json;  // opaque echo of the CLI configuration
};

void save_checkpoint(const std::string& path, const Model& model, const Adam& adam,
                     const TrainState& state, const std::string& run_config_json);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nrn

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/encoding.hpp"
#include "nrn/kg.hpp"
#include "nrn/query.hpp"
#include "nrn/rng.hpp"
#include "nrn/tape.hpp"
#include "nrn/tensor.hpp"

namespace nrn {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// TwoPhase: entity states are d-vectors, numeric states are diagonal-Gaussian
// parameters theta = (mu, log-variance) of size k = 2d. Flat is the ablation
// that treats value nodes as opaque entities: every state is a d-vector and
// the numeric machinery is unused.
enum class ModelKind { TwoPhase, Flat };

const char* model_kind_name(ModelKind k);
std::optional<ModelKind> model_kind_from_name(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::TwoPhase;
    int d = 16;
    double anchor_variance = 0.01;  // variance of value-anchor point masses
};

// Gated transition weights: out = (1-z).p + z.t with
//   p = Wp x + bp, z = sigma(Wz c + Uz p + bz), r = sigma(Wr c + Ur p + br),
//   t = tanh(Wh c + Uh (r.p) + bh).
struct GatedWeights {
    Tensor *Wp, *bp, *Wz, *Uz, *bz, *Wr, *Ur, *br, *Wh, *Uh, *bh;
};

// Set operator: scaled dot-product self-attention over the stacked states,
// mean pooling, then a two-layer perceptron.
struct DeepSetWeights {
    Tensor *Wq, *Wk, *Wv, *H1, *h1, *H2, *h2;
};

struct EncoderState {
    Phase phase;
    VarId var;
};

// log p_theta(x) of the diagonal Gaussian with theta = (mu, s), variance
// exp(s); theta has 2*|x| entries.
VarId gaussian_logpdf(Tape& tp, VarId theta, const std::vector<double>& x);

class Model {
public:
    Model(ModelConfig cfg, Vocab vocab, EncodingSpec encoding);

    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    void init_params(Rng& rng);

    int d() const { return cfg_.d; }
    int k() const { return 2 * cfg_.d; }
    int state_dim(Phase p) const;
    const ModelConfig& config() const { return cfg_; }
    const Vocab& vocab() const { return vocab_; }
    const EncodingSpec& encoding() const { return encoding_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // --- differentiable operations ---
    VarId gated_transition(Tape& tp, const GatedWeights& w, VarId input, VarId ctx) const;
    VarId rel_projection(Tape& tp, VarId q, int relation);
    VarId attr_projection(Tape& tp, VarId q, int attribute);
    VarId rev_attr_projection(Tape& tp, VarId theta, int attribute);
    VarId num_projection(Tape& tp, VarId theta, int num_relation);
    VarId deepset_merge(Tape& tp, const std::vector<VarId>& states, bool is_union,
                        Phase phase);
    EncoderState encode_query(Tape& tp, const ComputationGraph& g);

    VarId entity_score(Tape& tp, VarId q, int entity);
    VarId entity_scores(Tape& tp, VarId q);  // over the whole entity table

    // log phi_t(theta): Gaussian over mu with a learned per-type mean/variance
    VarId type_prior_logpdf(Tape& tp, int value_type, VarId theta);

    // batch losses; answers are entity ids / value node ids
    VarId entity_loss(Tape& tp,
                      const std::vector<std::pair<const ComputationGraph*, int>>& batch);
    VarId attribute_loss(Tape& tp,
                         const std::vector<std::pair<const ComputationGraph*, int>>& batch);

    // --- inference (no gradients) ---
    std::vector<double> encode_state(const ComputationGraph& g);
    std::vector<double> score_all_entities(const std::vector<double>& q) const;
    std::vector<int> value_candidates(int value_type) const;
    double score_value(const std::vector<double>& root_state, int value_id) const;

    // weight-set accessors (tests exercise them directly)
    const GatedWeights& rel_weights() const { return rel_w_; }
    const GatedWeights& ap_weights() const { return ap_w_; }
    const GatedWeights& rap_weights() const { return rap_w_; }
    const GatedWeights& np_weights() const { return np_w_; }

    std::vector<double> anchor_value_state(double value, int value_type) const;

private:
    ModelConfig cfg_;
    Vocab vocab_;
    EncodingSpec encoding_;
    ParamStore params_;

    Tensor* entity_emb_ = nullptr;
    Tensor* value_emb_ = nullptr;  // Flat only
    Tensor* rel_emb_ = nullptr;
    Tensor* attr_emb_ = nullptr;
    Tensor* numrel_emb_ = nullptr;
    Tensor* prior_mean_ = nullptr;    // TwoPhase only
    Tensor* prior_logvar_ = nullptr;  // TwoPhase only

    GatedWeights rel_w_{}, ap_w_{}, rap_w_{}, np_w_{};
    DeepSetWeights ds_[2][2]{};  // [is_union][phase]; Flat uses phase 0 slots

    GatedWeights make_gated(const std::string& prefix, int in, int out, int ctx);
    DeepSetWeights make_deepset(const std::string& prefix, int dim);
    const DeepSetWeights& deepset_for(bool is_union, Phase phase) const;
    VarId anchor_state(Tape& tp, const QueryNode& n);
};

}  // namespace nrn

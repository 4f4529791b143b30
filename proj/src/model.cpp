#include "nrn/model.hpp"

#include <cmath>

#include "nrn/kernels.hpp"

namespace nrn {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
}

const char* model_kind_name(ModelKind k) {
    return k == ModelKind::TwoPhase ? "two_phase" : "flat";
}

std::optional<ModelKind> model_kind_from_name(const std::string& name) {
    if (name == "two_phase") return ModelKind::TwoPhase;
    if (name == "flat") return ModelKind::Flat;
    return std::nullopt;
}

Model::Model(ModelConfig cfg, Vocab vocab, EncodingSpec encoding)
    : cfg_(cfg), vocab_(std::move(vocab)), encoding_(std::move(encoding)) {
    if (cfg_.d < 1) throw ModelError("model dimension must be positive");
    if (cfg_.kind == ModelKind::TwoPhase && encoding_.dim != cfg_.d)
        throw ModelError("numeric encoding dimension must equal the model dimension");
    encoding_.validate();
    vocab_.rebuild_lookup();

    int d = cfg_.d;
    int kk = k();
    int ne = vocab_.num_entities();
    int nr = static_cast<int>(vocab_.relation_names.size());
    int na = static_cast<int>(vocab_.attribute_names.size());
    int nt = static_cast<int>(vocab_.value_type_names.size());

    entity_emb_ = &params_.add("entity_emb", std::max(ne, 1), d);
    rel_emb_ = &params_.add("rel_emb", std::max(nr, 1), d);

    if (cfg_.kind == ModelKind::TwoPhase) {
        attr_emb_ = &params_.add("attr_emb", std::max(na, 1), kk);
        numrel_emb_ = &params_.add("numrel_emb", kNumRelCount, kk);
        prior_mean_ = &params_.add("prior_mean", std::max(nt, 1), d);
        prior_logvar_ = &params_.add("prior_logvar", std::max(nt, 1), d);
        rel_w_ = make_gated("rel", d, d, d);
        ap_w_ = make_gated("ap", d, kk, kk);
        rap_w_ = make_gated("rap", kk, d, kk);
        np_w_ = make_gated("np", kk, kk, kk);
        ds_[0][0] = make_deepset("ds_i_ent", d);
        ds_[1][0] = make_deepset("ds_u_ent", d);
        ds_[0][1] = make_deepset("ds_i_num", kk);
        ds_[1][1] = make_deepset("ds_u_num", kk);
    } else {
        value_emb_ = &params_.add("value_emb", std::max(vocab_.num_values(), 1), d);
        attr_emb_ = &params_.add("attr_emb", std::max(na, 1), d);
        numrel_emb_ = &params_.add("numrel_emb", kNumRelCount, d);
        rel_w_ = make_gated("rel", d, d, d);
        ap_w_ = make_gated("ap", d, d, d);
        rap_w_ = make_gated("rap", d, d, d);
        np_w_ = make_gated("np", d, d, d);
        ds_[0][0] = make_deepset("ds_i", d);
        ds_[1][0] = make_deepset("ds_u", d);
    }
}

GatedWeights Model::make_gated(const std::string& p, int in, int out, int ctx) {
    GatedWeights w;
    w.Wp = &params_.add(p + ".Wp", out, in);
    w.bp = &params_.add(p + ".bp", out);
    w.Wz = &params_.add(p + ".Wz", out, ctx);
    w.Uz = &params_.add(p + ".Uz", out, out);
    w.bz = &params_.add(p + ".bz", out);
    w.Wr = &params_.add(p + ".Wr", out, ctx);
    w.Ur = &params_.add(p + ".Ur", out, out);
    w.br = &params_.add(p + ".br", out);
    w.Wh = &params_.add(p + ".Wh", out, ctx);
    w.Uh = &params_.add(p + ".Uh", out, out);
    w.bh = &params_.add(p + ".bh", out);
    return w;
}

DeepSetWeights Model::make_deepset(const std::string& p, int dim) {
    DeepSetWeights w;
    int hidden = 2 * dim;
    w.Wq = &params_.add(p + ".Wq", dim, dim);
    w.Wk = &params_.add(p + ".Wk", dim, dim);
    w.Wv = &params_.add(p + ".Wv", dim, dim);
    w.H1 = &params_.add(p + ".H1", hidden, dim);
    w.h1 = &params_.add(p + ".h1", hidden);
    w.H2 = &params_.add(p + ".H2", dim, hidden);
    w.h2 = &params_.add(p + ".h2", dim);
    return w;
}

void Model::init_params(Rng& rng) {
    for (auto& t : params_.all()) {
        // biases and raw prior variances start at zero
        if (t->cols == 1 || t->name == "prior_logvar") {
            std::fill(t->data.begin(), t->data.end(), 0.0);
            continue;
        }
        double bound = 1.0 / std::sqrt(static_cast<double>(t->cols));
        for (auto& x : t->data) x = rng.uniform(-bound, bound);
    }
}

int Model::state_dim(Phase p) const {
    if (cfg_.kind == ModelKind::Flat) return d();
    return p == Phase::Entity ? d() : k();
}

VarId Model::gated_transition(Tape& tp, const GatedWeights& w, VarId input, VarId ctx) const {
    VarId p = tp.add(tp.matvec(*w.Wp, input), tp.param(*w.bp));
    VarId z = tp.sigmoid(tp.add(tp.add(tp.matvec(*w.Wz, ctx), tp.matvec(*w.Uz, p)),
                                tp.param(*w.bz)));
    VarId r = tp.sigmoid(tp.add(tp.add(tp.matvec(*w.Wr, ctx), tp.matvec(*w.Ur, p)),
                                tp.param(*w.br)));
    VarId t = tp.tanh_(tp.add(tp.add(tp.matvec(*w.Wh, ctx), tp.matvec(*w.Uh, tp.mul(r, p))),
                              tp.param(*w.bh)));
    return tp.add(tp.mul(tp.affine(z, -1.0, 1.0), p), tp.mul(z, t));
}

VarId Model::rel_projection(Tape& tp, VarId q, int relation) {
    if (relation < 0 || relation >= rel_emb_->rows) throw ModelError("unknown relation id");
    return gated_transition(tp, rel_w_, q, tp.param_row(*rel_emb_, relation));
}

VarId Model::attr_projection(Tape& tp, VarId q, int attribute) {
    if (attribute < 0 || attribute >= attr_emb_->rows) throw ModelError("unknown attribute id");
    return gated_transition(tp, ap_w_, q, tp.param_row(*attr_emb_, attribute));
}

VarId Model::rev_attr_projection(Tape& tp, VarId theta, int attribute) {
    if (attribute < 0 || attribute >= attr_emb_->rows) throw ModelError("unknown attribute id");
    return gated_transition(tp, rap_w_, theta, tp.param_row(*attr_emb_, attribute));
}

VarId Model::num_projection(Tape& tp, VarId theta, int num_relation) {
    if (num_relation < 0 || num_relation >= kNumRelCount)
        throw ModelError("unknown numerical relation id");
    return gated_transition(tp, np_w_, theta, tp.param_row(*numrel_emb_, num_relation));
}

const DeepSetWeights& Model::deepset_for(bool is_union, Phase phase) const {
    int pi = cfg_.kind == ModelKind::Flat ? 0 : (phase == Phase::Numeric ? 1 : 0);
    return ds_[is_union ? 1 : 0][pi];
}

VarId Model::deepset_merge(Tape& tp, const std::vector<VarId>& states, bool is_union,
                           Phase phase) {
    if (states.size() < 2 || states.size() > 3)
        throw ModelError("set operations take 2 or 3 inputs");
    int dim = state_dim(phase);
    for (VarId s : states)
        if (tp.dim(s) != static_cast<std::size_t>(dim))
            throw ModelError("set operation inputs must share the phase dimension");

    const DeepSetWeights& w = deepset_for(is_union, phase);
    std::size_t n = states.size();
    std::vector<VarId> qs(n), ks(n), vs(n);
    for (std::size_t i = 0; i < n; ++i) {
        qs[i] = tp.matvec(*w.Wq, states[i]);
        ks[i] = tp.matvec(*w.Wk, states[i]);
        vs[i] = tp.matvec(*w.Wv, states[i]);
    }

    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<VarId> attended(n);
    for (std::size_t i = 0; i < n; ++i) {
        VarId row = tp.dot(qs[i], ks[0]);
        for (std::size_t j = 1; j < n; ++j) row = tp.concat(row, tp.dot(qs[i], ks[j]));
        VarId alpha = tp.softmax(tp.affine(row, inv_sqrt, 0.0));
        VarId acc = tp.scale_by(vs[0], tp.pick(alpha, 0));
        for (std::size_t j = 1; j < n; ++j)
            acc = tp.add(acc, tp.scale_by(vs[j], tp.pick(alpha, static_cast<int>(j))));
        attended[i] = acc;
    }

    VarId pooled = attended[0];
    for (std::size_t i = 1; i < n; ++i) pooled = tp.add(pooled, attended[i]);
    pooled = tp.affine(pooled, 1.0 / static_cast<double>(n), 0.0);

    VarId hidden = tp.relu(tp.add(tp.matvec(*w.H1, pooled), tp.param(*w.h1)));
    return tp.add(tp.matvec(*w.H2, hidden), tp.param(*w.h2));
}

std::vector<double> Model::anchor_value_state(double value, int value_type) const {
    std::vector<double> mu = encode_value(value, value_type, encoding_);
    std::vector<double> state(k());
    std::copy(mu.begin(), mu.end(), state.begin());
    std::fill(state.begin() + d(), state.end(), std::log(cfg_.anchor_variance));
    return state;
}

VarId Model::anchor_state(Tape& tp, const QueryNode& n) {
    if (n.kind == NodeKind::AnchorEntity) return tp.param_row(*entity_emb_, n.anchor_entity);
    // value anchor
    if (cfg_.kind == ModelKind::Flat) {
        auto id = vocab_.find_value(n.anchor_value, n.anchor_value_type);
        if (!id) throw ModelError("flat model cannot encode a value absent from the graph");
        return tp.param_row(*value_emb_, *id);
    }
    return tp.constant(anchor_value_state(n.anchor_value, n.anchor_value_type));
}

EncoderState Model::encode_query(Tape& tp, const ComputationGraph& g) {
    std::vector<VarId> vars(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const QueryNode& n = g.nodes[i];
        switch (n.kind) {
            case NodeKind::AnchorEntity:
            case NodeKind::AnchorValue: vars[i] = anchor_state(tp, n); break;
            case NodeKind::RelProj: vars[i] = rel_projection(tp, vars[n.children[0]], n.label); break;
            case NodeKind::AttrProj: vars[i] = attr_projection(tp, vars[n.children[0]], n.label); break;
            case NodeKind::RevAttrProj:
                vars[i] = rev_attr_projection(tp, vars[n.children[0]], n.label);
                break;
            case NodeKind::NumProj: vars[i] = num_projection(tp, vars[n.children[0]], n.label); break;
            case NodeKind::Intersection:
            case NodeKind::Union: {
                std::vector<VarId> kids;
                for (int c : n.children) kids.push_back(vars[c]);
                vars[i] = deepset_merge(tp, kids, n.kind == NodeKind::Union, n.phase);
                break;
            }
        }
    }
    return {g.root_phase(), vars[g.root()]};
}

VarId Model::entity_score(Tape& tp, VarId q, int entity) {
    if (entity < 0 || entity >= entity_emb_->rows) throw ModelError("unknown entity id");
    return tp.dot(q, tp.param_row(*entity_emb_, entity));
}

VarId Model::entity_scores(Tape& tp, VarId q) { return tp.matvec(*entity_emb_, q); }

VarId gaussian_logpdf(Tape& tp, VarId theta, const std::vector<double>& x) {
    int dd = static_cast<int>(x.size());
    if (tp.dim(theta) != 2 * x.size()) throw ModelError("gaussian_logpdf shape mismatch");
    VarId mu = tp.slice(theta, 0, dd);
    VarId s = tp.slice(theta, dd, dd);
    VarId diff = tp.sub(tp.constant(x), mu);
    VarId mahal = tp.mul(tp.mul(diff, diff), tp.exp_(tp.affine(s, -1.0, 0.0)));
    VarId inner = tp.affine(tp.add(mahal, s), 1.0, kLog2Pi);
    return tp.affine(tp.sum(inner), -0.5, 0.0);
}

VarId Model::type_prior_logpdf(Tape& tp, int value_type, VarId theta) {
    if (cfg_.kind != ModelKind::TwoPhase) throw ModelError("type prior needs numeric states");
    if (value_type < 0 || value_type >= prior_mean_->rows)
        throw ModelError("unknown value type id");
    VarId mu = tp.slice(theta, 0, d());
    VarId m = tp.param_row(*prior_mean_, value_type);
    VarId s = tp.param_row(*prior_logvar_, value_type);
    VarId diff = tp.sub(mu, m);
    VarId mahal = tp.mul(tp.mul(diff, diff), tp.exp_(tp.affine(s, -1.0, 0.0)));
    VarId inner = tp.affine(tp.add(mahal, s), 1.0, kLog2Pi);
    return tp.affine(tp.sum(inner), -0.5, 0.0);
}

VarId Model::entity_loss(Tape& tp,
                         const std::vector<std::pair<const ComputationGraph*, int>>& batch) {
    if (batch.empty()) throw ModelError("empty batch");
    VarId total = -1;
    for (const auto& [graph, answer] : batch) {
        EncoderState st = encode_query(tp, *graph);
        if (st.phase != Phase::Entity) throw ModelError("entity loss needs entity-rooted queries");
        VarId scores = entity_scores(tp, st.var);
        VarId item = tp.sub(tp.logsumexp(scores), tp.pick(scores, answer));
        total = total < 0 ? item : tp.add(total, item);
    }
    return tp.affine(total, 1.0 / static_cast<double>(batch.size()), 0.0);
}

VarId Model::attribute_loss(Tape& tp,
                            const std::vector<std::pair<const ComputationGraph*, int>>& batch) {
    if (batch.empty()) throw ModelError("empty batch");
    VarId total = -1;
    for (const auto& [graph, value_id] : batch) {
        EncoderState st = encode_query(tp, *graph);
        if (st.phase != Phase::Numeric)
            throw ModelError("attribute loss needs numeric-rooted queries");
        VarId item;
        if (cfg_.kind == ModelKind::TwoPhase) {
            const ValueNode& vn = vocab_.values.at(value_id);
            std::vector<double> psi = encode_value(vn.value, vn.type, encoding_);
            VarId ll = tp.add(gaussian_logpdf(tp, st.var, psi),
                              type_prior_logpdf(tp, vn.type, st.var));
            item = tp.affine(ll, -1.0, 0.0);
        } else {
            VarId scores = tp.matvec(*value_emb_, st.var);
            item = tp.sub(tp.logsumexp(scores), tp.pick(scores, value_id));
        }
        total = total < 0 ? item : tp.add(total, item);
    }
    return tp.affine(total, 1.0 / static_cast<double>(batch.size()), 0.0);
}

std::vector<double> Model::encode_state(const ComputationGraph& g) {
    Tape tp;
    EncoderState st = encode_query(tp, g);
    return tp.val(st.var);
}

std::vector<double> Model::score_all_entities(const std::vector<double>& q) const {
    std::vector<double> scores(entity_emb_->rows);
    kernels::active().matvec(entity_emb_->data.data(), entity_emb_->rows, entity_emb_->cols,
                             q.data(), scores.data());
    return scores;
}

std::vector<int> Model::value_candidates(int value_type) const {
    std::vector<int> out;
    for (int v = 0; v < vocab_.num_values(); ++v)
        if (vocab_.values[v].type == value_type) out.push_back(v);
    return out;
}

double Model::score_value(const std::vector<double>& root_state, int value_id) const {
    const ValueNode& vn = vocab_.values.at(value_id);
    if (cfg_.kind == ModelKind::Flat) {
        return kernels::active().dot(root_state.data(), value_emb_->row_ptr(value_id), d());
    }
    std::vector<double> x = encode_value(vn.value, vn.type, encoding_);
    const double* mu = root_state.data();
    const double* s = root_state.data() + d();
    double acc = 0.0;
    for (int j = 0; j < d(); ++j) {
        double diff = x[j] - mu[j];
        acc += diff * diff * std::exp(-s[j]) + s[j] + kLog2Pi;
    }
    return -0.5 * acc;
}

}  // namespace nrn

#include "nrn/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace nrn {

using ordered_json = nlohmann::ordered_json;

Adam::Adam(const ParamStore& params, AdamConfig cfg) : config(cfg) {
    for (const auto& t : params.all()) {
        m.emplace_back(t->size(), 0.0);
        v.emplace_back(t->size(), 0.0);
    }
}

void Adam::step(ParamStore& params) {
    t += 1;
    double b1t = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    double b2t = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    auto& tensors = params.all();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        Tensor& p = *tensors[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            double g = p.grad[j];
            m[i][j] = config.beta1 * m[i][j] + (1.0 - config.beta1) * g;
            v[i][j] = config.beta2 * v[i][j] + (1.0 - config.beta2) * g * g;
            double mh = m[i][j] / b1t;
            double vh = v[i][j] / b2t;
            p.data[j] -= config.lr * mh / (std::sqrt(vh) + config.eps);
        }
    }
}

std::vector<TraceEntry> train_model(Model& model, const std::vector<QueryRecord>& records,
                                    const TrainConfig& cfg, Adam& adam, Rng& rng,
                                    TrainState& state) {
    // parse once; split pools by root phase
    std::vector<ComputationGraph> graphs;
    graphs.reserve(records.size());
    std::vector<int> entity_pool, numeric_pool;
    for (std::size_t i = 0; i < records.size(); ++i) {
        graphs.push_back(parse_query(records[i].query, model.vocab()));
        if (records[i].answers_train.empty()) continue;  // nothing to supervise on
        if (graphs.back().root_phase() == Phase::Entity)
            entity_pool.push_back(static_cast<int>(i));
        else
            numeric_pool.push_back(static_cast<int>(i));
    }
    if (entity_pool.empty() && numeric_pool.empty())
        throw TrainError("no trainable records (every record lacks training answers)");

    int cycle = cfg.entity_steps + cfg.attr_steps;
    if (cycle <= 0) throw TrainError("alternation cycle must be positive");

    std::vector<TraceEntry> trace;
    trace.reserve(cfg.steps);
    Tape tape;

    auto t_begin = std::chrono::steady_clock::now();
    for (long s = 0; s < cfg.steps; ++s) {
        long global_step = state.step + 1;
        bool entity_kind = (global_step - 1) % cycle < cfg.entity_steps;
        if (entity_kind && entity_pool.empty()) entity_kind = false;
        if (!entity_kind && numeric_pool.empty()) entity_kind = true;

        const std::vector<int>& pool = entity_kind ? entity_pool : numeric_pool;
        std::vector<std::pair<const ComputationGraph*, int>> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            int rec = pool[rng.index(pool.size())];
            const auto& answers = records[rec].answers_train;
            batch.emplace_back(&graphs[rec], answers[rng.index(answers.size())]);
        }

        tape.clear();
        model.params().zero_grad();
        VarId loss = entity_kind ? model.entity_loss(tape, batch)
                                 : model.attribute_loss(tape, batch);
        double loss_value = tape.scalar(loss);
        if (!std::isfinite(loss_value))
            throw TrainError("non-finite loss at step " + std::to_string(global_step) +
                             " (" + (entity_kind ? "entity" : "attribute") + " batch)");
        tape.backward(loss);
        if (cfg.clip_norm > 0.0) {
            double sq = 0.0;
            for (const auto& t : model.params().all())
                for (double g : t->grad) sq += g * g;
            if (sq > cfg.clip_norm * cfg.clip_norm) {
                double scale = cfg.clip_norm / std::sqrt(sq);
                for (auto& t : model.params().all())
                    for (double& g : t->grad) g *= scale;
            }
        }
        adam.step(model.params());

        state.step = global_step;
        state.queries_seen += cfg.batch_size;
        trace.push_back({global_step, entity_kind ? 'E' : 'A', loss_value});
    }
    auto t_end = std::chrono::steady_clock::now();
    state.train_ms_total +=
        std::chrono::duration<double, std::milli>(t_end - t_begin).count();
    state.rng_state = rng.save_state();
    return trace;
}

// --- checkpoint ---

namespace {

ordered_json vocab_to_json(const Vocab& v) {
    ordered_json j;
    j["entities"] = v.entity_names;
    j["relations"] = v.relation_names;
    ordered_json attrs = ordered_json::array();
    for (std::size_t i = 0; i < v.attribute_names.size(); ++i)
        attrs.push_back({v.attribute_names[i], v.attribute_type[i]});
    j["attributes"] = attrs;
    j["value_types"] = v.value_type_names;
    ordered_json vals = ordered_json::array();
    for (const auto& n : v.values) vals.push_back({n.value, n.type});
    j["values"] = vals;
    return j;
}

Vocab vocab_from_json(const ordered_json& j) {
    Vocab v;
    v.entity_names = j.at("entities").get<std::vector<std::string>>();
    v.relation_names = j.at("relations").get<std::vector<std::string>>();
    for (const auto& a : j.at("attributes")) {
        v.attribute_names.push_back(a.at(0).get<std::string>());
        v.attribute_type.push_back(a.at(1).get<int>());
    }
    v.value_type_names = j.at("value_types").get<std::vector<std::string>>();
    for (const auto& n : j.at("values"))
        v.values.push_back({n.at(0).get<double>(), n.at(1).get<int>()});
    v.rebuild_lookup();
    return v;
}

ordered_json encoding_to_json(const EncodingSpec& e) {
    ordered_json j;
    j["kind"] = encoder_kind_name(e.kind);
    j["dim"] = e.dim;
    j["base"] = e.base;
    ordered_json ranges = ordered_json::array();
    for (const auto& [type, r] : e.ranges) ranges.push_back({type, r.first, r.second});
    j["ranges"] = ranges;
    return j;
}

EncodingSpec encoding_from_json(const ordered_json& j) {
    EncodingSpec e;
    e.kind = *encoder_kind_from_name(j.at("kind").get<std::string>());
    e.dim = j.at("dim").get<int>();
    e.base = j.at("base").get<double>();
    for (const auto& r : j.at("ranges"))
        e.ranges[r.at(0).get<int>()] = {r.at(1).get<double>(), r.at(2).get<double>()};
    return e;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Adam& adam,
                     const TrainState& state, const std::string& run_config_json) {
    ordered_json j;
    j["format"] = "nrn-checkpoint-v1";
    j["model"] = {{"kind", model_kind_name(model.config().kind)},
                  {"d", model.config().d},
                  {"anchor_variance", model.config().anchor_variance}};
    j["encoding"] = encoding_to_json(model.encoding());
    j["vocab"] = vocab_to_json(model.vocab());

    ordered_json tensors = ordered_json::array();
    for (const auto& t : model.params().all())
        tensors.push_back({{"name", t->name}, {"rows", t->rows}, {"cols", t->cols},
                           {"data", t->data}});
    j["tensors"] = tensors;

    ordered_json opt;
    opt["lr"] = adam.config.lr;
    opt["beta1"] = adam.config.beta1;
    opt["beta2"] = adam.config.beta2;
    opt["eps"] = adam.config.eps;
    opt["t"] = adam.t;
    opt["m"] = adam.m;
    opt["v"] = adam.v;
    j["optimizer"] = opt;

    j["state"] = {{"step", state.step},
                  {"rng", state.rng_state},
                  {"train_ms_total", state.train_ms_total},
                  {"queries_seen", state.queries_seen}};
    j["run_config"] = run_config_json;

    std::ofstream out(path);
    if (!out) throw TrainError("cannot write checkpoint " + path);
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TrainError("cannot open checkpoint " + path);
    ordered_json j = ordered_json::parse(in);
    if (j.value("format", "") != std::string("nrn-checkpoint-v1"))
        throw TrainError("unrecognized checkpoint format tag");

    ModelConfig mc;
    mc.kind = *model_kind_from_name(j.at("model").at("kind").get<std::string>());
    mc.d = j.at("model").at("d").get<int>();
    mc.anchor_variance = j.at("model").at("anchor_variance").get<double>();

    Model model(mc, vocab_from_json(j.at("vocab")), encoding_from_json(j.at("encoding")));
    for (const auto& tj : j.at("tensors")) {
        Tensor& t = model.params().at(tj.at("name").get<std::string>());
        auto data = tj.at("data").get<std::vector<double>>();
        if (data.size() != t.size())
            throw TrainError("tensor size mismatch in checkpoint: " + t.name);
        t.data = std::move(data);
    }

    const auto& opt = j.at("optimizer");
    AdamConfig ac{opt.at("lr").get<double>(), opt.at("beta1").get<double>(),
                  opt.at("beta2").get<double>(), opt.at("eps").get<double>()};
    Adam adam(model.params(), ac);
    adam.t = opt.at("t").get<long>();
    adam.m = opt.at("m").get<std::vector<std::vector<double>>>();
    adam.v = opt.at("v").get<std::vector<std::vector<double>>>();

    TrainState st;
    st.step = j.at("state").at("step").get<long>();
    st.rng_state = j.at("state").at("rng").get<std::string>();
    st.train_ms_total = j.at("state").at("train_ms_total").get<double>();
    st.queries_seen = j.at("state").at("queries_seen").get<long>();

    return Checkpoint{std::move(model), std::move(adam), std::move(st),
                      j.value("run_config", "")};
}

}  // namespace nrn

#include "nrn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace nrn {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw KgError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw KgError("cannot write " + path);
    out << content;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

ordered_json split_counts(const KnowledgeGraph& g) {
    std::vector<char> attested(g.vocab.num_values(), 0);
    for (const auto& e : g.attr_edges) attested[e.value] = 1;
    long n_attested = std::count(attested.begin(), attested.end(), 1);
    return {{"rel_edges", g.rel_edges.size()},
            {"attr_edges", g.attr_edges.size()},
            {"num_edges", g.num_edges.size()},
            {"edges", g.rel_edges.size() + g.attr_edges.size() + g.num_edges.size()},
            {"attested_values", n_attested}};
}

}  // namespace

void cmd_build(const BuildOptions& opt) {
    KnowledgeGraph full = load_triples(opt.rel_path, opt.attr_path, opt.type_map_path);
    SplitGraphs splits = split_edges(full, opt.seed);

    // Augment once on the full (test) graph; the smaller graphs keep the
    // subset of sampled edges whose endpoints they attest, so the cumulative
    // edge-set invariant holds across all three.
    KnowledgeGraph test = augment_numerical_edges(splits.test, opt.cap_per_type, opt.seed + 1);
    KnowledgeGraph val = splits.val;
    val.num_edges = test.num_edges;
    val = restrict_num_edges_to_attested(val);
    KnowledgeGraph train = splits.train;
    train.num_edges = test.num_edges;
    train = restrict_num_edges_to_attested(train);

    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/train_graph.json", train.to_json());
    write_file(opt.out_dir + "/val_graph.json", val.to_json());
    write_file(opt.out_dir + "/test_graph.json", test.to_json());

    ordered_json manifest;
    manifest["command"] = "build";
    manifest["options"] = {{"rel", opt.rel_path},
                           {"attr", opt.attr_path},
                           {"types", opt.type_map_path},
                           {"cap_per_type", opt.cap_per_type},
                           {"seed", opt.seed}};
    manifest["entities"] = full.vocab.num_entities();
    manifest["relations"] = full.vocab.relation_names.size();
    manifest["attributes"] = full.vocab.attribute_names.size();
    manifest["value_types"] = full.vocab.value_type_names.size();
    manifest["values"] = full.vocab.num_values();
    manifest["splits"] = {{"train", split_counts(train)},
                          {"val", split_counts(val)},
                          {"test", split_counts(test)}};
    write_file(opt.out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

void cmd_synth(const SynthOptions& opt) {
    KnowledgeGraph g = make_synthetic_kg(opt.entities, opt.relations, opt.attr_types,
                                         opt.values, opt.density, opt.seed);
    fs::create_directories(opt.out_dir);

    std::ostringstream rel;
    for (const auto& e : g.rel_edges)
        rel << g.vocab.entity_names[e.head] << '\t' << g.vocab.relation_names[e.rel] << '\t'
            << g.vocab.entity_names[e.tail] << '\n';
    write_file(opt.out_dir + "/rel.tsv", rel.str());

    std::ostringstream attr;
    for (const auto& e : g.attr_edges)
        attr << g.vocab.entity_names[e.entity] << '\t' << g.vocab.attribute_names[e.attr]
             << '\t' << format_double(g.vocab.values[e.value].value) << '\n';
    write_file(opt.out_dir + "/attr.tsv", attr.str());

    std::ostringstream types;
    for (std::size_t a = 0; a < g.vocab.attribute_names.size(); ++a)
        types << g.vocab.attribute_names[a] << '\t'
              << g.vocab.value_type_names[g.vocab.attribute_type[a]] << '\n';
    write_file(opt.out_dir + "/types.tsv", types.str());
}

SplitGraphs load_split_graphs(const std::string& dir) {
    SplitGraphs s;
    s.train = KnowledgeGraph::from_json(read_file(dir + "/train_graph.json"));
    s.val = KnowledgeGraph::from_json(read_file(dir + "/val_graph.json"));
    s.test = KnowledgeGraph::from_json(read_file(dir + "/test_graph.json"));
    return s;
}

namespace {

ordered_json stats_to_json(const SampleStats& st) {
    ordered_json j;
    j["attempted"] = st.attempted;
    j["kept"] = st.kept;
    j["dropped_filter"] = st.dropped_filter;
    j["dropped_dead_end"] = st.dropped_dead_end;
    j["dropped_duplicate"] = st.dropped_duplicate;
    double drop_rate = st.attempted > 0
                           ? static_cast<double>(st.dropped_filter) / st.attempted
                           : 0.0;
    j["filter_drop_rate"] = drop_rate;
    return j;
}

}  // namespace

void cmd_sample(const SampleOptions& opt) {
    SplitGraphs splits = load_split_graphs(opt.splits_dir);
    SampleConfig cfg;
    cfg.counts = opt.counts;
    cfg.retry_budget = opt.retry_budget;
    cfg.value_root_period = opt.value_root_period;
    cfg.seed = opt.seed;
    Dataset ds = sample_dataset(splits, cfg);

    fs::create_directories(opt.out_dir);
    write_records(opt.out_dir + "/train_queries.jsonl", ds.train, RecordSplit::Train);
    write_records(opt.out_dir + "/val_queries.jsonl", ds.val, RecordSplit::Val);
    write_records(opt.out_dir + "/test_queries.jsonl", ds.test, RecordSplit::Test);

    ordered_json manifest;
    manifest["command"] = "sample";
    ordered_json counts = ordered_json::array();
    for (const auto& [shape, n] : opt.counts)
        counts.push_back({general_type_name(shape), n});
    manifest["options"] = {{"counts", counts},
                           {"retry_budget", opt.retry_budget},
                           {"value_root_period", opt.value_root_period},
                           {"seed", opt.seed}};
    manifest["train"] = stats_to_json(ds.train_stats);
    manifest["val"] = stats_to_json(ds.val_stats);
    manifest["test"] = stats_to_json(ds.test_stats);
    write_file(opt.out_dir + "/sample_manifest.json", manifest.dump(2) + "\n");
}

namespace {

std::string trace_to_csv(const std::vector<TraceEntry>& trace) {
    std::ostringstream os;
    os << "step,kind,loss\n";
    char buf[64];
    for (const auto& e : trace) {
        std::snprintf(buf, sizeof(buf), "%ld,%c,%.17g\n", e.step, e.kind, e.loss);
        os << buf;
    }
    return os.str();
}

ordered_json train_options_to_json(const TrainOptions& o) {
    ordered_json j;
    j["model"] = model_kind_name(o.kind);
    j["encoder"] = encoder_kind_name(o.encoder);
    j["d"] = o.d;
    j["anchor_variance"] = o.anchor_variance;
    j["steps"] = o.steps;
    j["batch_size"] = o.batch_size;
    j["entity_steps"] = o.entity_steps;
    j["attr_steps"] = o.attr_steps;
    j["clip_norm"] = o.clip_norm;
    j["lr"] = o.adam.lr;
    j["beta1"] = o.adam.beta1;
    j["beta2"] = o.adam.beta2;
    j["eps"] = o.adam.eps;
    j["seed"] = o.seed;
    return j;
}

}  // namespace

void cmd_train(const TrainOptions& opt) {
    KnowledgeGraph train_graph =
        KnowledgeGraph::from_json(read_file(opt.data_dir + "/train_graph.json"));
    std::vector<QueryRecord> records =
        read_records(opt.data_dir + "/train_queries.jsonl", train_graph.vocab);

    TrainConfig tc;
    tc.steps = opt.steps;
    tc.batch_size = opt.batch_size;
    tc.entity_steps = opt.entity_steps;
    tc.attr_steps = opt.attr_steps;
    tc.clip_norm = opt.clip_norm;
    tc.adam = opt.adam;

    std::vector<TraceEntry> trace;
    std::string run_config = train_options_to_json(opt).dump();

    if (!opt.resume_path.empty()) {
        Checkpoint ck = load_checkpoint(opt.resume_path);
        Rng rng(0);
        rng.load_state(ck.state.rng_state);
        trace = train_model(ck.model, records, tc, ck.adam, rng, ck.state);
        save_checkpoint(opt.out_path, ck.model, ck.adam, ck.state, run_config);
    } else {
        EncodingSpec spec;
        spec.kind = opt.encoder;
        spec.dim = opt.d;
        if (spec.kind == EncoderKind::Dice) spec.ranges = value_ranges_of(train_graph);

        ModelConfig mc;
        mc.kind = opt.kind;
        mc.d = opt.d;
        mc.anchor_variance = opt.anchor_variance;

        Model model(mc, train_graph.vocab, spec);
        Rng rng(opt.seed);
        model.init_params(rng);
        Adam adam(model.params(), opt.adam);
        TrainState state;
        trace = train_model(model, records, tc, adam, rng, state);
        save_checkpoint(opt.out_path, model, adam, state, run_config);
    }

    std::string trace_path =
        opt.trace_path.empty() ? opt.out_path + ".trace.csv" : opt.trace_path;
    write_file(trace_path, trace_to_csv(trace));
}

Report cmd_eval(const EvalCmdOptions& opt, std::ostream& text_out) {
    Checkpoint ck = load_checkpoint(opt.checkpoint_path);
    std::string file = opt.split == RecordSplit::Val ? "/val_queries.jsonl"
                                                     : "/test_queries.jsonl";
    std::vector<QueryRecord> records =
        read_records(opt.data_dir + file, ck.model.vocab());

    std::vector<RankEntry> dump;
    Report rep = evaluate(ck.model, records, opt.split, &dump);
    rep.train_ms_per_query = ck.state.train_ms_per_query();

    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_file(opt.out_dir + "/rank_dump.tsv", rank_dump_to_tsv(dump));
        write_file(opt.out_dir + "/report.json", report_to_json(rep) + "\n");
    }
    text_out << report_to_text(rep);
    return rep;
}

void cmd_answer(const AnswerOptions& opt, std::ostream& out) {
    Checkpoint ck = load_checkpoint(opt.checkpoint_path);
    Model& model = ck.model;
    ComputationGraph graph = parse_query(opt.query, model.vocab());

    if (!opt.graph_path.empty()) {
        KnowledgeGraph g = KnowledgeGraph::from_json(read_file(opt.graph_path));
        ComputationGraph oracle_graph = parse_query(opt.query, g.vocab);
        std::vector<int> answers = search_answers(oracle_graph, g);
        out << "exact answers (" << answers.size() << "):";
        for (int a : answers) {
            if (graph.root_phase() == Phase::Entity)
                out << ' ' << g.vocab.entity_names[a];
            else
                out << ' ' << format_double(g.vocab.values[a].value) << '@'
                    << g.vocab.value_type_names[g.vocab.values[a].type];
        }
        out << '\n';
    }

    std::vector<double> root = model.encode_state(graph);
    std::vector<std::pair<double, int>> scored;
    if (graph.root_phase() == Phase::Entity) {
        std::vector<double> scores = model.score_all_entities(root);
        for (std::size_t i = 0; i < scores.size(); ++i)
            scored.emplace_back(scores[i], static_cast<int>(i));
    } else {
        for (int v : model.value_candidates(graph.root_value_type(model.vocab())))
            scored.emplace_back(model.score_value(root, v), v);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    int k = std::min<int>(opt.topk, static_cast<int>(scored.size()));
    out << "model top-" << k << ":\n";
    for (int i = 0; i < k; ++i) {
        const auto& [score, id] = scored[i];
        out << "  " << (i + 1) << ". ";
        if (graph.root_phase() == Phase::Entity)
            out << model.vocab().entity_names[id];
        else
            out << format_double(model.vocab().values[id].value) << '@'
                << model.vocab().value_type_names[model.vocab().values[id].type];
        char buf[48];
        std::snprintf(buf, sizeof(buf), "  (score %.6f)", score);
        out << buf << '\n';
    }
}

}  // namespace nrn

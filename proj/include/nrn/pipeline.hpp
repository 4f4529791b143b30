#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nrn/eval.hpp"
#include "nrn/kg.hpp"
#include "nrn/model.hpp"
#include "nrn/sampler.hpp"
#include "nrn/train.hpp"

namespace nrn {

// End-to-end command bodies shared by the CLI binary and the test suites.
// Every artifact they write is a pure function of (inputs, options, seed).

struct BuildOptions {
    std::string rel_path, attr_path, type_map_path;
    std::string out_dir;
    int cap_per_type = 4000;
    std::uint64_t seed = 0;
};
// load -> split 8:1:1 -> augment numerical edges on the full graph, kept in a
// smaller split only when both endpoints are attested by its attribute edges.
// Writes {train,val,test}_graph.json and manifest.json.
void cmd_build(const BuildOptions& opt);

struct SynthOptions {
    int entities = 200, relations = 8, attr_types = 3, values = 120;
    double density = 0.02;
    std::uint64_t seed = 0;
    std::string out_dir;
};
// Writes rel.tsv / attr.tsv / types.tsv for a deterministic synthetic graph.
void cmd_synth(const SynthOptions& opt);

struct SampleOptions {
    std::string splits_dir;  // dir holding the three *_graph.json files
    std::string out_dir;
    std::vector<std::pair<GeneralType, int>> counts;
    int retry_budget = 128;
    int value_root_period = 5;
    std::uint64_t seed = 0;
};
// Writes {train,val,test}_queries.jsonl and sample_manifest.json.
void cmd_sample(const SampleOptions& opt);

struct TrainOptions {
    std::string data_dir;     // graphs + query files from build/sample
    std::string out_path;     // checkpoint destination
    std::string resume_path;  // optional checkpoint to continue from
    std::string trace_path;   // defaults to out_path + ".trace.csv"
    ModelKind kind = ModelKind::TwoPhase;
    EncoderKind encoder = EncoderKind::Sinusoidal;
    int d = 16;
    double anchor_variance = 0.01;
    long steps = 1000;
    int batch_size = 128;
    int entity_steps = 1, attr_steps = 1;
    double clip_norm = 1.0;
    AdamConfig adam;
    std::uint64_t seed = 0;
};
void cmd_train(const TrainOptions& opt);

struct EvalCmdOptions {
    std::string checkpoint_path;
    std::string data_dir;
    RecordSplit split = RecordSplit::Test;
    std::string out_dir;  // rank_dump.tsv + report.json; empty = don't write
};
Report cmd_eval(const EvalCmdOptions& opt, std::ostream& text_out);

struct AnswerOptions {
    std::string checkpoint_path;
    std::string query;
    std::string graph_path;  // optional; enables the exact-search answer set
    int topk = 10;
};
void cmd_answer(const AnswerOptions& opt, std::ostream& out);

// helpers shared with tests
SplitGraphs load_split_graphs(const std::string& dir);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace nrn

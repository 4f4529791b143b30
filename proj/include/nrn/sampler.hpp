#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nrn/kg.hpp"
#include "nrn/query.hpp"
#include "nrn/rng.hpp"

namespace nrn {

// Either an entity or a value node of a graph.
struct NodeRef {
    bool is_value = false;
    int id = -1;
};

struct GroundedQuery {
    ComputationGraph graph;
    NodeRef seed;  // the vertex the query was grounded backwards from
};

// Exact bottom-up set evaluation over the computation DAG. Numerical
// projections traverse materialized num_edges only. Returns sorted ids
// (entity ids or value ids, per root phase); empty is a valid result.
std::vector<int> search_answers(const ComputationGraph& g, const KnowledgeGraph& kg);

// One grounding attempt per the backward-sampling recursion: projections
// sample an in-edge of any class, intersections reuse the same vertex, union
// branches after the first draw a fresh vertex of the same class (and value
// type). Returns nullopt on a dead end so the caller can resample the seed.
std::optional<GroundedQuery> ground_general_type(GeneralType shape, NodeRef seed,
                                                 const KnowledgeGraph& kg, Rng& rng);

// Retry wrapper: samples seed vertices of the requested class until an
// attempt succeeds or the budget is exhausted.
std::optional<GroundedQuery> sample_query(GeneralType shape, bool value_rooted,
                                          const KnowledgeGraph& kg, Rng& rng,
                                          int retry_budget = 128);

struct QueryRecord {
    std::string query;
    GeneralType type = GeneralType::OneP;
    std::vector<int> answers_train, answers_val, answers_test;
    NodeRef seed;  // audit only, never serialized
};

struct SampleConfig {
    std::vector<std::pair<GeneralType, int>> counts;  // per-shape targets
    int retry_budget = 128;
    // one value-rooted query per this many sampled, so the attribute loss has
    // training signal; 5 gives the 1:4 numeric:entity mix
    int value_root_period = 5;
    std::uint64_t seed = 0;
};

struct SampleStats {
    long attempted = 0;
    long kept = 0;
    long dropped_filter = 0;    // identical answer counts across the two graphs
    long dropped_dead_end = 0;  // grounding budget exhausted
    long dropped_duplicate = 0;
};

struct Dataset {
    std::vector<QueryRecord> train, val, test;
    SampleStats train_stats, val_stats, test_stats;
};

// Grounds queries independently on the three cumulative graphs and applies
// the answer-count filters: a validation record must gain answers over the
// training graph, a test record over the validation graph.
Dataset sample_dataset(const SplitGraphs& splits, const SampleConfig& cfg);

enum class RecordSplit { Train, Val, Test };

std::string record_to_json(const QueryRecord& r, RecordSplit split);
QueryRecord record_from_json(const std::string& line, const Vocab& vocab);

void write_records(const std::string& path, const std::vector<QueryRecord>& records,
                   RecordSplit split);
std::vector<QueryRecord> read_records(const std::string& path, const Vocab& vocab);

}  // namespace nrn

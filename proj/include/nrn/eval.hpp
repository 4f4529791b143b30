#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "nrn/model.hpp"
#include "nrn/sampler.hpp"

namespace nrn {

enum class Metric { MRR, Hit1, Hit3, Hit10 };

// Mean of m(rank) over the hard answers of one query.
double metric_of_query(const std::vector<int>& hard_ranks, Metric metric);

// Filtered rank of `target_id` among candidates: other known answers never
// count against it and score ties are broken by ascending id. `scores` is
// positional over `candidate_ids`.
int filtered_rank(const std::vector<double>& scores, const std::vector<int>& candidate_ids,
                  double target_score, int target_id,
                  const std::unordered_set<int>& known_answers);

// One line of the rank dump: a (query, hard answer, filtered rank) triple.
struct RankEntry {
    int query_index;
    GeneralType type;
    int answer;
    int rank;
};

struct MetricRow {
    double mrr = 0.0, hit1 = 0.0, hit3 = 0.0, hit10 = 0.0;
    long queries = 0;
};

struct Report {
    std::array<std::optional<MetricRow>, kGeneralTypeCount> per_type;
    MetricRow macro;  // unweighted mean over the general types present
    MetricRow micro;  // unweighted mean over queries
    long evaluated = 0;
    long skipped = 0;  // empty hard-answer set
    double inference_ms_per_query = 0.0;
    double train_ms_per_query = 0.0;  // carried from the checkpoint
};

// Ranks every hard answer of every record with the filtered protocol (other
// known answers of the split removed from the candidate list; ties broken by
// ascending id) and aggregates Hit@1/3/10 and MRR.
Report evaluate(Model& model, const std::vector<QueryRecord>& records, RecordSplit split,
                std::vector<RankEntry>* dump = nullptr);

std::string rank_dump_to_tsv(const std::vector<RankEntry>& dump);
std::string report_to_json(const Report& r);
std::string report_to_text(const Report& r);

// Recomputes a report's metric table from a rank dump alone; the audit path
// for the metric arithmetic.
Report report_from_rank_dump(const std::vector<RankEntry>& dump);

}  // namespace nrn

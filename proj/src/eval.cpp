#include "nrn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace nrn {

using ordered_json = nlohmann::ordered_json;

double metric_of_query(const std::vector<int>& hard_ranks, Metric metric) {
    if (hard_ranks.empty()) throw std::invalid_argument("empty hard-answer set");
    double acc = 0.0;
    for (int r : hard_ranks) {
        switch (metric) {
            case Metric::MRR: acc += 1.0 / static_cast<double>(r); break;
            case Metric::Hit1: acc += r <= 1 ? 1.0 : 0.0; break;
            case Metric::Hit3: acc += r <= 3 ? 1.0 : 0.0; break;
            case Metric::Hit10: acc += r <= 10 ? 1.0 : 0.0; break;
        }
    }
    return acc / static_cast<double>(hard_ranks.size());
}

int filtered_rank(const std::vector<double>& scores, const std::vector<int>& candidate_ids,
                  double target_score, int target_id,
                  const std::unordered_set<int>& known_answers) {
    int rank = 1;
    for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
        int c = candidate_ids[i];
        if (c == target_id || known_answers.count(c)) continue;
        if (scores[i] > target_score || (scores[i] == target_score && c < target_id)) ++rank;
    }
    return rank;
}

namespace {

std::vector<int> set_difference_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

struct Accum {
    double mrr = 0, hit1 = 0, hit3 = 0, hit10 = 0;
    long n = 0;
    void add(const std::vector<int>& ranks) {
        mrr += metric_of_query(ranks, Metric::MRR);
        hit1 += metric_of_query(ranks, Metric::Hit1);
        hit3 += metric_of_query(ranks, Metric::Hit3);
        hit10 += metric_of_query(ranks, Metric::Hit10);
        n += 1;
    }
    MetricRow row() const {
        MetricRow r;
        if (n > 0) {
            r.mrr = mrr / n;
            r.hit1 = hit1 / n;
            r.hit3 = hit3 / n;
            r.hit10 = hit10 / n;
        }
        r.queries = n;
        return r;
    }
};

Report aggregate(const std::array<Accum, kGeneralTypeCount>& per_type, const Accum& micro) {
    Report rep;
    MetricRow macro;
    int present = 0;
    for (int t = 0; t < kGeneralTypeCount; ++t) {
        if (per_type[t].n == 0) continue;
        MetricRow row = per_type[t].row();
        rep.per_type[t] = row;
        macro.mrr += row.mrr;
        macro.hit1 += row.hit1;
        macro.hit3 += row.hit3;
        macro.hit10 += row.hit10;
        macro.queries += row.queries;
        present += 1;
    }
    if (present > 0) {
        macro.mrr /= present;
        macro.hit1 /= present;
        macro.hit3 /= present;
        macro.hit10 /= present;
    }
    rep.macro = macro;
    rep.micro = micro.row();
    rep.evaluated = micro.n;
    return rep;
}

}  // namespace

Report evaluate(Model& model, const std::vector<QueryRecord>& records, RecordSplit split,
                std::vector<RankEntry>* dump) {
    std::array<Accum, kGeneralTypeCount> per_type;
    Accum micro;
    long skipped = 0;

    auto t_begin = std::chrono::steady_clock::now();
    long scored = 0;

    for (std::size_t qi = 0; qi < records.size(); ++qi) {
        const QueryRecord& rec = records[qi];
        const std::vector<int>& full = split == RecordSplit::Test ? rec.answers_test
                                                                  : rec.answers_val;
        const std::vector<int>& prev = split == RecordSplit::Test ? rec.answers_val
                                                                  : rec.answers_train;
        std::vector<int> hard = set_difference_sorted(full, prev);
        if (hard.empty()) {
            ++skipped;
            continue;
        }

        ComputationGraph graph = parse_query(rec.query, model.vocab());
        std::vector<double> root = model.encode_state(graph);

        std::vector<int> candidate_ids;
        std::vector<double> scores;
        if (graph.root_phase() == Phase::Entity) {
            scores = model.score_all_entities(root);
            candidate_ids.resize(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i)
                candidate_ids[i] = static_cast<int>(i);
        } else {
            candidate_ids = model.value_candidates(graph.root_value_type(model.vocab()));
            scores.reserve(candidate_ids.size());
            for (int v : candidate_ids) scores.push_back(model.score_value(root, v));
        }
        scored += 1;

        std::unordered_set<int> known(full.begin(), full.end());
        // candidate_ids is ascending, so targets are found by bisection
        auto score_of = [&](int id) {
            auto it = std::lower_bound(candidate_ids.begin(), candidate_ids.end(), id);
            if (it == candidate_ids.end() || *it != id)
                throw ModelError("hard answer " + std::to_string(id) +
                                 " is not in the candidate set");
            return scores[it - candidate_ids.begin()];
        };

        std::vector<int> ranks;
        ranks.reserve(hard.size());
        for (int target : hard) {
            int r = filtered_rank(scores, candidate_ids, score_of(target), target, known);
            ranks.push_back(r);
            if (dump != nullptr)
                dump->push_back({static_cast<int>(qi), rec.type, target, r});
        }

        per_type[static_cast<int>(rec.type)].add(ranks);
        micro.add(ranks);
    }
    auto t_end = std::chrono::steady_clock::now();

    Report rep = aggregate(per_type, micro);
    rep.skipped = skipped;
    if (scored > 0)
        rep.inference_ms_per_query =
            std::chrono::duration<double, std::milli>(t_end - t_begin).count() / scored;
    return rep;
}

Report report_from_rank_dump(const std::vector<RankEntry>& dump) {
    std::map<int, std::pair<GeneralType, std::vector<int>>> by_query;
    for (const RankEntry& e : dump) {
        auto& slot = by_query[e.query_index];
        slot.first = e.type;
        slot.second.push_back(e.rank);
    }
    std::array<Accum, kGeneralTypeCount> per_type;
    Accum micro;
    for (const auto& [qi, entry] : by_query) {
        per_type[static_cast<int>(entry.first)].add(entry.second);
        micro.add(entry.second);
    }
    return aggregate(per_type, micro);
}

std::string rank_dump_to_tsv(const std::vector<RankEntry>& dump) {
    std::ostringstream os;
    for (const RankEntry& e : dump)
        os << e.query_index << '\t' << general_type_name(e.type) << '\t' << e.answer << '\t'
           << e.rank << '\n';
    return os.str();
}

namespace {

ordered_json row_to_json(const MetricRow& r) {
    return {{"mrr", r.mrr}, {"hit1", r.hit1}, {"hit3", r.hit3}, {"hit10", r.hit10},
            {"queries", r.queries}};
}

}  // namespace

std::string report_to_json(const Report& r) {
    ordered_json j;
    ordered_json types;
    for (int t = 0; t < kGeneralTypeCount; ++t)
        if (r.per_type[t])
            types[general_type_name(static_cast<GeneralType>(t))] = row_to_json(*r.per_type[t]);
    j["per_type"] = types;
    j["macro"] = row_to_json(r.macro);
    j["micro"] = row_to_json(r.micro);
    j["evaluated"] = r.evaluated;
    j["skipped"] = r.skipped;
    j["timing_ms_per_query"] = {{"training", r.train_ms_per_query},
                                {"inference", r.inference_ms_per_query}};
    return j.dump(2);
}

std::string report_to_text(const Report& r) {
    std::ostringstream os;
    char line[160];
    os << "type        MRR   Hit@1   Hit@3  Hit@10  queries\n";
    auto put = [&](const char* name, const MetricRow& row) {
        std::snprintf(line, sizeof(line), "%-6s %8.4f %7.4f %7.4f %7.4f %8ld\n", name,
                      row.mrr, row.hit1, row.hit3, row.hit10, row.queries);
        os << line;
    };
    for (int t = 0; t < kGeneralTypeCount; ++t)
        if (r.per_type[t]) put(general_type_name(static_cast<GeneralType>(t)), *r.per_type[t]);
    put("macro", r.macro);
    put("micro", r.micro);
    std::snprintf(line, sizeof(line),
                  "evaluated %ld queries, skipped %ld without hard answers\n", r.evaluated,
                  r.skipped);
    os << line;
    std::snprintf(line, sizeof(line),
                  "time per query (ms): training %.4f, inference %.4f\n",
                  r.train_ms_per_query, r.inference_ms_per_query);
    os << line;
    return os.str();
}

}  // namespace nrn

#include "nrn/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace nrn {

using ordered_json = nlohmann::ordered_json;

namespace {

void merge_into(std::vector<int>& acc, const std::vector<int>& more) {
    acc.insert(acc.end(), more.begin(), more.end());
}

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

std::vector<int> search_answers(const ComputationGraph& g, const KnowledgeGraph& kg) {
    std::vector<std::vector<int>> sets(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const QueryNode& n = g.nodes[i];
        std::vector<int>& out = sets[i];
        switch (n.kind) {
            case NodeKind::AnchorEntity: out = {n.anchor_entity}; break;
            case NodeKind::AnchorValue: {
                auto id = kg.vocab.find_value(n.anchor_value, n.anchor_value_type);
                if (id) out = {*id};
                break;
            }
            case NodeKind::RelProj:
                for (int u : sets[n.children[0]]) merge_into(out, kg.rel_successors(u, n.label));
                out = sorted_unique(std::move(out));
                break;
            case NodeKind::AttrProj:
                for (int u : sets[n.children[0]]) merge_into(out, kg.attr_values(u, n.label));
                out = sorted_unique(std::move(out));
                break;
            case NodeKind::RevAttrProj:
                for (int x : sets[n.children[0]])
                    merge_into(out, kg.entities_with_value(x, n.label));
                out = sorted_unique(std::move(out));
                break;
            case NodeKind::NumProj:
                for (int x : sets[n.children[0]])
                    merge_into(out, kg.num_successors(x, static_cast<NumRel>(n.label)));
                out = sorted_unique(std::move(out));
                break;
            case NodeKind::Intersection: {
                out = sets[n.children[0]];
                for (std::size_t c = 1; c < n.children.size(); ++c) {
                    std::vector<int> tmp;
                    const std::vector<int>& rhs = sets[n.children[c]];
                    std::set_intersection(out.begin(), out.end(), rhs.begin(), rhs.end(),
                                          std::back_inserter(tmp));
                    out = std::move(tmp);
                }
                break;
            }
            case NodeKind::Union: {
                for (int c : n.children) merge_into(out, sets[c]);
                out = sorted_unique(std::move(out));
                break;
            }
        }
    }
    return sets[g.root()];
}

// --- grounding ---

namespace {

// Skeletons of the eight shapes; P nodes become concrete projections during
// grounding, L nodes become anchors.
struct Shape {
    enum Kind { P, I, U, L } kind;
    std::vector<Shape> children;
};

Shape shape_of(GeneralType t) {
    Shape leaf{Shape::L, {}};
    auto p = [](Shape c) { return Shape{Shape::P, {std::move(c)}}; };
    switch (t) {
        case GeneralType::OneP: return p(leaf);
        case GeneralType::TwoP: return p(p(leaf));
        case GeneralType::TwoI: return Shape{Shape::I, {p(leaf), p(leaf)}};
        case GeneralType::ThreeI: return Shape{Shape::I, {p(leaf), p(leaf), p(leaf)}};
        case GeneralType::Ip: return p(Shape{Shape::I, {p(leaf), p(leaf)}});
        case GeneralType::Pi: return Shape{Shape::I, {p(leaf), p(p(leaf))}};
        case GeneralType::TwoU: return Shape{Shape::U, {p(leaf), p(leaf)}};
        case GeneralType::Up: return p(Shape{Shape::U, {p(leaf), p(leaf)}});
    }
    return leaf;
}

class Grounder {
public:
    Grounder(const KnowledgeGraph& kg, Rng& rng) : kg_(kg), rng_(rng) {
        values_by_type_.resize(kg.vocab.value_type_names.size());
        for (int v = 0; v < kg.vocab.num_values(); ++v)
            values_by_type_[kg.vocab.values[v].type].push_back(v);
    }

    std::optional<ComputationGraph> run(const Shape& shape, NodeRef seed) {
        ComputationGraph g;
        if (!ground(shape, seed, g)) return std::nullopt;
        validate_graph(g);
        return g;
    }

private:
    const KnowledgeGraph& kg_;
    Rng& rng_;
    std::vector<std::vector<int>> values_by_type_;

    // local retry budget for re-sampled union branches
    static constexpr int kBranchRetries = 32;

    bool ground(const Shape& s, NodeRef v, ComputationGraph& g) {
        switch (s.kind) {
            case Shape::L: {
                QueryNode n{};
                if (v.is_value) {
                    n.kind = NodeKind::AnchorValue;
                    n.anchor_value = kg_.vocab.values[v.id].value;
                    n.anchor_value_type = kg_.vocab.values[v.id].type;
                } else {
                    n.kind = NodeKind::AnchorEntity;
                    n.anchor_entity = v.id;
                }
                g.nodes.push_back(std::move(n));
                return true;
            }
            case Shape::P: {
                const auto& in = v.is_value ? kg_.in_edges_of_value(v.id)
                                            : kg_.in_edges_of_entity(v.id);
                if (in.empty()) return false;
                const InEdge& e = in[rng_.index(in.size())];
                NodeRef child{e.kind == InEdge::Rap || e.kind == InEdge::Np, e.source};
                if (!ground(s.children[0], child, g)) return false;
                QueryNode n{};
                switch (e.kind) {
                    case InEdge::Rel: n.kind = NodeKind::RelProj; break;
                    case InEdge::Ap: n.kind = NodeKind::AttrProj; break;
                    case InEdge::Rap: n.kind = NodeKind::RevAttrProj; break;
                    case InEdge::Np: n.kind = NodeKind::NumProj; break;
                }
                n.label = e.label;
                n.children = {g.root()};
                g.nodes.push_back(std::move(n));
                return true;
            }
            case Shape::I: {
                std::vector<int> kids;
                for (const Shape& c : s.children) {
                    if (!ground(c, v, g)) return false;
                    kids.push_back(g.root());
                }
                QueryNode n{};
                n.kind = NodeKind::Intersection;
                n.children = std::move(kids);
                g.nodes.push_back(std::move(n));
                return true;
            }
            case Shape::U: {
                std::vector<int> kids;
                for (std::size_t i = 0; i < s.children.size(); ++i) {
                    if (i == 0) {
                        // only one disjunct has to contain the seed vertex
                        if (!ground(s.children[i], v, g)) return false;
                    } else {
                        bool ok = false;
                        for (int t = 0; t < kBranchRetries && !ok; ++t)
                            ok = ground(s.children[i], fresh_like(v), g);
                        if (!ok) return false;
                    }
                    kids.push_back(g.root());
                }
                QueryNode n{};
                n.kind = NodeKind::Union;
                n.children = std::move(kids);
                g.nodes.push_back(std::move(n));
                return true;
            }
        }
        return false;
    }

    NodeRef fresh_like(NodeRef v) {
        if (!v.is_value) return {false, rng_.index(kg_.vocab.num_entities())};
        const auto& pool = values_by_type_[kg_.vocab.values[v.id].type];
        return {true, pool[rng_.index(pool.size())]};
    }
};

}  // namespace

std::optional<GroundedQuery> ground_general_type(GeneralType shape, NodeRef seed,
                                                 const KnowledgeGraph& kg, Rng& rng) {
    Grounder grounder(kg, rng);
    auto g = grounder.run(shape_of(shape), seed);
    if (!g) return std::nullopt;
    return GroundedQuery{std::move(*g), seed};
}

std::optional<GroundedQuery> sample_query(GeneralType shape, bool value_rooted,
                                          const KnowledgeGraph& kg, Rng& rng,
                                          int retry_budget) {
    int n_entities = kg.vocab.num_entities();
    int n_values = kg.vocab.num_values();
    if ((value_rooted && n_values == 0) || (!value_rooted && n_entities == 0))
        return std::nullopt;
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        NodeRef seed{value_rooted, rng.index(value_rooted ? n_values : n_entities)};
        auto q = ground_general_type(shape, seed, kg, rng);
        if (q) return q;
    }
    return std::nullopt;
}

// --- dataset sampling ---

namespace {

struct SplitTask {
    RecordSplit split;
    const KnowledgeGraph* sample_graph;
};

}  // namespace

Dataset sample_dataset(const SplitGraphs& splits, const SampleConfig& cfg) {
    Dataset out;
    Rng rng(cfg.seed);

    const SplitTask tasks[3] = {
        {RecordSplit::Train, &splits.train},
        {RecordSplit::Val, &splits.val},
        {RecordSplit::Test, &splits.test},
    };

    for (const SplitTask& task : tasks) {
        std::vector<QueryRecord>& records = task.split == RecordSplit::Train ? out.train
                                            : task.split == RecordSplit::Val ? out.val
                                                                             : out.test;
        SampleStats& stats = task.split == RecordSplit::Train ? out.train_stats
                             : task.split == RecordSplit::Val ? out.val_stats
                                                              : out.test_stats;

        for (const auto& [shape, target] : cfg.counts) {
            std::unordered_set<std::string> seen;
            int kept = 0;
            long max_attempts = static_cast<long>(target) * 20 + 100;
            for (long attempt = 0; kept < target && attempt < max_attempts; ++attempt) {
                stats.attempted += 1;
                bool value_rooted = cfg.value_root_period > 0 &&
                                    attempt % cfg.value_root_period ==
                                        cfg.value_root_period - 1;
                auto q = sample_query(shape, value_rooted, *task.sample_graph, rng,
                                      cfg.retry_budget);
                if (!q) {
                    stats.dropped_dead_end += 1;
                    continue;
                }
                QueryRecord rec;
                rec.query = serialize_query(q->graph, task.sample_graph->vocab);
                rec.type = shape;
                rec.seed = q->seed;
                if (!seen.insert(rec.query).second) {
                    stats.dropped_duplicate += 1;
                    continue;
                }

                rec.answers_train = search_answers(q->graph, splits.train);
                if (task.split != RecordSplit::Train) {
                    rec.answers_val = search_answers(q->graph, splits.val);
                    if (task.split == RecordSplit::Val &&
                        rec.answers_val.size() == rec.answers_train.size()) {
                        stats.dropped_filter += 1;
                        continue;
                    }
                    if (task.split == RecordSplit::Test) {
                        rec.answers_test = search_answers(q->graph, splits.test);
                        if (rec.answers_test.size() == rec.answers_val.size()) {
                            stats.dropped_filter += 1;
                            continue;
                        }
                    }
                }
                records.push_back(std::move(rec));
                stats.kept += 1;
                kept += 1;
            }
        }
    }
    return out;
}

// --- record serialization ---

std::string record_to_json(const QueryRecord& r, RecordSplit split) {
    ordered_json j;
    j["query"] = r.query;
    j["answers_train"] = r.answers_train;
    if (split != RecordSplit::Train) j["answers_val"] = r.answers_val;
    if (split == RecordSplit::Test) j["answers_test"] = r.answers_test;
    return j.dump();
}

QueryRecord record_from_json(const std::string& line, const Vocab& vocab) {
    ordered_json j = ordered_json::parse(line);
    QueryRecord r;
    r.query = j.at("query").get<std::string>();
    r.answers_train = j.value("answers_train", std::vector<int>{});
    r.answers_val = j.value("answers_val", std::vector<int>{});
    r.answers_test = j.value("answers_test", std::vector<int>{});
    ComputationGraph g = parse_query(r.query, vocab);
    r.type = general_type_of(g);
    return r;
}

void write_records(const std::string& path, const std::vector<QueryRecord>& records,
                   RecordSplit split) {
    std::ofstream outf(path);
    if (!outf) throw KgError("cannot write " + path);
    for (const auto& r : records) outf << record_to_json(r, split) << '\n';
}

std::vector<QueryRecord> read_records(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw KgError("cannot open " + path);
    std::vector<QueryRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(line, vocab));
    }
    return out;
}

}  // namespace nrn

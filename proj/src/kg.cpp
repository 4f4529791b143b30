#include "nrn/kg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace nrn {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, kNumRelCount> kNumRelNames = {
    "EqualTo",          "SmallerThan",      "GreaterThan",          "TwiceEqualTo",
    "ThreeTimesEqualTo", "TwiceGreaterThan", "ThreeTimesGreaterThan",
};

std::uint64_t pack(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

template <class T>
void sort_unique(std::vector<T>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

const char* num_rel_name(NumRel f) { return kNumRelNames[static_cast<int>(f)]; }

std::optional<NumRel> num_rel_from_name(const std::string& name) {
    for (int i = 0; i < kNumRelCount; ++i)
        if (name == kNumRelNames[i]) return static_cast<NumRel>(i);
    return std::nullopt;
}

bool num_rel_holds(NumRel f, double src, double dst) {
    switch (f) {
        case NumRel::EqualTo: return dst == src;
        case NumRel::SmallerThan: return dst < src;
        case NumRel::GreaterThan: return dst > src;
        case NumRel::TwiceEqualTo: return dst == 2.0 * src;
        case NumRel::ThreeTimesEqualTo: return dst == 3.0 * src;
        case NumRel::TwiceGreaterThan: return dst > 2.0 * src;
        case NumRel::ThreeTimesGreaterThan: return dst > 3.0 * src;
    }
    return false;
}

// --- Vocab ---

int Vocab::intern_entity(const std::string& name) {
    auto it = entity_idx_.find(name);
    if (it != entity_idx_.end()) return it->second;
    int id = num_entities();
    entity_names.push_back(name);
    entity_idx_.emplace(name, id);
    return id;
}

int Vocab::intern_relation(const std::string& name) {
    auto it = relation_idx_.find(name);
    if (it != relation_idx_.end()) return it->second;
    int id = static_cast<int>(relation_names.size());
    relation_names.push_back(name);
    relation_idx_.emplace(name, id);
    return id;
}

int Vocab::intern_attribute(const std::string& name, int type) {
    auto it = attribute_idx_.find(name);
    if (it != attribute_idx_.end()) return it->second;
    int id = static_cast<int>(attribute_names.size());
    attribute_names.push_back(name);
    attribute_type.push_back(type);
    attribute_idx_.emplace(name, id);
    return id;
}

int Vocab::intern_value_type(const std::string& name) {
    auto it = value_type_idx_.find(name);
    if (it != value_type_idx_.end()) return it->second;
    int id = static_cast<int>(value_type_names.size());
    value_type_names.push_back(name);
    value_type_idx_.emplace(name, id);
    return id;
}

int Vocab::intern_value(double value, int type) {
    if (!std::isfinite(value)) throw KgError("non-finite attribute value");
    auto key = std::make_pair(value, type);
    auto it = value_idx_.find(key);
    if (it != value_idx_.end()) return it->second;
    int id = num_values();
    values.push_back({value, type});
    value_idx_.emplace(key, id);
    return id;
}

std::optional<int> Vocab::find_entity(const std::string& name) const {
    auto it = entity_idx_.find(name);
    if (it == entity_idx_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Vocab::find_relation(const std::string& name) const {
    auto it = relation_idx_.find(name);
    if (it == relation_idx_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Vocab::find_attribute(const std::string& name) const {
    auto it = attribute_idx_.find(name);
    if (it == attribute_idx_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Vocab::find_value_type(const std::string& name) const {
    auto it = value_type_idx_.find(name);
    if (it == value_type_idx_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Vocab::find_value(double value, int type) const {
    auto it = value_idx_.find({value, type});
    if (it == value_idx_.end()) return std::nullopt;
    return it->second;
}

void Vocab::rebuild_lookup() {
    entity_idx_.clear();
    relation_idx_.clear();
    attribute_idx_.clear();
    value_type_idx_.clear();
    value_idx_.clear();
    for (int i = 0; i < num_entities(); ++i) entity_idx_.emplace(entity_names[i], i);
    for (int i = 0; i < static_cast<int>(relation_names.size()); ++i)
        relation_idx_.emplace(relation_names[i], i);
    for (int i = 0; i < static_cast<int>(attribute_names.size()); ++i)
        attribute_idx_.emplace(attribute_names[i], i);
    for (int i = 0; i < static_cast<int>(value_type_names.size()); ++i)
        value_type_idx_.emplace(value_type_names[i], i);
    for (int i = 0; i < num_values(); ++i)
        value_idx_.emplace(std::make_pair(values[i].value, values[i].type), i);
}

// --- KnowledgeGraph ---

void KnowledgeGraph::finalize() {
    sort_unique(rel_edges);
    sort_unique(attr_edges);
    sort_unique(num_edges);

    int ne = vocab.num_entities();
    int nv = vocab.num_values();
    for (const auto& e : rel_edges)
        if (e.head < 0 || e.head >= ne || e.tail < 0 || e.tail >= ne || e.rel < 0 ||
            e.rel >= static_cast<int>(vocab.relation_names.size()))
            throw KgError("relation edge references unknown node or relation");
    for (const auto& e : attr_edges)
        if (e.entity < 0 || e.entity >= ne || e.value < 0 || e.value >= nv || e.attr < 0 ||
            e.attr >= static_cast<int>(vocab.attribute_names.size()))
            throw KgError("attribute edge references unknown node or attribute");
    for (const auto& e : num_edges) {
        if (e.src < 0 || e.src >= nv || e.dst < 0 || e.dst >= nv || e.rel < 0 ||
            e.rel >= kNumRelCount)
            throw KgError("numerical edge references unknown value or relation");
        if (vocab.values[e.src].type != vocab.values[e.dst].type)
            throw KgError("numerical edge connects values of different types");
    }

    rel_fwd_.clear();
    rel_rev_.clear();
    attr_fwd_.clear();
    attr_rev_.clear();
    num_fwd_.clear();
    entity_in_.assign(ne, {});
    value_in_.assign(nv, {});

    for (const auto& e : rel_edges) {
        rel_fwd_[pack(e.head, e.rel)].push_back(e.tail);
        rel_rev_[pack(e.tail, e.rel)].push_back(e.head);
        entity_in_[e.tail].push_back({InEdge::Rel, e.rel, e.head});
    }
    for (const auto& e : attr_edges) {
        attr_fwd_[pack(e.entity, e.attr)].push_back(e.value);
        attr_rev_[pack(e.value, e.attr)].push_back(e.entity);
        value_in_[e.value].push_back({InEdge::Ap, e.attr, e.entity});
        // the same edge, traversed value -> entity, grounds a rap step
        entity_in_[e.entity].push_back({InEdge::Rap, e.attr, e.value});
    }
    for (const auto& e : num_edges) {
        num_fwd_[pack(e.src, e.rel)].push_back(e.dst);
        value_in_[e.dst].push_back({InEdge::Np, e.rel, e.src});
    }
}

const std::vector<int>& KnowledgeGraph::lookup(const AdjMap& m, std::uint64_t key) {
    static const std::vector<int> kEmpty;
    auto it = m.find(key);
    return it == m.end() ? kEmpty : it->second;
}

const std::vector<int>& KnowledgeGraph::rel_successors(int entity, int rel) const {
    return lookup(rel_fwd_, pack(entity, rel));
}
const std::vector<int>& KnowledgeGraph::attr_values(int entity, int attr) const {
    return lookup(attr_fwd_, pack(entity, attr));
}
const std::vector<int>& KnowledgeGraph::entities_with_value(int value, int attr) const {
    return lookup(attr_rev_, pack(value, attr));
}
const std::vector<int>& KnowledgeGraph::num_successors(int value, NumRel f) const {
    return lookup(num_fwd_, pack(value, static_cast<int>(f)));
}
const std::vector<int>& KnowledgeGraph::rel_predecessors(int entity, int rel) const {
    return lookup(rel_rev_, pack(entity, rel));
}
const std::vector<InEdge>& KnowledgeGraph::in_edges_of_entity(int entity) const {
    return entity_in_.at(entity);
}
const std::vector<InEdge>& KnowledgeGraph::in_edges_of_value(int value) const {
    return value_in_.at(value);
}

std::string KnowledgeGraph::to_json() const {
    ordered_json j;
    j["format"] = "nrn-graph-v1";
    j["entities"] = vocab.entity_names;
    j["relations"] = vocab.relation_names;
    ordered_json attrs = ordered_json::array();
    for (std::size_t i = 0; i < vocab.attribute_names.size(); ++i)
        attrs.push_back({vocab.attribute_names[i], vocab.attribute_type[i]});
    j["attributes"] = attrs;
    j["value_types"] = vocab.value_type_names;
    ordered_json vals = ordered_json::array();
    for (const auto& v : vocab.values) vals.push_back({v.value, v.type});
    j["values"] = vals;
    ordered_json rel = ordered_json::array();
    for (const auto& e : rel_edges) rel.push_back({e.head, e.rel, e.tail});
    j["rel_edges"] = rel;
    ordered_json attr = ordered_json::array();
    for (const auto& e : attr_edges) attr.push_back({e.entity, e.attr, e.value});
    j["attr_edges"] = attr;
    ordered_json num = ordered_json::array();
    for (const auto& e : num_edges) num.push_back({e.src, e.rel, e.dst});
    j["num_edges"] = num;
    return j.dump();
}

KnowledgeGraph KnowledgeGraph::from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    if (j.value("format", "") != std::string("nrn-graph-v1"))
        throw KgError("unrecognized graph format tag");
    KnowledgeGraph g;
    g.vocab.entity_names = j.at("entities").get<std::vector<std::string>>();
    g.vocab.relation_names = j.at("relations").get<std::vector<std::string>>();
    for (const auto& a : j.at("attributes")) {
        g.vocab.attribute_names.push_back(a.at(0).get<std::string>());
        g.vocab.attribute_type.push_back(a.at(1).get<int>());
    }
    g.vocab.value_type_names = j.at("value_types").get<std::vector<std::string>>();
    for (const auto& v : j.at("values"))
        g.vocab.values.push_back({v.at(0).get<double>(), v.at(1).get<int>()});
    g.vocab.rebuild_lookup();
    for (const auto& e : j.at("rel_edges"))
        g.rel_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    for (const auto& e : j.at("attr_edges"))
        g.attr_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    for (const auto& e : j.at("num_edges"))
        g.num_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    g.finalize();
    return g;
}

// --- loading ---

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

double parse_double(const std::string& s, const std::string& path, int line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw KgError(path + ":" + std::to_string(line_no) + ": bad numeric literal '" + s + "'");
    return v;
}

void for_each_line(const std::string& path,
                   const std::function<void(int, const std::string&)>& fn) {
    std::ifstream in(path);
    if (!in) throw KgError("cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fn(line_no, line);
    }
}

}  // namespace

KnowledgeGraph load_triples(const std::string& rel_path, const std::string& attr_path,
                            const std::string& type_map_path) {
    KnowledgeGraph g;

    std::unordered_map<std::string, std::string> attr_to_type;
    for_each_line(type_map_path, [&](int line_no, const std::string& line) {
        auto cols = split_tabs(line);
        if (cols.size() != 2)
            throw KgError(type_map_path + ":" + std::to_string(line_no) +
                          ": expected attribute<TAB>value_type");
        attr_to_type[cols[0]] = cols[1];
    });

    for_each_line(rel_path, [&](int line_no, const std::string& line) {
        auto cols = split_tabs(line);
        if (cols.size() != 3)
            throw KgError(rel_path + ":" + std::to_string(line_no) +
                          ": expected head<TAB>relation<TAB>tail");
        int h = g.vocab.intern_entity(cols[0]);
        int r = g.vocab.intern_relation(cols[1]);
        int t = g.vocab.intern_entity(cols[2]);
        g.rel_edges.push_back({h, r, t});
    });

    for_each_line(attr_path, [&](int line_no, const std::string& line) {
        auto cols = split_tabs(line);
        if (cols.size() != 3)
            throw KgError(attr_path + ":" + std::to_string(line_no) +
                          ": expected entity<TAB>attribute<TAB>value");
        int e = g.vocab.intern_entity(cols[0]);
        auto type_it = attr_to_type.find(cols[1]);
        if (type_it == attr_to_type.end())
            throw KgError(attr_path + ":" + std::to_string(line_no) +
                          ": attribute '" + cols[1] + "' has no value type in " + type_map_path);
        int t = g.vocab.intern_value_type(type_it->second);
        int attr_id = g.vocab.intern_attribute(cols[1], t);
        double value = parse_double(cols[2], attr_path, line_no);
        int v = g.vocab.intern_value(value, t);
        g.attr_edges.push_back({e, attr_id, v});
    });

    g.finalize();
    return g;
}

// --- split ---

namespace {

// Largest-remainder split of n items into parts proportional to 8:1:1.
std::array<std::size_t, 3> split_sizes(std::size_t n) {
    constexpr std::array<double, 3> w = {0.8, 0.1, 0.1};
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double q = static_cast<double>(n) * w[i];
        sizes[i] = static_cast<std::size_t>(q);
        frac[i] = q - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; r < n - assigned; ++r) sizes[order[r % 3]] += 1;
    return sizes;
}

template <class T>
std::array<std::vector<T>, 3> partition_edges(std::vector<T> edges, Rng& rng) {
    rng.shuffle(edges);
    auto sizes = split_sizes(edges.size());
    std::array<std::vector<T>, 3> parts;
    std::size_t off = 0;
    for (int i = 0; i < 3; ++i) {
        parts[i].assign(edges.begin() + off, edges.begin() + off + sizes[i]);
        off += sizes[i];
    }
    return parts;
}

}  // namespace

SplitGraphs split_edges(const KnowledgeGraph& g, std::uint64_t seed) {
    if (g.rel_edges.empty() && g.attr_edges.empty() && g.num_edges.empty())
        throw KgError("cannot split an empty graph");
    Rng rng(seed);
    auto rel = partition_edges(g.rel_edges, rng);
    auto attr = partition_edges(g.attr_edges, rng);
    auto num = partition_edges(g.num_edges, rng);

    SplitGraphs s;
    KnowledgeGraph* graphs[3] = {&s.train, &s.val, &s.test};
    for (int i = 0; i < 3; ++i) {
        KnowledgeGraph& dst = *graphs[i];
        dst.vocab = g.vocab;
        dst.vocab.rebuild_lookup();
        for (int j = 0; j <= i; ++j) {
            dst.rel_edges.insert(dst.rel_edges.end(), rel[j].begin(), rel[j].end());
            dst.attr_edges.insert(dst.attr_edges.end(), attr[j].begin(), attr[j].end());
            dst.num_edges.insert(dst.num_edges.end(), num[j].begin(), num[j].end());
        }
        dst.finalize();
    }
    return s;
}

// --- numerical augmentation ---

KnowledgeGraph augment_numerical_edges(const KnowledgeGraph& g, int cap_per_type,
                                       std::uint64_t seed) {
    if (g.vocab.num_values() == 0) throw KgError("graph has no values to augment");
    Rng rng(seed);

    // value ids grouped by type, in id order
    std::vector<std::vector<int>> by_type(g.vocab.value_type_names.size());
    for (int v = 0; v < g.vocab.num_values(); ++v)
        by_type[g.vocab.values[v].type].push_back(v);

    // One reservoir per relation; a single deterministic sweep over same-type
    // ordered pairs feeds all seven.
    std::array<std::vector<NumEdge>, kNumRelCount> reservoirs;
    std::array<std::size_t, kNumRelCount> seen{};
    auto offer = [&](NumRel f, int src, int dst) {
        int fi = static_cast<int>(f);
        seen[fi] += 1;
        if (static_cast<int>(reservoirs[fi].size()) < cap_per_type) {
            reservoirs[fi].push_back({src, fi, dst});
        } else {
            std::uint64_t j = rng.below(seen[fi]);
            if (j < static_cast<std::uint64_t>(cap_per_type))
                reservoirs[fi][j] = {src, fi, dst};
        }
    };

    for (const auto& group : by_type) {
        for (int src : group) {
            double xs = g.vocab.values[src].value;
            for (int dst : group) {
                double xd = g.vocab.values[dst].value;
                for (int fi = 0; fi < kNumRelCount; ++fi) {
                    NumRel f = static_cast<NumRel>(fi);
                    if (num_rel_holds(f, xs, xd)) offer(f, src, dst);
                }
            }
        }
    }

    KnowledgeGraph out = g;
    for (const auto& res : reservoirs)
        out.num_edges.insert(out.num_edges.end(), res.begin(), res.end());
    out.finalize();
    return out;
}

KnowledgeGraph restrict_num_edges_to_attested(const KnowledgeGraph& g) {
    std::vector<char> attested(g.vocab.num_values(), 0);
    for (const auto& e : g.attr_edges) attested[e.value] = 1;
    KnowledgeGraph out = g;
    std::erase_if(out.num_edges,
                  [&](const NumEdge& e) { return !attested[e.src] || !attested[e.dst]; });
    out.finalize();
    return out;
}

// --- synthetic fixture ---

// Entities are grouped into blocks; relations run mostly inside a block and
// attribute values cluster in per-block bands. Held-out edges then follow the
// same latent structure as the training edges, which is what makes the
// fixture learnable at all. Per relation the expected edge count is exactly
// density * n * (n-1).
KnowledgeGraph make_synthetic_kg(int n_entities, int n_relations, int n_attr_types,
                                 int n_values, double density, std::uint64_t seed) {
    if (n_entities <= 0 || n_relations <= 0 || n_attr_types <= 0 || n_values <= 0)
        throw KgError("synthetic graph counts must be positive");
    Rng rng(seed);
    KnowledgeGraph g;
    for (int i = 0; i < n_entities; ++i) g.vocab.intern_entity("E" + std::to_string(i));
    for (int r = 0; r < n_relations; ++r) g.vocab.intern_relation("r" + std::to_string(r));
    for (int a = 0; a < n_attr_types; ++a) {
        int t = g.vocab.intern_value_type("T" + std::to_string(a));
        g.vocab.intern_attribute("a" + std::to_string(a), t);
    }

    int blocks = std::clamp(n_entities / 12, 2, 16);
    auto block_of = [&](int e) { return e % blocks; };

    // Small integer values, round-robin over types, so every numerical
    // relation (including the x=2x' / x=3x' families) has satisfying pairs.
    constexpr int kValueSpan = 96;
    for (int v = 0; v < n_values; ++v) {
        int type = v % n_attr_types;
        double value = static_cast<double>(1 + rng.below(kValueSpan));
        g.vocab.intern_value(value, type);
    }
    int nv = g.vocab.num_values();  // may be < n_values after deduplication

    // each relation rotates blocks: 90% of the mass of relation r lands in
    // block(u) + r, the rest is background noise
    double p_hi = std::min(1.0, density * 0.9 * blocks);
    double p_lo = density * 0.1 * blocks / (blocks - 1);
    for (int r = 0; r < n_relations; ++r)
        for (int u = 0; u < n_entities; ++u) {
            int target = (block_of(u) + r) % blocks;
            for (int v = 0; v < n_entities; ++v) {
                if (u == v) continue;
                double p = block_of(v) == target ? p_hi : p_lo;
                if (rng.bernoulli(p)) g.rel_edges.push_back({u, r, v});
            }
        }

    // per-block value bands, one pool per (type, block)
    auto band_of_value = [&](double value) {
        int b = static_cast<int>((value - 1.0) * blocks / kValueSpan);
        return std::clamp(b, 0, blocks - 1);
    };
    std::vector<std::vector<int>> values_of_type(n_attr_types);
    std::vector<std::vector<std::vector<int>>> banded(
        n_attr_types, std::vector<std::vector<int>>(blocks));
    for (int v = 0; v < nv; ++v) {
        const ValueNode& node = g.vocab.values[v];
        values_of_type[node.type].push_back(v);
        banded[node.type][band_of_value(node.value)].push_back(v);
    }

    // one to three attribute edges per entity, mostly within its block's band
    auto pick_value = [&](int type, int block) -> int {
        const auto& band = banded[type][block];
        if (!band.empty() && rng.bernoulli(0.95)) return band[rng.index(band.size())];
        const auto& any = values_of_type[type];
        return any.empty() ? -1 : any[rng.index(any.size())];
    };
    for (int e = 0; e < n_entities; ++e) {
        double keep = 1.0;
        for (int slot = 0; slot < 3; ++slot, keep -= 0.25) {
            if (!rng.bernoulli(keep)) continue;
            int a = (e + slot) % n_attr_types;
            int v = pick_value(g.vocab.attribute_type[a], block_of(e));
            if (v >= 0) g.attr_edges.push_back({e, a, v});
        }
    }

    g.finalize();
    return g;
}

}  // namespace nrn

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nrn/rng.hpp"

namespace nrn {

struct KgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The seven value-to-value relations. An edge (src, f, dst) holds when the
// predicate f(src_value, dst_value) below is true.
enum class NumRel : int {
    EqualTo = 0,
    SmallerThan,
    GreaterThan,
    TwiceEqualTo,
    ThreeTimesEqualTo,
    TwiceGreaterThan,
    ThreeTimesGreaterThan,
};
inline constexpr int kNumRelCount = 7;

const char* num_rel_name(NumRel f);
std::optional<NumRel> num_rel_from_name(const std::string& name);

// src is the existing value x', dst the produced value x.
bool num_rel_holds(NumRel f, double src, double dst);

struct ValueNode {
    double value = 0.0;
    int type = -1;  // index into Vocab::value_type_names

    bool operator==(const ValueNode&) const = default;
};

// Symbol tables shared by every split of a graph. Ids are dense and assigned
// in first-appearance order, so identical inputs intern identically.
struct Vocab {
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;
    std::vector<std::string> attribute_names;
    std::vector<int> attribute_type;  // attribute id -> value type id
    std::vector<std::string> value_type_names;
    std::vector<ValueNode> values;

    int num_entities() const { return static_cast<int>(entity_names.size()); }
    int num_values() const { return static_cast<int>(values.size()); }

    int intern_entity(const std::string& name);
    int intern_relation(const std::string& name);
    int intern_attribute(const std::string& name, int type);
    int intern_value_type(const std::string& name);
    int intern_value(double value, int type);

    std::optional<int> find_entity(const std::string& name) const;
    std::optional<int> find_relation(const std::string& name) const;
    std::optional<int> find_attribute(const std::string& name) const;
    std::optional<int> find_value_type(const std::string& name) const;
    std::optional<int> find_value(double value, int type) const;

    void rebuild_lookup();

private:
    std::unordered_map<std::string, int> entity_idx_;
    std::unordered_map<std::string, int> relation_idx_;
    std::unordered_map<std::string, int> attribute_idx_;
    std::unordered_map<std::string, int> value_type_idx_;
    std::map<std::pair<double, int>, int> value_idx_;  // exact-double key
};

struct RelEdge {
    int head, rel, tail;
    auto operator<=>(const RelEdge&) const = default;
};
struct AttrEdge {
    int entity, attr, value;
    auto operator<=>(const AttrEdge&) const = default;
};
struct NumEdge {
    int src, rel, dst;  // rel indexes NumRel
    auto operator<=>(const NumEdge&) const = default;
};

// Incoming edge of any class, as seen from a node during query grounding.
struct InEdge {
    enum Kind { Rel, Ap, Rap, Np } kind;
    int label;   // relation / attribute / numerical-relation id
    int source;  // entity id for Rel+Ap, value id for Rap+Np
};

// Immutable after build_indices(); concurrent reads are safe.
struct KnowledgeGraph {
    Vocab vocab;
    std::vector<RelEdge> rel_edges;
    std::vector<AttrEdge> attr_edges;
    std::vector<NumEdge> num_edges;

    void finalize();  // sort + dedup edges, validate, build adjacency

    // Forward expansion, one hop from a single node.
    const std::vector<int>& rel_successors(int entity, int rel) const;
    const std::vector<int>& attr_values(int entity, int attr) const;      // ap
    const std::vector<int>& entities_with_value(int value, int attr) const;  // rap
    const std::vector<int>& num_successors(int value, NumRel f) const;    // np

    // Reverse relational adjacency: {u : (u, rel, v) in rel_edges}.
    const std::vector<int>& rel_predecessors(int entity, int rel) const;

    // All in-edges of an entity / value node, in deterministic order.
    const std::vector<InEdge>& in_edges_of_entity(int entity) const;
    const std::vector<InEdge>& in_edges_of_value(int value) const;

    std::string to_json() const;
    static KnowledgeGraph from_json(const std::string& text);

private:
    using AdjMap = std::unordered_map<std::uint64_t, std::vector<int>>;
    AdjMap rel_fwd_, rel_rev_, attr_fwd_, attr_rev_, num_fwd_;
    std::vector<std::vector<InEdge>> entity_in_, value_in_;
    static const std::vector<int>& lookup(const AdjMap& m, std::uint64_t key);
};

struct SplitGraphs {
    KnowledgeGraph train, val, test;
};

// --- operations ---

KnowledgeGraph load_triples(const std::string& rel_path, const std::string& attr_path,
                            const std::string& type_map_path);

// Partitions each edge class 8:1:1 (largest-remainder rounding) and builds
// cumulative graphs: train subset of val subset of test.
SplitGraphs split_edges(const KnowledgeGraph& g, std::uint64_t seed);

// Samples up to cap_per_type satisfying (src, dst) value pairs per numerical
// relation, uniformly without replacement, and unions them into num_edges.
KnowledgeGraph augment_numerical_edges(const KnowledgeGraph& g, int cap_per_type,
                                       std::uint64_t seed);

// Keeps only num_edges whose endpoints appear in some attr edge of g.
// Applied to the smaller splits after augmenting the full graph, so that the
// cumulative-edge invariant survives augmentation.
KnowledgeGraph restrict_num_edges_to_attested(const KnowledgeGraph& g);

KnowledgeGraph make_synthetic_kg(int n_entities, int n_relations, int n_attr_types,
                                 int n_values, double density, std::uint64_t seed);

}  // namespace nrn

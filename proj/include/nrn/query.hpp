#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrn/kg.hpp"

namespace nrn {

struct QueryError : std::runtime_error {
    explicit QueryError(const std::string& msg, std::size_t pos = std::string::npos)
        : std::runtime_error(pos == std::string::npos
                                 ? msg
                                 : msg + " (at position " + std::to_string(pos) + ")"),
          position(pos) {}
    std::size_t position;
};

enum class Phase { Entity, Numeric };

enum class NodeKind {
    AnchorEntity,  // e#<name>
    AnchorValue,   // nv#<number>@<type>
    RelProj,       // rp#<relation>
    AttrProj,      // ap#<attribute>
    RevAttrProj,   // rap#<attribute>
    NumProj,       // np#<numerical relation>
    Intersection,  // i
    Union,         // u
};

const char* node_kind_name(NodeKind k);

// The eight shapes; names follow the usual 1p/2p/... abbreviations.
enum class GeneralType { OneP, TwoP, TwoI, ThreeI, Ip, Pi, TwoU, Up };
const char* general_type_name(GeneralType t);
std::optional<GeneralType> general_type_from_name(const std::string& name);
inline constexpr int kGeneralTypeCount = 8;

struct QueryNode {
    NodeKind kind;
    Phase phase;
    int label = -1;          // relation/attribute/num-relation id for projections
    int anchor_entity = -1;  // AnchorEntity
    double anchor_value = 0.0;  // AnchorValue
    int anchor_value_type = -1;
    std::vector<int> children;  // indices into ComputationGraph::nodes
};

// Rooted DAG in post-order storage: children always precede their parent and
// the root is the last node. Immutable once validated.
struct ComputationGraph {
    std::vector<QueryNode> nodes;

    int root() const { return static_cast<int>(nodes.size()) - 1; }
    Phase root_phase() const { return nodes.back().phase; }

    // Value type produced at the root of a numeric-phase query.
    int root_value_type(const Vocab& vocab) const;
};

// Parses the s-expression surface syntax, resolving symbols against vocab and
// checking the phase-typing rules. Throws QueryError with a position on
// syntax errors and with the offending symbol otherwise.
ComputationGraph parse_query(const std::string& text, const Vocab& vocab);

// Canonical text; parse_query(serialize_query(g)) reproduces g node-for-node.
std::string serialize_query(const ComputationGraph& g, const Vocab& vocab);

// Classifies against the eight shapes (projections erased); child order of
// intersections/unions is immaterial. Throws QueryError when out of catalog.
GeneralType general_type_of(const ComputationGraph& g);

// Recomputes phases bottom-up and checks arity/typing; used by the parser and
// by builders that assemble graphs programmatically.
void validate_graph(ComputationGraph& g);

}  // namespace nrn

#include "nrn/query.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace nrn {

namespace {

constexpr std::array<const char*, 8> kKindNames = {"e", "nv", "rp", "ap", "rap", "np", "i", "u"};
constexpr std::array<const char*, 8> kTypeNames = {"1p", "2p", "2i", "3i", "ip", "pi", "2u", "up"};

bool is_delim(char c) {
    return c == '(' || c == ')' || c == ',' || c == '#' || c == '@' ||
           std::isspace(static_cast<unsigned char>(c));
}

// Shortest representation that round-trips through parse.
std::string format_value(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

class Parser {
public:
    Parser(const std::string& text, const Vocab& vocab) : text_(text), vocab_(vocab) {}

    ComputationGraph run() {
        ComputationGraph g;
        parse_expr(g);
        skip_ws();
        if (pos_ != text_.size()) throw QueryError("trailing input after query", pos_);
        validate_graph(g);
        return g;
    }

private:
    const std::string& text_;
    const Vocab& vocab_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    char peek() {
        skip_ws();
        if (pos_ >= text_.size()) throw QueryError("unexpected end of input", pos_);
        return text_[pos_];
    }

    void expect(char c) {
        if (peek() != c)
            throw QueryError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    std::string read_symbol() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && !is_delim(text_[pos_])) ++pos_;
        if (pos_ == start) throw QueryError("expected a symbol", pos_);
        return text_.substr(start, pos_ - start);
    }

    double read_number() {
        skip_ws();
        std::size_t start = pos_;
        double v = 0.0;
        auto [ptr, ec] =
            std::from_chars(text_.data() + start, text_.data() + text_.size(), v);
        if (ec != std::errc() || !std::isfinite(v))
            throw QueryError("expected a numeric literal", start);
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return v;
    }

    int parse_expr(ComputationGraph& g) {
        expect('(');
        std::size_t head_pos = pos_;
        std::string head = read_symbol();

        QueryNode node{};
        if (head == "e") {
            expect('#');
            std::size_t sym_pos = pos_;
            std::string name = read_symbol();
            auto id = vocab_.find_entity(name);
            if (!id) throw QueryError("unknown entity '" + name + "'", sym_pos);
            node.kind = NodeKind::AnchorEntity;
            node.anchor_entity = *id;
        } else if (head == "nv") {
            expect('#');
            node.anchor_value = read_number();
            expect('@');
            std::size_t sym_pos = pos_;
            std::string type_name = read_symbol();
            auto t = vocab_.find_value_type(type_name);
            if (!t) throw QueryError("unknown value type '" + type_name + "'", sym_pos);
            node.kind = NodeKind::AnchorValue;
            node.anchor_value_type = *t;
        } else if (head == "rp" || head == "ap" || head == "rap" || head == "np") {
            expect('#');
            std::size_t sym_pos = pos_;
            std::string label = read_symbol();
            if (head == "rp") {
                auto id = vocab_.find_relation(label);
                if (!id) throw QueryError("unknown relation '" + label + "'", sym_pos);
                node.kind = NodeKind::RelProj;
                node.label = *id;
            } else if (head == "np") {
                auto f = num_rel_from_name(label);
                if (!f) throw QueryError("unknown numerical relation '" + label + "'", sym_pos);
                node.kind = NodeKind::NumProj;
                node.label = static_cast<int>(*f);
            } else {
                auto id = vocab_.find_attribute(label);
                if (!id) throw QueryError("unknown attribute '" + label + "'", sym_pos);
                node.kind = head == "ap" ? NodeKind::AttrProj : NodeKind::RevAttrProj;
                node.label = *id;
            }
            while (peek() == ',') {
                ++pos_;
                node.children.push_back(parse_expr(g));
            }
        } else if (head == "i" || head == "u") {
            node.kind = head == "i" ? NodeKind::Intersection : NodeKind::Union;
            while (peek() == ',') {
                ++pos_;
                node.children.push_back(parse_expr(g));
            }
        } else {
            throw QueryError("unknown head symbol '" + head + "'", head_pos);
        }

        expect(')');
        g.nodes.push_back(std::move(node));
        return g.root();
    }
};

bool is_anchor(const QueryNode& n) {
    return n.kind == NodeKind::AnchorEntity || n.kind == NodeKind::AnchorValue;
}

bool is_projection(const QueryNode& n) {
    switch (n.kind) {
        case NodeKind::RelProj:
        case NodeKind::AttrProj:
        case NodeKind::RevAttrProj:
        case NodeKind::NumProj: return true;
        default: return false;
    }
}

}  // namespace

const char* node_kind_name(NodeKind k) { return kKindNames[static_cast<int>(k)]; }
const char* general_type_name(GeneralType t) { return kTypeNames[static_cast<int>(t)]; }

std::optional<GeneralType> general_type_from_name(const std::string& name) {
    for (int i = 0; i < kGeneralTypeCount; ++i)
        if (name == kTypeNames[i]) return static_cast<GeneralType>(i);
    return std::nullopt;
}

void validate_graph(ComputationGraph& g) {
    if (g.nodes.empty()) throw QueryError("empty query");
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
        QueryNode& n = g.nodes[i];
        for (int c : n.children)
            if (c < 0 || c >= i) throw QueryError("children must precede their parent");

        switch (n.kind) {
            case NodeKind::AnchorEntity:
                if (!n.children.empty()) throw QueryError("anchors must be leaves");
                n.phase = Phase::Entity;
                break;
            case NodeKind::AnchorValue:
                if (!n.children.empty()) throw QueryError("anchors must be leaves");
                n.phase = Phase::Numeric;
                break;
            case NodeKind::RelProj:
            case NodeKind::AttrProj:
            case NodeKind::RevAttrProj:
            case NodeKind::NumProj: {
                if (n.children.size() != 1)
                    throw QueryError("projections take exactly one argument");
                Phase in = g.nodes[n.children[0]].phase;
                Phase want_in, out;
                switch (n.kind) {
                    case NodeKind::RelProj: want_in = Phase::Entity; out = Phase::Entity; break;
                    case NodeKind::AttrProj: want_in = Phase::Entity; out = Phase::Numeric; break;
                    case NodeKind::RevAttrProj: want_in = Phase::Numeric; out = Phase::Entity; break;
                    default: want_in = Phase::Numeric; out = Phase::Numeric; break;
                }
                if (in != want_in)
                    throw QueryError(std::string(node_kind_name(n.kind)) + " applied to a " +
                                     (in == Phase::Entity ? "entity" : "numeric") +
                                     "-phase argument");
                n.phase = out;
                break;
            }
            case NodeKind::Intersection:
            case NodeKind::Union: {
                std::size_t lo = 2, hi = n.kind == NodeKind::Intersection ? 3 : 2;
                if (n.children.size() < lo || n.children.size() > hi)
                    throw QueryError(std::string(node_kind_name(n.kind)) + " takes " +
                                     (hi == 2 ? "exactly 2" : "2 or 3") + " arguments");
                Phase p = g.nodes[n.children[0]].phase;
                for (int c : n.children)
                    if (g.nodes[c].phase != p)
                        throw QueryError("mixed-phase arguments to " +
                                         std::string(node_kind_name(n.kind)));
                n.phase = p;
                break;
            }
        }
    }
}

ComputationGraph parse_query(const std::string& text, const Vocab& vocab) {
    return Parser(text, vocab).run();
}

namespace {

void serialize_node(const ComputationGraph& g, int idx, const Vocab& vocab, std::string& out) {
    const QueryNode& n = g.nodes[idx];
    out += '(';
    out += node_kind_name(n.kind);
    switch (n.kind) {
        case NodeKind::AnchorEntity:
            out += '#';
            out += vocab.entity_names[n.anchor_entity];
            break;
        case NodeKind::AnchorValue:
            out += '#';
            out += format_value(n.anchor_value);
            out += '@';
            out += vocab.value_type_names[n.anchor_value_type];
            break;
        case NodeKind::RelProj:
            out += '#';
            out += vocab.relation_names[n.label];
            break;
        case NodeKind::AttrProj:
        case NodeKind::RevAttrProj:
            out += '#';
            out += vocab.attribute_names[n.label];
            break;
        case NodeKind::NumProj:
            out += '#';
            out += num_rel_name(static_cast<NumRel>(n.label));
            break;
        case NodeKind::Intersection:
        case NodeKind::Union: break;
    }
    for (int c : n.children) {
        out += ',';
        serialize_node(g, c, vocab, out);
    }
    out += ')';
}

bool is_proj_to_leaf(const ComputationGraph& g, int idx) {
    const QueryNode& n = g.nodes[idx];
    return is_projection(n) && is_anchor(g.nodes[n.children[0]]);
}

bool is_proj_chain2(const ComputationGraph& g, int idx) {
    const QueryNode& n = g.nodes[idx];
    return is_projection(n) && is_proj_to_leaf(g, n.children[0]);
}

}  // namespace

std::string serialize_query(const ComputationGraph& g, const Vocab& vocab) {
    std::string out;
    serialize_node(g, g.root(), vocab, out);
    return out;
}

GeneralType general_type_of(const ComputationGraph& g) {
    const QueryNode& root = g.nodes[g.root()];
    if (is_projection(root)) {
        int c = root.children[0];
        const QueryNode& child = g.nodes[c];
        if (is_anchor(child)) return GeneralType::OneP;
        if (is_proj_to_leaf(g, c)) return GeneralType::TwoP;
        bool branches_ok = (child.kind == NodeKind::Intersection ||
                            child.kind == NodeKind::Union) &&
                           child.children.size() == 2 &&
                           is_proj_to_leaf(g, child.children[0]) &&
                           is_proj_to_leaf(g, child.children[1]);
        if (branches_ok)
            return child.kind == NodeKind::Intersection ? GeneralType::Ip : GeneralType::Up;
    } else if (root.kind == NodeKind::Intersection) {
        std::size_t n = root.children.size();
        int leaf_branches = 0, chain2_branches = 0;
        for (int c : root.children) {
            if (is_proj_to_leaf(g, c)) ++leaf_branches;
            else if (is_proj_chain2(g, c)) ++chain2_branches;
        }
        if (n == 2 && leaf_branches == 2) return GeneralType::TwoI;
        if (n == 3 && leaf_branches == 3) return GeneralType::ThreeI;
        if (n == 2 && leaf_branches == 1 && chain2_branches == 1) return GeneralType::Pi;
    } else if (root.kind == NodeKind::Union) {
        if (root.children.size() == 2 && is_proj_to_leaf(g, root.children[0]) &&
            is_proj_to_leaf(g, root.children[1]))
            return GeneralType::TwoU;
    }
    throw QueryError("query shape is not one of the eight general types");
}

int ComputationGraph::root_value_type(const Vocab& vocab) const {
    if (root_phase() != Phase::Numeric)
        throw QueryError("query root is not numeric-phase");
    int idx = root();
    for (;;) {
        const QueryNode& n = nodes[idx];
        switch (n.kind) {
            case NodeKind::AnchorValue: return n.anchor_value_type;
            case NodeKind::AttrProj: return vocab.attribute_type[n.label];
            case NodeKind::NumProj:
            case NodeKind::Intersection:
            case NodeKind::Union: idx = n.children[0]; break;
            default: throw QueryError("malformed numeric-phase query");
        }
    }
}

}  // namespace nrn

#include <doctest.h>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nrn/kg.hpp"
#include "nrn/query.hpp"

using namespace nrn;

namespace {

// small fixed vocabulary: two entities, one relation, one attribute of type
// Degree, plus one registered value
Vocab test_vocab() {
    Vocab v;
    v.intern_entity("Tokyo");
    v.intern_entity("Osaka");
    v.intern_relation("locatedIn");
    int t = v.intern_value_type("Degree");
    v.intern_attribute("lat", t);
    v.intern_value(40.0, t);
    return v;
}

}  // namespace

TEST_CASE("parse builds phase-typed graphs for the catalog examples") {
    Vocab v = test_vocab();

    SUBCASE("1p: (rap,(nv))") {
        ComputationGraph g = parse_query("(rap#lat, (nv#40.0@Degree))", v);
        CHECK(general_type_of(g) == GeneralType::OneP);
        CHECK(g.root_phase() == Phase::Entity);
        CHECK(g.nodes.size() == 2);
        CHECK(g.nodes[0].kind == NodeKind::AnchorValue);
        CHECK(g.nodes[0].anchor_value == 40.0);
    }
    SUBCASE("2p with a numeric root") {
        ComputationGraph g = parse_query("(ap#lat, (rap#lat, (nv#40.0@Degree)))", v);
        CHECK(general_type_of(g) == GeneralType::TwoP);
        CHECK(g.root_phase() == Phase::Numeric);
    }
    SUBCASE("np applied to an entity child is a phase violation") {
        CHECK_THROWS_WITH_AS(parse_query("(np#GreaterThan, (e#Tokyo))", v),
                             doctest::Contains("np applied to a entity"), QueryError);
    }
}

TEST_CASE("parse reports positions and unknown symbols") {
    Vocab v = test_vocab();
    CHECK_THROWS_WITH_AS(parse_query("(rp#locatedIn, (e#Tokyo)", v),
                         doctest::Contains("position"), QueryError);
    CHECK_THROWS_WITH_AS(parse_query("(rp#flysTo, (e#Tokyo))", v),
                         doctest::Contains("flysTo"), QueryError);
    CHECK_THROWS_WITH_AS(parse_query("(e#Kyoto)", v), doctest::Contains("Kyoto"),
                         QueryError);
    CHECK_THROWS_WITH_AS(parse_query("(nv#1@Meter)", v), doctest::Contains("Meter"),
                         QueryError);
    CHECK_THROWS_AS(parse_query("(q#x, (e#Tokyo))", v), QueryError);
    CHECK_THROWS_AS(parse_query("", v), QueryError);
    CHECK_THROWS_AS(parse_query("(rp#locatedIn, (e#Tokyo)) trailing", v), QueryError);
}

TEST_CASE("serialize is canonical and round-trips") {
    Vocab v = test_vocab();
    // the eight catalog skeletons, instantiated with concrete labels
    std::vector<std::string> examples = {
        "(rap#lat,(nv#40@Degree))",
        "(rap#lat,(np#GreaterThan,(nv#40@Degree)))",
        "(i,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(e#Tokyo)))",
        "(i,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(e#Tokyo)),(ap#lat,(e#Osaka)))",
        "(rp#locatedIn,(i,(rap#lat,(nv#40@Degree)),(rp#locatedIn,(e#Tokyo))))",
        "(i,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(rp#locatedIn,(e#Tokyo))))",
        "(u,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(e#Tokyo)))",
        "(rap#lat,(u,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(e#Tokyo))))",
    };
    std::vector<GeneralType> expected = {
        GeneralType::OneP, GeneralType::TwoP, GeneralType::TwoI, GeneralType::ThreeI,
        GeneralType::Ip,   GeneralType::Pi,   GeneralType::TwoU, GeneralType::Up,
    };

    for (std::size_t i = 0; i < examples.size(); ++i) {
        CAPTURE(examples[i]);
        ComputationGraph g = parse_query(examples[i], v);
        CHECK(general_type_of(g) == expected[i]);

        std::string canon = serialize_query(g, v);
        // one canonicalization is a fixed point
        ComputationGraph g2 = parse_query(canon, v);
        CHECK(serialize_query(g2, v) == canon);

        // graphs agree node for node
        REQUIRE(g.nodes.size() == g2.nodes.size());
        for (std::size_t n = 0; n < g.nodes.size(); ++n) {
            CHECK(g.nodes[n].kind == g2.nodes[n].kind);
            CHECK(g.nodes[n].phase == g2.nodes[n].phase);
            CHECK(g.nodes[n].label == g2.nodes[n].label);
            CHECK(g.nodes[n].children == g2.nodes[n].children);
        }

        // whitespace-insensitive
        std::string spaced;
        for (char c : examples[i]) {
            spaced += c;
            if (c == ',') spaced += ' ';
        }
        CHECK(serialize_query(parse_query(spaced, v), v) == canon);
    }
}

TEST_CASE("pi accepts its branches in either order") {
    Vocab v = test_vocab();
    ComputationGraph g = parse_query(
        "(i,(ap#lat,(rp#locatedIn,(e#Tokyo))),(np#GreaterThan,(nv#40@Degree)))", v);
    CHECK(general_type_of(g) == GeneralType::Pi);
}

TEST_CASE("shapes outside the catalog are rejected") {
    Vocab v = test_vocab();
    // a bare anchor parses but has no general type
    ComputationGraph g = parse_query("(e#Tokyo)", v);
    CHECK_THROWS_AS(general_type_of(g), QueryError);
    // 4-way intersection is rejected at parse time
    CHECK_THROWS_AS(
        parse_query("(i,(ap#lat,(e#Tokyo)),(ap#lat,(e#Tokyo)),(ap#lat,(e#Osaka)),"
                    "(ap#lat,(e#Osaka)))",
                    v),
        QueryError);
    // unions take exactly two branches
    CHECK_THROWS_AS(
        parse_query("(u,(ap#lat,(e#Tokyo)),(ap#lat,(e#Osaka)),(ap#lat,(e#Tokyo)))", v),
        QueryError);
    // 3p is not in the catalog
    ComputationGraph g3 =
        parse_query("(rap#lat,(np#GreaterThan,(ap#lat,(e#Tokyo))))", v);
    CHECK_THROWS_AS(general_type_of(g3), QueryError);
}

TEST_CASE("stored phases equal a bottom-up recomputation") {
    Vocab v = test_vocab();
    std::vector<std::string> queries = {
        "(rap#lat,(nv#40@Degree))",
        "(ap#lat,(rap#lat,(nv#40@Degree)))",
        "(i,(np#GreaterThan,(nv#40@Degree)),(ap#lat,(e#Tokyo)))",
        "(rp#locatedIn,(u,(rap#lat,(nv#40@Degree)),(rp#locatedIn,(e#Tokyo))))",
    };
    for (const auto& q : queries) {
        ComputationGraph g = parse_query(q, v);
        // independent phase table: out-phase per node kind
        std::function<Phase(int)> recompute = [&](int idx) -> Phase {
            const QueryNode& n = g.nodes[idx];
            switch (n.kind) {
                case NodeKind::AnchorEntity: return Phase::Entity;
                case NodeKind::AnchorValue: return Phase::Numeric;
                case NodeKind::RelProj:
                case NodeKind::RevAttrProj: return Phase::Entity;
                case NodeKind::AttrProj:
                case NodeKind::NumProj: return Phase::Numeric;
                default: return recompute(n.children[0]);
            }
        };
        for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
            CHECK(g.nodes[i].phase == recompute(i));
    }
}

// Every legal assignment of {rp, ap, rap, np} to the p-edges of each shape
// either parses or is rejected, and acceptance matches the phase rules
// exactly. Projection chains force their leaf kinds, so the oracle only has
// to check input/output phase compatibility.
TEST_CASE("projection assignments are accepted exactly per the typing rules") {
    Vocab v = test_vocab();
    struct ProjInfo {
        const char* text;  // with label
        Phase in, out;
    };
    const std::array<ProjInfo, 4> projs = {{
        {"rp#locatedIn", Phase::Entity, Phase::Entity},
        {"ap#lat", Phase::Entity, Phase::Numeric},
        {"rap#lat", Phase::Numeric, Phase::Entity},
        {"np#GreaterThan", Phase::Numeric, Phase::Numeric},
    }};
    auto leaf_for = [](Phase p) {
        return p == Phase::Entity ? std::string("(e#Tokyo)") : std::string("(nv#40@Degree)");
    };
    auto chain1 = [&](int p) {
        return "(" + std::string(projs[p].text) + "," + leaf_for(projs[p].in) + ")";
    };
    auto chain2 = [&](int outer, int inner) {
        return "(" + std::string(projs[outer].text) + ",(" + projs[inner].text + "," +
               leaf_for(projs[inner].in) + "))";
    };

    long accepted = 0, rejected = 0;
    auto check_one = [&](const std::string& text, bool legal) {
        CAPTURE(text);
        if (legal) {
            CHECK_NOTHROW(parse_query(text, v));
            ++accepted;
        } else {
            CHECK_THROWS_AS(parse_query(text, v), QueryError);
            ++rejected;
        }
    };

    // 2p / 2i / 2u / 3i / ip / pi / up over all assignments
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            check_one("(" + std::string(projs[a].text) + "," + chain1(b) + ")",
                      projs[a].in == projs[b].out);  // 2p
            check_one("(i," + chain1(a) + "," + chain1(b) + ")",
                      projs[a].out == projs[b].out);  // 2i
            check_one("(u," + chain1(a) + "," + chain1(b) + ")",
                      projs[a].out == projs[b].out);  // 2u
            for (int c = 0; c < 4; ++c) {
                check_one("(i," + chain1(a) + "," + chain1(b) + "," + chain1(c) + ")",
                          projs[a].out == projs[b].out && projs[b].out == projs[c].out);
                check_one("(" + std::string(projs[a].text) + ",(i," + chain1(b) + "," +
                              chain1(c) + "))",
                          projs[b].out == projs[c].out && projs[a].in == projs[b].out);
                check_one("(" + std::string(projs[a].text) + ",(u," + chain1(b) + "," +
                              chain1(c) + "))",
                          projs[b].out == projs[c].out && projs[a].in == projs[b].out);
                check_one("(i," + chain1(a) + "," + chain2(b, c) + ")",
                          projs[a].out == projs[b].out && projs[b].in == projs[c].out);
            }
        }
    }
    CHECK(accepted > 0);
    CHECK(rejected > 0);
}

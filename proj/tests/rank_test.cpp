#include <doctest.h>

#include "nrn/eval.hpp"

using namespace nrn;

TEST_CASE("plain ranking by descending score") {
    std::vector<int> ids = {0, 1, 2};
    std::vector<double> scores = {3.0, 2.0, 1.0};
    std::unordered_set<int> known;
    CHECK(filtered_rank(scores, ids, 3.0, 0, known) == 1);
    CHECK(filtered_rank(scores, ids, 2.0, 1, known) == 2);
    CHECK(filtered_rank(scores, ids, 1.0, 2, known) == 3);
}

TEST_CASE("score ties break by ascending id") {
    std::vector<int> ids = {0, 1, 2};
    std::vector<double> scores = {2.0, 2.0, 2.0};
    std::unordered_set<int> known;
    CHECK(filtered_rank(scores, ids, 2.0, 0, known) == 1);
    CHECK(filtered_rank(scores, ids, 2.0, 1, known) == 2);
    CHECK(filtered_rank(scores, ids, 2.0, 2, known) == 3);
}

TEST_CASE("removing a higher-scored known answer improves the rank by one") {
    std::vector<int> ids = {0, 1, 2, 3};
    std::vector<double> scores = {9.0, 5.0, 4.0, 1.0};
    std::unordered_set<int> none;
    std::unordered_set<int> known = {0};
    CHECK(filtered_rank(scores, ids, 4.0, 2, none) == 3);
    CHECK(filtered_rank(scores, ids, 4.0, 2, known) == 2);
}

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "ag/metrics.hpp"

using namespace ag;

TEST_CASE("classification metrics fixtures") {
    SUBCASE("perfect predictions score 1 everywhere") {
        const ClassificationReport r = classification_metrics({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
        CHECK(r.accuracy == 1.0);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("binary confusion TP=2 FP=1 FN=1 TN=2") {
        // labels:      1 1 1 0 0 0
        // predictions: 1 1 0 1 0 0
        const ClassificationReport r =
            classification_metrics({1, 1, 0, 1, 0, 0}, {1, 1, 1, 0, 0, 0}, 2);
        CHECK(r.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
        // Both classes have P = R = 2/3, so macro F1 = 2/3.
        CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(r.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("all-one-class predictions on balanced 3-class labels") {
        const ClassificationReport r =
            classification_metrics({0, 0, 0, 0, 0, 0}, {0, 1, 2, 0, 1, 2}, 3);
        CHECK(r.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        // Class 0: P = 1/3, R = 1, F1 = 1/2; classes 1 and 2 contribute 0.
        CHECK(r.precision == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
        CHECK(r.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(r.f1 == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
    SUBCASE("classes absent everywhere still divide the macro average") {
        const ClassificationReport r = classification_metrics({0, 0}, {0, 0}, 3);
        CHECK(r.accuracy == 1.0);
        CHECK(r.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(classification_metrics({0, 1}, {0}, 2), std::invalid_argument);
        CHECK_THROWS_AS(classification_metrics({}, {}, 2), std::invalid_argument);
        CHECK_THROWS_AS(classification_metrics({2}, {0}, 2), std::invalid_argument);
        CHECK_THROWS_AS(classification_metrics({0}, {-1}, 2), std::invalid_argument);
    }
}

TEST_CASE("mrr fixtures") {
    CHECK(mrr({1, 1, 1}) == 1.0);
    CHECK(mrr({1, 2, 4}) == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
    CHECK(mrr({5}) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS(mrr({}), std::invalid_argument);
    CHECK_THROWS_AS(mrr({0}), std::invalid_argument);
}

TEST_CASE("recall_at_k fixtures") {
    const auto lists_from_ranks = [](const std::vector<std::size_t>& ranks) {
        std::vector<std::vector<int>> lists;
        for (std::size_t r : ranks) {
            std::vector<int> list(r, 0);
            list[r - 1] = 1;
            lists.push_back(std::move(list));
        }
        return lists;
    };

    CHECK(recall_at_k(lists_from_ranks({1, 1, 1}), 1) == 1.0);
    CHECK(recall_at_k(lists_from_ranks({1, 2, 4}), 3) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(recall_at_k(lists_from_ranks({1, 2, 4}), 100) == 1.0);
    CHECK(recall_at_k(lists_from_ranks({2, 3}), 1) == 0.0);
    CHECK_THROWS_AS(recall_at_k(lists_from_ranks({1}), 0), std::invalid_argument);

    SUBCASE("non-decreasing in k") {
        const auto lists = lists_from_ranks({1, 3, 5, 2, 7});
        double prev = 0.0;
        for (std::size_t k = 1; k <= 8; ++k) {
            const double r = recall_at_k(lists, k);
            CHECK(r >= prev);
            prev = r;
        }
        CHECK(prev == 1.0);
    }
}

TEST_CASE("ranking_report ranks by descending score with input-order ties") {
    // Two claims. Claim 1: relevant candidate scored below one negative -> rank 2.
    // Claim 2: tie between relevant and a negative; the relevant came first -> rank 1.
    const std::vector<std::size_t> groups = {1, 1, 1, 2, 2};
    const std::vector<int> relevance = {0, 1, 0, 1, 0};
    const std::vector<double> scores = {0.9, 0.8, 0.1, 0.5, 0.5};
    const RankingReport r = ranking_report(groups, relevance, scores, {1, 2});
    CHECK(r.mrr == doctest::Approx((0.5 + 1.0) / 2.0).epsilon(1e-12));
    REQUIRE(r.recall_at_k.size() == 2);
    CHECK(r.recall_at_k[0].first == 1);
    CHECK(r.recall_at_k[0].second == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.recall_at_k[1].first == 2);
    CHECK(r.recall_at_k[1].second == 1.0);

    SUBCASE("single candidate per claim, all relevant") {
        const RankingReport one = ranking_report({1, 2}, {1, 1}, {0.3, 0.9}, {1});
        CHECK(one.mrr == 1.0);
        CHECK(one.recall_at_k[0].second == 1.0);
    }
    SUBCASE("a claim without a relevant candidate is rejected") {
        CHECK_THROWS_AS(ranking_report({1, 1}, {0, 0}, {0.1, 0.2}, {1}),
                        std::invalid_argument);
    }
    SUBCASE("length mismatches rejected") {
        CHECK_THROWS_AS(ranking_report({1}, {1, 1}, {0.1, 0.2}, {1}), std::invalid_argument);
    }
}

TEST_CASE("paired t test") {
    SUBCASE("identical score vectors give p = 1 by convention") {
        const TTestResult r = paired_t_test({0.5, 0.6, 0.7}, {0.5, 0.6, 0.7});
        CHECK(r.t == 0.0);
        CHECK(r.p == 1.0);
    }
    SUBCASE("constant nonzero differences give p = 0 by convention") {
        const TTestResult r = paired_t_test({1.0, 2.0, 3.0}, {0.0, 1.0, 2.0});
        CHECK(std::isinf(r.t));
        CHECK(r.t > 0.0);
        CHECK(r.p == 0.0);
    }
    SUBCASE("differences [1,2,3] against zero") {
        const TTestResult r = paired_t_test({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0});
        CHECK(r.t == doctest::Approx(3.464101615137754).epsilon(1e-12));
        CHECK(r.p == doctest::Approx(0.07417990022744857).epsilon(1e-10));
    }
    SUBCASE("textbook n=5 paired sample") {
        const TTestResult r =
            paired_t_test({2.0, 4.0, 6.0, 8.0, 10.0}, {1.0, 2.0, 3.0, 4.0, 5.0});
        // Differences 1..5: t = 3 / (sqrt(2.5)/sqrt(5)).
        CHECK(r.t == doctest::Approx(4.242640687119285).epsilon(1e-12));
        CHECK(r.p == doctest::Approx(0.013235599563682695).epsilon(1e-10));
    }
    SUBCASE("negating the differences flips t, keeps p") {
        const TTestResult a = paired_t_test({1.0, 3.0, 2.0, 5.0}, {0.0, 1.0, 1.5, 2.0});
        const TTestResult b = paired_t_test({0.0, 1.0, 1.5, 2.0}, {1.0, 3.0, 2.0, 5.0});
        CHECK(a.t == doctest::Approx(-b.t).epsilon(1e-12));
        CHECK(a.p == doctest::Approx(b.p).epsilon(1e-12));
    }
    SUBCASE("degenerate inputs rejected") {
        CHECK_THROWS_AS(paired_t_test({1.0}, {0.0}), std::invalid_argument);
        CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {0.0}), std::invalid_argument);
    }
}

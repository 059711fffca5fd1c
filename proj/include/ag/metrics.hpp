#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace ag {

struct ClassificationReport {
    double accuracy = 0.0;
    double precision = 0.0;  // macro-averaged over all classes
    double recall = 0.0;
    double f1 = 0.0;
};

// Macro averaging counts every class in [0, classes) in the denominator,
// including classes absent from both predictions and labels (they contribute
// 0). Per-class precision/recall with an empty denominator are 0.
ClassificationReport classification_metrics(const std::vector<int>& predictions,
                                            const std::vector<int>& labels, std::size_t classes);

// Mean of 1/rank over queries; ranks are 1-based positions of the first
// relevant candidate.
double mrr(const std::vector<std::size_t>& first_relevant_ranks);

// Fraction of queries whose top-k entries contain a relevant candidate.
// Each list holds 0/1 relevance in rank order.
double recall_at_k(const std::vector<std::vector<int>>& ranked_relevance, std::size_t k);

struct RankingReport {
    double mrr = 0.0;
    std::vector<std::pair<std::size_t, double>> recall_at_k;  // (k, value), ascending k
};

// Groups candidates by group id, ranks each group by score descending with
// ties kept in input order, and reports MRR plus Recall@K for each requested
// k. Every group must contain at least one relevant candidate.
RankingReport ranking_report(const std::vector<std::size_t>& group_ids,
                             const std::vector<int>& relevance, const std::vector<double>& scores,
                             const std::vector<std::size_t>& ks);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;  // two-sided
};

// Paired Student t over the per-position differences a[i] - b[i], with n - 1
// degrees of freedom. Zero-variance differences are degenerate: p = 1 when
// all differences are 0, otherwise p = 0 with t = +/- infinity.
TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b);

}  // namespace ag

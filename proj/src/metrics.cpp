#include "ag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ag/numeric.hpp"

namespace ag {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

ClassificationReport classification_metrics(const std::vector<int>& predictions,
                                            const std::vector<int>& labels,
                                            std::size_t classes) {
    require(predictions.size() == labels.size(), "classification_metrics: length mismatch");
    require(!labels.empty(), "classification_metrics: empty input");
    require(classes >= 1, "classification_metrics: classes must be >= 1");

    std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i];
        const int y = labels[i];
        require(p >= 0 && static_cast<std::size_t>(p) < classes,
                "classification_metrics: prediction out of range");
        require(y >= 0 && static_cast<std::size_t>(y) < classes,
                "classification_metrics: label out of range");
        if (p == y) {
            ++correct;
            ++tp[static_cast<std::size_t>(p)];
        } else {
            ++fp[static_cast<std::size_t>(p)];
            ++fn[static_cast<std::size_t>(y)];
        }
    }

    ClassificationReport report;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    for (std::size_t c = 0; c < classes; ++c) {
        const double tp_c = static_cast<double>(tp[c]);
        const double precision = tp[c] + fp[c] == 0 ? 0.0 : tp_c / static_cast<double>(tp[c] + fp[c]);
        const double recall = tp[c] + fn[c] == 0 ? 0.0 : tp_c / static_cast<double>(tp[c] + fn[c]);
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        report.precision += precision;
        report.recall += recall;
        report.f1 += f1;
    }
    const double inv_c = 1.0 / static_cast<double>(classes);
    report.precision *= inv_c;
    report.recall *= inv_c;
    report.f1 *= inv_c;
    return report;
}

double mrr(const std::vector<std::size_t>& first_relevant_ranks) {
    require(!first_relevant_ranks.empty(), "mrr: empty query set");
    double sum = 0.0;
    for (std::size_t rank : first_relevant_ranks) {
        require(rank >= 1, "mrr: ranks are 1-based");
        sum += 1.0 / static_cast<double>(rank);
    }
    return sum / static_cast<double>(first_relevant_ranks.size());
}

double recall_at_k(const std::vector<std::vector<int>>& ranked_relevance, std::size_t k) {
    require(k >= 1, "recall_at_k: k must be >= 1");
    require(!ranked_relevance.empty(), "recall_at_k: empty query set");
    std::size_t hits = 0;
    for (const std::vector<int>& list : ranked_relevance) {
        const std::size_t limit = std::min(k, list.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (list[i] != 0) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ranked_relevance.size());
}

RankingReport ranking_report(const std::vector<std::size_t>& group_ids,
                             const std::vector<int>& relevance, const std::vector<double>& scores,
                             const std::vector<std::size_t>& ks) {
    require(group_ids.size() == relevance.size() && group_ids.size() == scores.size(),
            "ranking_report: length mismatch");
    require(!group_ids.empty(), "ranking_report: empty input");

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < group_ids.size(); ++i) groups[group_ids[i]].push_back(i);

    std::vector<std::size_t> ranks;
    std::vector<std::vector<int>> ranked_lists;
    ranks.reserve(groups.size());
    ranked_lists.reserve(groups.size());
    for (auto& [group, indices] : groups) {
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return scores[a] > scores[b];
        });
        std::vector<int> list;
        list.reserve(indices.size());
        std::size_t first_relevant = 0;
        for (std::size_t pos = 0; pos < indices.size(); ++pos) {
            list.push_back(relevance[indices[pos]]);
            if (first_relevant == 0 && relevance[indices[pos]] != 0) first_relevant = pos + 1;
        }
        require(first_relevant != 0, "ranking_report: group has no relevant candidate");
        ranks.push_back(first_relevant);
        ranked_lists.push_back(std::move(list));
    }

    RankingReport report;
    report.mrr = mrr(ranks);
    std::vector<std::size_t> sorted_ks = ks;
    std::sort(sorted_ks.begin(), sorted_ks.end());
    for (std::size_t k : sorted_ks) {
        report.recall_at_k.emplace_back(k, recall_at_k(ranked_lists, k));
    }
    return report;
}

TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b) {
    require(scores_a.size() == scores_b.size(), "paired_t_test: length mismatch");
    const std::size_t n = scores_a.size();
    require(n >= 2, "paired_t_test: need at least 2 pairs");

    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = scores_a[i] - scores_b[i];
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double d : diff) var += (d - mean) * (d - mean);
    var /= static_cast<double>(n - 1);

    TTestResult result;
    if (var == 0.0) {
        if (mean == 0.0) {
            result.t = 0.0;
            result.p = 1.0;
        } else {
            result.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
            result.p = 0.0;
        }
        return result;
    }

    const double dof = static_cast<double>(n - 1);
    result.t = mean / std::sqrt(var / static_cast<double>(n));
    // Two-sided p: P(|T| >= |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2).
    result.p = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + result.t * result.t));
    return result;
}

}  // namespace ag

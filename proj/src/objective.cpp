#include "ag/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "ag/analysis.hpp"
#include "ag/errors.hpp"

namespace ag {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::vector<std::size_t> delimiter_positions(const Example& e) {
    std::vector<std::size_t> positions;
    for (std::size_t t = 0; t < e.ids.size(); ++t) {
        if (e.mask[t] && (e.ids[t] == kClsId || e.ids[t] == kSepId)) positions.push_back(t);
    }
    return positions;
}

PriorAttentionTarget make_target(GuideKind kind, const Example& e,
                                 const GuideResources& resources) {
    switch (kind) {
        case GuideKind::first:
        case GuideKind::next:
        case GuideKind::prev:
        case GuideKind::delim:
        case GuideKind::period:
            return fixed_pattern_target(kind, e.ids, delimiter_positions(e), kPeriodId, e.mask);
        case GuideKind::pmi:
            return pmi_target(e.ids, resources.pmi, e.mask);
        case GuideKind::prior_file: {
            const auto it = resources.prior.find(e.example_id);
            if (it == resources.prior.end()) {
                throw parse_error("prior target file has no entries for example " +
                                  std::to_string(e.example_id));
            }
            return finalize_prior_target(it->second, e.mask, "file");
        }
        default:
            throw std::invalid_argument("make_target: kind is not a pattern guide");
    }
}

// Softmax probability of class 1 from a two-logit row.
double positive_probability(const double* logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    return e1 / (e0 + e1);
}

}  // namespace

GuideResources prepare_guide_resources(GuideKind kind, const std::vector<Example>& corpus,
                                       std::size_t pmi_window, const std::string& prior_file,
                                       std::size_t seq_len) {
    GuideResources resources;
    if (kind == GuideKind::pmi) {
        std::vector<std::vector<int>> sequences;
        sequences.reserve(corpus.size());
        for (const Example& e : corpus) {
            std::vector<int> ids;
            for (std::size_t t = 0; t < e.ids.size() && e.mask[t]; ++t) ids.push_back(e.ids[t]);
            sequences.push_back(std::move(ids));
        }
        resources.pmi = compute_pmi_table(sequences, pmi_window);
    } else if (kind == GuideKind::prior_file) {
        if (prior_file.empty()) {
            throw std::invalid_argument("prior-file guide needs a prior_file path");
        }
        resources.prior = load_prior_targets(prior_file, seq_len);
    }
    return resources;
}

BatchLoss batch_total_loss(const ModelParameters& params,
                           const std::vector<const Example*>& batch, TaskKind task,
                           const GuidingConfig& guiding, const GuideResources& resources,
                           BatchWorkspace& workspace, ModelParameters* grads) {
    require(!batch.empty(), "batch_total_loss: empty batch");
    const ArchitectureConfig& arch = params.arch;
    guiding.validate(arch.layers);
    if (task == TaskKind::ranking) {
        require(arch.classes == 2, "batch_total_loss: ranking task needs 2 classes");
    }

    const bool mdg_active = guide_uses_mdg(guiding.guide_kind) && guiding.alpha != 0.0;
    const bool pdg_active = guide_uses_pdg(guiding.guide_kind) && guiding.beta != 0.0;
    const bool pattern_active =
        guide_uses_pattern(guiding.guide_kind) && guiding.pattern_weight != 0.0;
    const bool guided = mdg_active || pdg_active || pattern_active;

    const std::size_t B = batch.size();
    const double inv_b = 1.0 / static_cast<double>(B);
    if (workspace.caches.size() < B) workspace.caches.resize(B);

    Matrix logits(B, arch.classes);
    std::vector<int> labels(B);
    for (std::size_t i = 0; i < B; ++i) {
        const Example& e = *batch[i];
        encoder_forward(params, e.ids, e.mask, workspace.caches[i]);
        for (std::size_t c = 0; c < arch.classes; ++c) {
            logits(i, c) = workspace.caches[i].logits[c];
        }
        labels[i] = e.label;
    }

    BatchLoss out;
    Matrix d_logits;
    if (task == TaskKind::nli) {
        MulticlassLoss loss = task_loss_multiclass(logits, labels);
        out.task = loss.value;
        d_logits = std::move(loss.d_logits);
    } else {
        std::vector<double> probabilities(B);
        for (std::size_t i = 0; i < B; ++i) probabilities[i] = positive_probability(logits.row(i));
        out.task = task_loss_binary(probabilities, labels).value;
        // Binary cross-entropy on the class-1 softmax probability is the
        // two-class cross-entropy, so the logit gradient is the usual
        // (softmax - one-hot) / B.
        d_logits.resize(B, arch.classes);
        for (std::size_t i = 0; i < B; ++i) {
            const double p = probabilities[i];
            d_logits(i, 0) = ((1.0 - p) - (labels[i] == 0 ? 1.0 : 0.0)) * inv_b;
            d_logits(i, 1) = (p - (labels[i] == 1 ? 1.0 : 0.0)) * inv_b;
        }
    }

    if (!guided) {
        out.total = out.task;
        if (grads != nullptr) {
            std::vector<double> d_row(arch.classes);
            for (std::size_t i = 0; i < B; ++i) {
                for (std::size_t c = 0; c < arch.classes; ++c) d_row[c] = d_logits(i, c);
                encoder_backward(params, batch[i]->ids, batch[i]->mask, workspace.caches[i],
                                 d_row, nullptr, *grads);
            }
        }
        return out;
    }

    if (workspace.d_attn.size() != arch.layers * arch.heads) {
        workspace.d_attn.assign(arch.layers * arch.heads, Matrix());
    }
    std::vector<double> d_row(arch.classes);
    for (std::size_t i = 0; i < B; ++i) {
        const Example& e = *batch[i];
        const AttentionTensor attn = attention_from_cache(workspace.caches[i], arch);

        for (Matrix& slot : workspace.d_attn) {
            if (!slot.empty()) slot.set_zero();
        }
        bool any_attn_grad = false;

        if (mdg_active || pdg_active) {
            const AttentionMatrix am = build_attention_matrix(attn, guiding.layer_mask, e.mask);
            if (mdg_active) {
                LossWithGrad mdg = mdg_loss(am.m, guiding.tau);
                out.mdg += mdg.value * inv_b;
                if (grads != nullptr) {
                    scale_inplace(mdg.d_m, guiding.alpha * inv_b);
                    attention_matrix_backward(am, mdg.d_m, e.mask, arch.heads,
                                              workspace.d_attn);
                    any_attn_grad = true;
                }
            }
            if (pdg_active) {
                if (guiding.pdg_raw_rows) {
                    Matrix raw = am.m;
                    for (std::size_t r = 0; r < raw.rows(); ++r) {
                        double* row = raw.row(r);
                        for (std::size_t c = 0; c < raw.cols(); ++c) row[c] *= am.norms[r];
                    }
                    LossWithGrad pdg = pdg_loss_masked(raw, e.mask);
                    out.pdg += pdg.value * inv_b;
                    if (grads != nullptr) {
                        // Raw rows bypass the normalization, so the gradient
                        // scatters straight onto the unmasked query rows.
                        scale_inplace(pdg.d_m, guiding.beta * inv_b);
                        for (std::size_t r = 0; r < raw.rows(); ++r) {
                            const auto [layer, head] = am.provenance[r];
                            Matrix& slot = workspace.d_attn[layer * arch.heads + head];
                            if (slot.empty()) slot.resize(attn.seq_len, attn.seq_len);
                            const double* drow = pdg.d_m.row(r);
                            for (std::size_t q = 0; q < attn.seq_len; ++q) {
                                if (!e.mask[q]) continue;
                                double* dst = slot.row(q);
                                for (std::size_t t = 0; t < attn.seq_len; ++t) dst[t] += drow[t];
                            }
                        }
                        any_attn_grad = true;
                    }
                } else {
                    LossWithGrad pdg = pdg_loss_masked(am.m, e.mask);
                    out.pdg += pdg.value * inv_b;
                    if (grads != nullptr) {
                        scale_inplace(pdg.d_m, guiding.beta * inv_b);
                        attention_matrix_backward(am, pdg.d_m, e.mask, arch.heads,
                                                  workspace.d_attn);
                        any_attn_grad = true;
                    }
                }
            }
        }

        if (pattern_active) {
            const PriorAttentionTarget target = make_target(guiding.guide_kind, e, resources);
            PatternLoss pattern =
                pattern_guiding_loss(attn, target, guiding.layer_mask, e.mask);
            out.pattern += pattern.value * inv_b;
            if (grads != nullptr) {
                const double scale = guiding.pattern_weight * inv_b;
                for (std::size_t slot = 0; slot < pattern.d_attn.size(); ++slot) {
                    if (pattern.d_attn[slot].empty()) continue;
                    Matrix& dst = workspace.d_attn[slot];
                    if (dst.empty()) dst.resize(attn.seq_len, attn.seq_len);
                    add_scaled(dst, pattern.d_attn[slot], scale);
                }
                any_attn_grad = true;
            }
        }

        if (grads != nullptr) {
            for (std::size_t c = 0; c < arch.classes; ++c) d_row[c] = d_logits(i, c);
            encoder_backward(params, e.ids, e.mask, workspace.caches[i], d_row,
                             any_attn_grad ? &workspace.d_attn : nullptr, *grads);
        }
    }

    out.total = total_loss(out.task, out.mdg, out.pdg, guiding.alpha, guiding.beta) +
                guiding.pattern_weight * out.pattern;
    return out;
}

std::vector<int> predict_classes(const ModelParameters& params,
                                 const std::vector<Example>& examples) {
    std::vector<int> predictions;
    predictions.reserve(examples.size());
    EncoderCache cache;
    for (const Example& e : examples) {
        encoder_forward(params, e.ids, e.mask, cache);
        std::size_t best = 0;
        for (std::size_t c = 1; c < cache.logits.size(); ++c) {
            if (cache.logits[c] > cache.logits[best]) best = c;
        }
        predictions.push_back(static_cast<int>(best));
    }
    return predictions;
}

std::vector<double> predict_positive_scores(const ModelParameters& params,
                                            const std::vector<Example>& examples) {
    require(params.arch.classes == 2, "predict_positive_scores: model must have 2 classes");
    std::vector<double> scores;
    scores.reserve(examples.size());
    EncoderCache cache;
    for (const Example& e : examples) {
        encoder_forward(params, e.ids, e.mask, cache);
        scores.push_back(positive_probability(cache.logits.data()));
    }
    return scores;
}

AttentionStats attention_statistics(const ModelParameters& params,
                                    const std::vector<Example>& sample) {
    require(!sample.empty(), "attention_statistics: empty sample");
    const std::vector<std::uint8_t> all_layers(params.arch.layers, 1);
    AttentionStats stats;
    EncoderCache cache;
    for (const Example& e : sample) {
        encoder_forward(params, e.ids, e.mask, cache);
        const AttentionTensor attn = attention_from_cache(cache, params.arch);
        const AttentionMatrix am = build_attention_matrix(attn, all_layers, e.mask);
        stats.head_diversity_mean += head_diversity(am.m);
        stats.decorrelation_mean += decorrelation_score(am.m);
    }
    const double inv_n = 1.0 / static_cast<double>(sample.size());
    stats.head_diversity_mean *= inv_n;
    stats.decorrelation_mean *= inv_n;
    return stats;
}

}  // namespace ag

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ag/data.hpp"
#include "ag/encoder.hpp"
#include "ag/guiding.hpp"
#include "ag/matrix.hpp"

namespace ag {

// Inputs the pattern-based guides need once per run: the PMI table built
// from the training corpus, or the prior targets loaded from file.
struct GuideResources {
    PmiTable pmi;
    std::map<std::size_t, Matrix> prior;  // keyed by example_id
};

GuideResources prepare_guide_resources(GuideKind kind, const std::vector<Example>& corpus,
                                       std::size_t pmi_window, const std::string& prior_file,
                                       std::size_t seq_len);

struct BatchLoss {
    double task = 0.0;
    double mdg = 0.0;      // batch mean; 0 when the MDG term is inactive
    double pdg = 0.0;      // batch mean; 0 when the PDG term is inactive
    double pattern = 0.0;  // batch mean of the baseline guide loss
    double total = 0.0;    // task + alpha*mdg + beta*pdg + pattern_weight*pattern
};

// Reusable per-batch buffers so steady-state training does not reallocate.
struct BatchWorkspace {
    std::vector<EncoderCache> caches;
    std::vector<Matrix> d_attn;
};

/// Forward (and optionally backward) over one batch. A loss term is active
/// only when its guide kind selects it AND its coefficient is nonzero, so a
/// run with all coefficients zero takes exactly the unguided code path.
/// When `grads` is non-null, gradients of the total loss accumulate into it.
BatchLoss batch_total_loss(const ModelParameters& params,
                           const std::vector<const Example*>& batch, TaskKind task,
                           const GuidingConfig& guiding, const GuideResources& resources,
                           BatchWorkspace& workspace, ModelParameters* grads);

// Argmax class per example, ties to the lowest class id.
std::vector<int> predict_classes(const ModelParameters& params,
                                 const std::vector<Example>& examples);

// Softmax probability of class 1 per example (ranking relevance score).
std::vector<double> predict_positive_scores(const ModelParameters& params,
                                            const std::vector<Example>& examples);

struct AttentionStats {
    double head_diversity_mean = 0.0;
    double decorrelation_mean = 0.0;
};

// Mean head diversity and decorrelation score of the all-layers attention
// matrix over a sample of examples.
AttentionStats attention_statistics(const ModelParameters& params,
                                    const std::vector<Example>& sample);

}  // namespace ag

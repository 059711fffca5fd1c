#pragma once

#include <string>
#include <vector>

#include "ag/encoder.hpp"
#include "ag/guiding.hpp"
#include "ag/matrix.hpp"

namespace ag {

// Mean pairwise dot product over row pairs i < j. For unit rows this is the
// mean cosine similarity: 1 for identical rows, 0 for mutually orthogonal
// ones; lower means more diverse heads.
double head_diversity(const Matrix& m);

// Identical to pdg_loss reused as a diagnostic; delegates to the same
// implementation so the two agree bit-for-bit.
double decorrelation_score(const Matrix& m);

// L x L CSV of the elementwise mean over every (layer, head) map of one
// example. First line is the example's token strings; numeric rows use
// %.17g so a parse round-trips exactly.
void export_heatmap(const AttentionTensor& attn, const std::vector<std::string>& tokens,
                    const std::string& path);

// Stacks the rows of every sample's attention matrix, projects them to 2-D
// with PCA, and writes "sample_id,layer,head,x,y" rows.
void pca_heads(const std::vector<AttentionMatrix>& samples, const std::string& path);

}  // namespace ag

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ag/encoder.hpp"
#include "ag/matrix.hpp"

namespace ag {

/// Stacked reduced attention vectors, one unit-norm row per selected
/// (layer, head) pair, in layer-major order. `norms` keeps the Euclidean
/// norm of each raw reduced row so gradients can be pushed back through
/// the normalization.
struct AttentionMatrix {
    Matrix m;  // N_s x L, every row unit norm, entries >= 0
    std::vector<std::pair<std::size_t, std::size_t>> provenance;  // (layer, head) per row
    std::vector<double> norms;
};

enum class GuideKind {
    mdg_pdg,
    mdg,
    pdg,
    none,
    first,
    next,
    prev,
    delim,
    period,
    pmi,
    prior_file,
};

GuideKind parse_guide_kind(const std::string& name);  // unknown name -> parse_error
std::string to_string(GuideKind kind);

bool guide_uses_mdg(GuideKind kind);
bool guide_uses_pdg(GuideKind kind);
bool guide_uses_pattern(GuideKind kind);

struct GuidingConfig {
    double alpha = 0.0;
    double beta = 0.0;
    double tau = 1.0;
    std::vector<std::uint8_t> layer_mask;  // length = encoder layers
    GuideKind guide_kind = GuideKind::none;
    double pattern_weight = 1.0;  // weight of the baseline pattern loss
    bool pdg_raw_rows = false;    // decorrelate raw reduced rows instead of unit rows

    // Checks coefficient signs, tau > 0, mask length, and that at least one
    // layer is selected whenever guide_kind is not `none`.
    void validate(std::size_t layers) const;
};

// Row-stochastic L x L attention target for one example. Rows restricted to
// unmasked columns sum to 1; masked rows are filled uniform and carry no loss.
struct PriorAttentionTarget {
    Matrix target;
    std::string source;  // pattern name, "pmi", or "file"
};

// m[t] = sum of A[r, t] over unmasked query rows r: the attention token t
// received. Masked key columns are zero in A, so their entries come out 0.
std::vector<double> reduce_attention_map(const Matrix& attn,
                                         const std::vector<std::uint8_t>& pad_mask);

// One row per head of each selected layer, reduced and L2-normalized.
// A zero-norm reduced row (impossible for row-stochastic input) raises
// numerical_error.
AttentionMatrix build_attention_matrix(const AttentionTensor& attn,
                                       const std::vector<std::uint8_t>& layer_mask,
                                       const std::vector<std::uint8_t>& pad_mask);

// Scatters a gradient w.r.t. the rows of `am.m` back onto the attention maps
// the rows were reduced from, through the L2 normalization. Accumulates into
// d_attn (layer-major, one L x L slot per head; empty slots are allocated).
void attention_matrix_backward(const AttentionMatrix& am, const Matrix& d_m,
                               const std::vector<std::uint8_t>& pad_mask, std::size_t heads,
                               std::vector<Matrix>& d_attn);

struct LossWithGrad {
    double value = 0.0;
    Matrix d_m;
};

// -sum_i log[ exp(m_i . m_i / tau) / sum_j exp(m_j . m_i / tau) ], stabilized
// with log-sum-exp. Identical rows give the maximum N ln N.
LossWithGrad mdg_loss(const Matrix& m, double tau);

// || M^T M - I_L ||_F^2 with the full L x L identity.
LossWithGrad pdg_loss(const Matrix& m);

// Training variant: the identity target is restricted to unmasked columns so
// padded positions (whose M columns are structurally zero) carry no loss.
LossWithGrad pdg_loss_masked(const Matrix& m, const std::vector<std::uint8_t>& pad_mask);

// task + alpha * mdg + beta * pdg, exactly.
double total_loss(double task, double mdg, double pdg, double alpha, double beta);

// Fixed baseline targets. `kind` must be one of first/next/prev/delim/period:
// first = all mass on column 0; next/prev = super/subdiagonal with the edge
// row attending itself and masked rows filled uniform; delim = every row
// uniform over delimiter_positions; period = every row uniform over unmasked
// occurrences of period_token_id, falling back to column 0 when there are
// none. Masked rows never contribute to the pattern loss either way.
PriorAttentionTarget fixed_pattern_target(GuideKind kind, const std::vector<int>& ids,
                                          const std::vector<std::size_t>& delimiter_positions,
                                          int period_token_id,
                                          const std::vector<std::uint8_t>& pad_mask);

struct PatternLoss {
    double value = 0.0;
    std::vector<Matrix> d_attn;  // layer-major; empty for unselected layers
};

// Mean KL(target row || attention row) over the heads of selected layers and
// unmasked rows. Zero iff those attention rows equal the target rows.
PatternLoss pattern_guiding_loss(const AttentionTensor& attn, const PriorAttentionTarget& target,
                                 const std::vector<std::uint8_t>& layer_mask,
                                 const std::vector<std::uint8_t>& pad_mask);

// Symmetric positive-PMI scores over token pairs; pairs that never co-occur
// within the window score 0.
class PmiTable {
public:
    double score(int x, int y) const;
    void set(int x, int y, double value);
    std::size_t size() const { return scores_.size(); }

private:
    static std::uint64_t key(int x, int y);
    std::unordered_map<std::uint64_t, double> scores_;
};

// PMI(x, y) = ln[ p(x, y) / (p(x) p(y)) ] from within-window co-occurrence
// counts, negatives clamped to 0. Counts are symmetric: each window pair
// contributes one event in each direction.
PmiTable compute_pmi_table(const std::vector<std::vector<int>>& corpus, std::size_t window);

// T[r, c] proportional to score(id_r, id_c) over unmasked columns, rows
// normalized; rows with no mass fall back to uniform over unmasked positions.
PriorAttentionTarget pmi_target(const std::vector<int>& ids, const PmiTable& table,
                                const std::vector<std::uint8_t>& pad_mask);

// Restricts a raw non-negative L x L matrix to unmasked columns, normalizes
// each row, and fills rows with no remaining mass uniform over unmasked
// positions.
PriorAttentionTarget finalize_prior_target(const Matrix& raw,
                                           const std::vector<std::uint8_t>& pad_mask,
                                           std::string source);

// Sparse-triplet prior files: "example_id<TAB>row<TAB>col<TAB>weight" lines,
// '#' comments and blank lines ignored, 0-based indices, non-negative
// weights. Loaded matrices are row-normalized; rows without triplets stay
// zero until finalize_prior_target fills them.
std::map<std::size_t, Matrix> load_prior_targets(const std::string& path, std::size_t seq_len);

void write_prior_targets(const std::string& path,
                         const std::map<std::size_t, Matrix>& targets);

}  // namespace ag

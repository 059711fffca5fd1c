#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ag/matrix.hpp"
#include "ag/rng.hpp"

namespace ag {

struct ArchitectureConfig {
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t d_model = 64;
    std::size_t d_k = 16;
    std::size_t seq_len = 32;
    std::size_t ffn_hidden = 128;
    std::size_t classes = 3;
    std::size_t vocab_size = 0;

    void validate() const;  // all positive, d_k * heads == d_model
    bool operator==(const ArchitectureConfig&) const = default;
};

struct LayerParameters {
    std::vector<Matrix> w_q, w_k, w_v;  // per head, d_model x d_k
    Matrix w_o;                         // d_model x d_model
    Matrix w_ff1;                       // d_model x ffn_hidden
    Matrix w_ff2;                       // ffn_hidden x d_model
};

/// All trainable tensors. tensors() exposes them in a fixed, documented order
/// (token embedding, position embedding, then per layer w_q/w_k/w_v per head,
/// w_o, w_ff1, w_ff2, finally the classifier); the checkpoint format and the
/// Adam state both rely on that order.
struct ModelParameters {
    ArchitectureConfig arch;
    Matrix token_embedding;     // V x d_model
    Matrix position_embedding;  // L x d_model
    std::vector<LayerParameters> layer;
    Matrix classifier;          // C x d_model

    static ModelParameters zeros(const ArchitectureConfig& arch);
    static ModelParameters random_init(const ArchitectureConfig& arch, Rng& rng,
                                       double stddev = 0.02);

    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    std::size_t parameter_count() const;
    void set_zero();
};

// All attention maps from one forward pass, layer-major / head-minor.
// Every map is L x L, rows sum to 1, masked key columns are exactly 0.
struct AttentionTensor {
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t seq_len = 0;
    std::vector<Matrix> maps;

    Matrix& map(std::size_t l, std::size_t h) { return maps[l * heads + h]; }
    const Matrix& map(std::size_t l, std::size_t h) const { return maps[l * heads + h]; }
};

/// One attention head: A = softmax(Q K^T / sqrt(d_k)) with masked key columns
/// excluded before normalization, O = A V. mask[t] != 0 marks a real token.
std::pair<Matrix, Matrix> attention_head_forward(const Matrix& z, const Matrix& w_q,
                                                 const Matrix& w_k, const Matrix& w_v,
                                                 const std::vector<std::uint8_t>& key_mask);

struct HeadCache {
    Matrix q, k, v;  // L x d_k
    Matrix attn;     // L x L
};

struct LayerCache {
    Matrix input;  // L x d_model
    std::vector<HeadCache> heads;
    Matrix concat;     // L x d_model
    Matrix attn_proj;  // concat * w_o
    Matrix ln1_out;
    std::vector<double> ln1_sigma;  // per-row sqrt(var + eps)
    Matrix res1;    // input + ln1_out
    Matrix ff_pre;  // res1 * w_ff1
    Matrix ff_act;  // relu(ff_pre)
    Matrix ff_out;  // ff_act * w_ff2
    Matrix ln2_out;
    std::vector<double> ln2_sigma;
    Matrix out;  // res1 + ln2_out
};

struct EncoderCache {
    Matrix embedded;  // L x d_model
    std::vector<LayerCache> layers;
    std::vector<double> cls_hidden;  // d_model, row 0 of the final layer
    std::vector<double> cls_relu;
    std::vector<double> logits;  // classes
};

// Full forward pass for one padded sequence; fills the cache needed by
// encoder_backward and leaves the attention maps in cache.layers[l].heads[h].attn.
void encoder_forward(const ModelParameters& params, const std::vector<int>& ids,
                     const std::vector<std::uint8_t>& mask, EncoderCache& cache);

AttentionTensor attention_from_cache(const EncoderCache& cache, const ArchitectureConfig& arch);

// logits = W * relu(h), no bias.
std::vector<double> classify(const std::vector<double>& hidden, const Matrix& w);

struct EncodeOutput {
    Matrix cls_hidden;  // batch x d_model
    std::vector<AttentionTensor> attention;
};

EncodeOutput encode(const ModelParameters& params, const std::vector<std::vector<int>>& ids,
                    const std::vector<std::vector<std::uint8_t>>& masks);

/// Reverse pass for one sequence. d_logits is the loss gradient at the logits;
/// d_attn, when non-null, carries extra loss gradients w.r.t. each attention
/// map (layer-major) and is added where the maps branch off to the guiding
/// losses. Gradients accumulate into `grads`.
void encoder_backward(const ModelParameters& params, const std::vector<int>& ids,
                      const std::vector<std::uint8_t>& mask, const EncoderCache& cache,
                      const std::vector<double>& d_logits, const std::vector<Matrix>* d_attn,
                      ModelParameters& grads);

struct MulticlassLoss {
    double value = 0.0;
    Matrix d_logits;  // batch x classes
};

// Mean negative log-likelihood under a softmax over the logits.
MulticlassLoss task_loss_multiclass(const Matrix& logits, const std::vector<int>& labels);

struct BinaryLoss {
    double value = 0.0;
    std::vector<double> d_prob;
};

// Mean binary cross-entropy; probabilities are clamped away from {0,1}.
BinaryLoss task_loss_binary(const std::vector<double>& probabilities,
                            const std::vector<int>& labels);

}  // namespace ag

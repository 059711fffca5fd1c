#include "ag/encoder.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace ag {

namespace {

constexpr double kLayerNormEps = 1e-5;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// Row-wise softmax over unmasked key columns; masked columns come out exactly 0.
void masked_softmax_rows(Matrix& scores, const std::vector<std::uint8_t>& key_mask) {
    const std::size_t n = scores.cols();
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        double* row = scores.row(r);
        double max_v = -1e308;
        for (std::size_t c = 0; c < n; ++c)
            if (key_mask[c] && row[c] > max_v) max_v = row[c];
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (key_mask[c]) {
                row[c] = std::exp(row[c] - max_v);
                sum += row[c];
            } else {
                row[c] = 0.0;
            }
        }
        for (std::size_t c = 0; c < n; ++c) row[c] /= sum;
    }
}

// y = (x - mean) / sqrt(var + eps) per row; sigma stores the denominators.
void layer_norm_rows(const Matrix& x, Matrix& y, std::vector<double>& sigma) {
    const std::size_t n = x.cols();
    if (y.rows() != x.rows() || y.cols() != n) y.resize(x.rows(), n);
    sigma.resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* xr = x.row(r);
        double* yr = y.row(r);
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double s = std::sqrt(var + kLayerNormEps);
        sigma[r] = s;
        for (std::size_t j = 0; j < n; ++j) yr[j] = (xr[j] - mean) / s;
    }
}

// dx = (dy - mean(dy) - y * mean(dy .* y)) / sigma, accumulated into dx.
void layer_norm_backward(const Matrix& y, const std::vector<double>& sigma, const Matrix& dy,
                         Matrix& dx) {
    const std::size_t n = y.cols();
    if (dx.rows() != y.rows() || dx.cols() != n) dx.resize(y.rows(), n);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        const double* yr = y.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        double mean_dy = 0.0, mean_dyy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean_dy += dyr[j];
            mean_dyy += dyr[j] * yr[j];
        }
        mean_dy /= static_cast<double>(n);
        mean_dyy /= static_cast<double>(n);
        const double inv_s = 1.0 / sigma[r];
        for (std::size_t j = 0; j < n; ++j) {
            dxr[j] += (dyr[j] - mean_dy - yr[j] * mean_dyy) * inv_s;
        }
    }
}

// dS = A .* (dA - rowsum(dA .* A)) over unmasked columns.
void softmax_backward_rows(const Matrix& attn, const Matrix& d_attn, Matrix& d_scores) {
    const std::size_t n = attn.cols();
    if (d_scores.rows() != attn.rows() || d_scores.cols() != n) d_scores.resize(attn.rows(), n);
    for (std::size_t r = 0; r < attn.rows(); ++r) {
        const double* a = attn.row(r);
        const double* da = d_attn.row(r);
        double* ds = d_scores.row(r);
        double inner = 0.0;
        for (std::size_t c = 0; c < n; ++c) inner += da[c] * a[c];
        for (std::size_t c = 0; c < n; ++c) ds[c] = a[c] * (da[c] - inner);
    }
}

void head_forward_into(const Matrix& z, const LayerParameters& lp, std::size_t head,
                       const std::vector<std::uint8_t>& key_mask, double inv_sqrt_dk,
                       HeadCache& hc) {
    matmul(hc.q, z, lp.w_q[head]);
    matmul(hc.k, z, lp.w_k[head]);
    matmul(hc.v, z, lp.w_v[head]);
    matmul_nt(hc.attn, hc.q, hc.k);
    scale_inplace(hc.attn, inv_sqrt_dk);
    masked_softmax_rows(hc.attn, key_mask);
}

}  // namespace

void ArchitectureConfig::validate() const {
    require(layers > 0 && heads > 0 && d_model > 0 && d_k > 0 && seq_len > 0 &&
                ffn_hidden > 0 && classes > 0 && vocab_size > 0,
            "ArchitectureConfig: all dimensions must be positive");
    require(d_k * heads == d_model, "ArchitectureConfig: d_k * heads must equal d_model");
}

ModelParameters ModelParameters::zeros(const ArchitectureConfig& arch) {
    arch.validate();
    ModelParameters p;
    p.arch = arch;
    p.token_embedding.resize(arch.vocab_size, arch.d_model);
    p.position_embedding.resize(arch.seq_len, arch.d_model);
    p.layer.resize(arch.layers);
    for (auto& lp : p.layer) {
        lp.w_q.assign(arch.heads, Matrix(arch.d_model, arch.d_k));
        lp.w_k.assign(arch.heads, Matrix(arch.d_model, arch.d_k));
        lp.w_v.assign(arch.heads, Matrix(arch.d_model, arch.d_k));
        lp.w_o.resize(arch.d_model, arch.d_model);
        lp.w_ff1.resize(arch.d_model, arch.ffn_hidden);
        lp.w_ff2.resize(arch.ffn_hidden, arch.d_model);
    }
    p.classifier.resize(arch.classes, arch.d_model);
    return p;
}

ModelParameters ModelParameters::random_init(const ArchitectureConfig& arch, Rng& rng,
                                             double stddev) {
    ModelParameters p = zeros(arch);
    for (Matrix* t : p.tensors()) {
        double* v = t->data();
        for (std::size_t i = 0; i < t->size(); ++i) v[i] = rng.normal(0.0, stddev);
    }
    return p;
}

std::vector<Matrix*> ModelParameters::tensors() {
    std::vector<Matrix*> out;
    out.push_back(&token_embedding);
    out.push_back(&position_embedding);
    for (auto& lp : layer) {
        for (auto& m : lp.w_q) out.push_back(&m);
        for (auto& m : lp.w_k) out.push_back(&m);
        for (auto& m : lp.w_v) out.push_back(&m);
        out.push_back(&lp.w_o);
        out.push_back(&lp.w_ff1);
        out.push_back(&lp.w_ff2);
    }
    out.push_back(&classifier);
    return out;
}

std::vector<const Matrix*> ModelParameters::tensors() const {
    std::vector<const Matrix*> out;
    for (Matrix* m : const_cast<ModelParameters*>(this)->tensors()) out.push_back(m);
    return out;
}

std::size_t ModelParameters::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix* m : tensors()) n += m->size();
    return n;
}

void ModelParameters::set_zero() {
    for (Matrix* m : tensors()) m->set_zero();
}

std::pair<Matrix, Matrix> attention_head_forward(const Matrix& z, const Matrix& w_q,
                                                 const Matrix& w_k, const Matrix& w_v,
                                                 const std::vector<std::uint8_t>& key_mask) {
    require(z.cols() == w_q.rows() && z.cols() == w_k.rows() && z.cols() == w_v.rows(),
            "attention_head_forward: projection shape mismatch");
    require(w_q.cols() == w_k.cols(), "attention_head_forward: q/k width mismatch");
    require(key_mask.size() == z.rows(), "attention_head_forward: mask length mismatch");
    bool any = false;
    for (std::uint8_t m : key_mask) any = any || m;
    require(any, "attention_head_forward: all positions masked");

    Matrix q = matmul(z, w_q);
    Matrix k = matmul(z, w_k);
    Matrix v = matmul(z, w_v);
    Matrix attn;
    matmul_nt(attn, q, k);
    scale_inplace(attn, 1.0 / std::sqrt(static_cast<double>(w_q.cols())));
    masked_softmax_rows(attn, key_mask);
    Matrix out = matmul(attn, v);
    return {std::move(attn), std::move(out)};
}

void encoder_forward(const ModelParameters& params, const std::vector<int>& ids,
                     const std::vector<std::uint8_t>& mask, EncoderCache& cache) {
    const ArchitectureConfig& arch = params.arch;
    require(ids.size() == arch.seq_len, "encoder_forward: sequence length mismatch");
    require(mask.size() == arch.seq_len, "encoder_forward: mask length mismatch");
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= arch.vocab_size) {
            throw std::invalid_argument("encoder_forward: token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(arch.vocab_size));
        }
    }
    require(mask[0] != 0, "encoder_forward: position 0 must be unmasked");

    const std::size_t L = arch.seq_len, D = arch.d_model;
    cache.embedded.resize(L, D);
    for (std::size_t t = 0; t < L; ++t) {
        const double* tok = params.token_embedding.row(static_cast<std::size_t>(ids[t]));
        const double* pos = params.position_embedding.row(t);
        double* out = cache.embedded.row(t);
        for (std::size_t j = 0; j < D; ++j) out[j] = tok[j] + pos[j];
    }

    cache.layers.resize(arch.layers);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(arch.d_k));
    const Matrix* layer_in = &cache.embedded;
    for (std::size_t l = 0; l < arch.layers; ++l) {
        LayerCache& lc = cache.layers[l];
        const LayerParameters& lp = params.layer[l];
        lc.input = *layer_in;
        lc.heads.resize(arch.heads);
        lc.concat.resize(L, D);
        for (std::size_t h = 0; h < arch.heads; ++h) {
            HeadCache& hc = lc.heads[h];
            head_forward_into(lc.input, lp, h, mask, inv_sqrt_dk, hc);
            Matrix head_out;
            matmul(head_out, hc.attn, hc.v);
            for (std::size_t r = 0; r < L; ++r) {
                std::memcpy(lc.concat.row(r) + h * arch.d_k, head_out.row(r),
                            arch.d_k * sizeof(double));
            }
        }
        matmul(lc.attn_proj, lc.concat, lp.w_o);
        layer_norm_rows(lc.attn_proj, lc.ln1_out, lc.ln1_sigma);
        lc.res1 = lc.input;
        add_inplace(lc.res1, lc.ln1_out);

        matmul(lc.ff_pre, lc.res1, lp.w_ff1);
        lc.ff_act = lc.ff_pre;
        for (std::size_t i = 0; i < lc.ff_act.size(); ++i) {
            if (lc.ff_act.data()[i] < 0.0) lc.ff_act.data()[i] = 0.0;
        }
        matmul(lc.ff_out, lc.ff_act, lp.w_ff2);
        layer_norm_rows(lc.ff_out, lc.ln2_out, lc.ln2_sigma);
        lc.out = lc.res1;
        add_inplace(lc.out, lc.ln2_out);
        layer_in = &lc.out;
    }

    const Matrix& final_out = cache.layers.back().out;
    cache.cls_hidden.assign(final_out.row(0), final_out.row(0) + D);
    cache.cls_relu = cache.cls_hidden;
    for (double& v : cache.cls_relu) v = std::max(v, 0.0);
    cache.logits.assign(arch.classes, 0.0);
    for (std::size_t c = 0; c < arch.classes; ++c) {
        cache.logits[c] = dot(params.classifier.row(c), cache.cls_relu.data(), D);
    }
}

AttentionTensor attention_from_cache(const EncoderCache& cache, const ArchitectureConfig& arch) {
    AttentionTensor attn;
    attn.layers = arch.layers;
    attn.heads = arch.heads;
    attn.seq_len = arch.seq_len;
    attn.maps.reserve(arch.layers * arch.heads);
    for (std::size_t l = 0; l < arch.layers; ++l)
        for (std::size_t h = 0; h < arch.heads; ++h) attn.maps.push_back(cache.layers[l].heads[h].attn);
    return attn;
}

std::vector<double> classify(const std::vector<double>& hidden, const Matrix& w) {
    require(w.cols() == hidden.size(), "classify: shape mismatch");
    std::vector<double> relu = hidden;
    for (double& v : relu) v = std::max(v, 0.0);
    std::vector<double> logits(w.rows(), 0.0);
    for (std::size_t c = 0; c < w.rows(); ++c) logits[c] = dot(w.row(c), relu.data(), w.cols());
    return logits;
}

EncodeOutput encode(const ModelParameters& params, const std::vector<std::vector<int>>& ids,
                    const std::vector<std::vector<std::uint8_t>>& masks) {
    require(ids.size() == masks.size(), "encode: batch size mismatch");
    EncodeOutput out;
    out.cls_hidden.resize(ids.size(), params.arch.d_model);
    out.attention.reserve(ids.size());
    EncoderCache cache;
    for (std::size_t b = 0; b < ids.size(); ++b) {
        encoder_forward(params, ids[b], masks[b], cache);
        std::memcpy(out.cls_hidden.row(b), cache.cls_hidden.data(),
                    params.arch.d_model * sizeof(double));
        out.attention.push_back(attention_from_cache(cache, params.arch));
    }
    return out;
}

void encoder_backward(const ModelParameters& params, const std::vector<int>& ids,
                      const std::vector<std::uint8_t>& mask, const EncoderCache& cache,
                      const std::vector<double>& d_logits, const std::vector<Matrix>* d_attn,
                      ModelParameters& grads) {
    const ArchitectureConfig& arch = params.arch;
    require(d_logits.size() == arch.classes, "encoder_backward: d_logits size mismatch");
    const std::size_t L = arch.seq_len, D = arch.d_model;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(arch.d_k));

    // Classifier: logits = W * relu(h).
    std::vector<double> d_hidden(D, 0.0);
    for (std::size_t c = 0; c < arch.classes; ++c) {
        const double g = d_logits[c];
        if (g == 0.0) continue;
        double* dw = grads.classifier.row(c);
        const double* w = params.classifier.row(c);
        for (std::size_t j = 0; j < D; ++j) {
            dw[j] += g * cache.cls_relu[j];
            d_hidden[j] += g * w[j];
        }
    }
    for (std::size_t j = 0; j < D; ++j) {
        if (cache.cls_hidden[j] <= 0.0) d_hidden[j] = 0.0;
    }

    Matrix d_out(L, D);
    for (std::size_t j = 0; j < D; ++j) d_out(0, j) = d_hidden[j];

    Matrix d_res1, d_ff_out, d_ff_act, d_ff_pre, d_attn_proj, d_concat, d_o_h, d_a, d_v, d_s,
        d_q, d_k, d_input;
    for (std::size_t l = arch.layers; l-- > 0;) {
        const LayerCache& lc = cache.layers[l];
        const LayerParameters& lp = params.layer[l];
        LayerParameters& lg = grads.layer[l];

        // out = res1 + ln2(ff_out)
        d_res1 = d_out;
        d_ff_out.resize(L, D);
        layer_norm_backward(lc.ln2_out, lc.ln2_sigma, d_out, d_ff_out);

        // ff_out = relu(res1 * w_ff1) * w_ff2
        matmul_tn(lg.w_ff2, lc.ff_act, d_ff_out, /*accumulate=*/true);
        matmul_nt(d_ff_act, d_ff_out, lp.w_ff2);
        d_ff_pre = d_ff_act;
        for (std::size_t i = 0; i < d_ff_pre.size(); ++i) {
            if (lc.ff_pre.data()[i] <= 0.0) d_ff_pre.data()[i] = 0.0;
        }
        matmul_tn(lg.w_ff1, lc.res1, d_ff_pre, /*accumulate=*/true);
        matmul_nt(d_res1, d_ff_pre, lp.w_ff1, /*accumulate=*/true);

        // res1 = input + ln1(concat * w_o)
        d_input = d_res1;
        d_attn_proj.resize(L, D);
        layer_norm_backward(lc.ln1_out, lc.ln1_sigma, d_res1, d_attn_proj);
        matmul_tn(lg.w_o, lc.concat, d_attn_proj, /*accumulate=*/true);
        matmul_nt(d_concat, d_attn_proj, lp.w_o);

        for (std::size_t h = 0; h < arch.heads; ++h) {
            const HeadCache& hc = lc.heads[h];
            d_o_h.resize(L, arch.d_k);
            for (std::size_t r = 0; r < L; ++r) {
                std::memcpy(d_o_h.row(r), d_concat.row(r) + h * arch.d_k,
                            arch.d_k * sizeof(double));
            }
            // O_h = A V
            matmul_nt(d_a, d_o_h, hc.v);
            if (d_attn != nullptr) {
                const Matrix& extra = (*d_attn)[l * arch.heads + h];
                if (!extra.empty()) add_inplace(d_a, extra);
            }
            matmul_tn(d_v, hc.attn, d_o_h);
            softmax_backward_rows(hc.attn, d_a, d_s);
            scale_inplace(d_s, inv_sqrt_dk);
            // S = Q K^T (already scaled)
            matmul(d_q, d_s, hc.k);
            matmul_tn(d_k, d_s, hc.q);
            matmul_tn(lg.w_q[h], lc.input, d_q, /*accumulate=*/true);
            matmul_tn(lg.w_k[h], lc.input, d_k, /*accumulate=*/true);
            matmul_tn(lg.w_v[h], lc.input, d_v, /*accumulate=*/true);
            matmul_nt(d_input, d_q, lp.w_q[h], /*accumulate=*/true);
            matmul_nt(d_input, d_k, lp.w_k[h], /*accumulate=*/true);
            matmul_nt(d_input, d_v, lp.w_v[h], /*accumulate=*/true);
        }
        d_out = d_input;
    }

    for (std::size_t t = 0; t < L; ++t) {
        const double* g = d_out.row(t);
        double* tok = grads.token_embedding.row(static_cast<std::size_t>(ids[t]));
        double* pos = grads.position_embedding.row(t);
        for (std::size_t j = 0; j < D; ++j) {
            tok[j] += g[j];
            pos[j] += g[j];
        }
    }
    (void)mask;
}

MulticlassLoss task_loss_multiclass(const Matrix& logits, const std::vector<int>& labels) {
    require(logits.rows() == labels.size(), "task_loss_multiclass: batch size mismatch");
    const std::size_t B = logits.rows(), C = logits.cols();
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= C) {
            throw std::invalid_argument("task_loss_multiclass: label out of range");
        }
    }
    MulticlassLoss out;
    out.d_logits.resize(B, C);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i) {
        const double* row = logits.row(i);
        double max_v = row[0];
        for (std::size_t c = 1; c < C; ++c) max_v = std::max(max_v, row[c]);
        double sum = 0.0;
        double* d = out.d_logits.row(i);
        for (std::size_t c = 0; c < C; ++c) {
            d[c] = std::exp(row[c] - max_v);
            sum += d[c];
        }
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        out.value -= (row[y] - max_v - std::log(sum)) * inv_b;
        for (std::size_t c = 0; c < C; ++c) {
            d[c] = (d[c] / sum - (c == y ? 1.0 : 0.0)) * inv_b;
        }
    }
    return out;
}

BinaryLoss task_loss_binary(const std::vector<double>& probabilities,
                            const std::vector<int>& labels) {
    require(probabilities.size() == labels.size(), "task_loss_binary: batch size mismatch");
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("task_loss_binary: label not in {0,1}");
    }
    constexpr double eps = 1e-12;
    const std::size_t B = probabilities.size();
    const double inv_b = 1.0 / static_cast<double>(B);
    BinaryLoss out;
    out.d_prob.resize(B);
    for (std::size_t i = 0; i < B; ++i) {
        const double p = std::min(1.0 - eps, std::max(eps, probabilities[i]));
        const double y = static_cast<double>(labels[i]);
        out.value -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_b;
        out.d_prob[i] = (p - y) / (p * (1.0 - p)) * inv_b;
    }
    return out;
}

}  // namespace ag

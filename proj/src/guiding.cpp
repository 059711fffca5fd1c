#include "ag/guiding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ag/errors.hpp"
#include "ag/numeric.hpp"

namespace ag {

namespace {

constexpr double kAttnFloor = 1e-12;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::size_t count_unmasked(const std::vector<std::uint8_t>& mask) {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += (m != 0);
    return n;
}

std::string format_weight(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

GuideKind parse_guide_kind(const std::string& name) {
    if (name == "mdg+pdg") return GuideKind::mdg_pdg;
    if (name == "mdg") return GuideKind::mdg;
    if (name == "pdg") return GuideKind::pdg;
    if (name == "none") return GuideKind::none;
    if (name == "first") return GuideKind::first;
    if (name == "next") return GuideKind::next;
    if (name == "prev") return GuideKind::prev;
    if (name == "delim") return GuideKind::delim;
    if (name == "period") return GuideKind::period;
    if (name == "pmi") return GuideKind::pmi;
    if (name == "prior-file") return GuideKind::prior_file;
    throw parse_error("unknown guide kind '" + name + "'");
}

std::string to_string(GuideKind kind) {
    switch (kind) {
        case GuideKind::mdg_pdg: return "mdg+pdg";
        case GuideKind::mdg: return "mdg";
        case GuideKind::pdg: return "pdg";
        case GuideKind::none: return "none";
        case GuideKind::first: return "first";
        case GuideKind::next: return "next";
        case GuideKind::prev: return "prev";
        case GuideKind::delim: return "delim";
        case GuideKind::period: return "period";
        case GuideKind::pmi: return "pmi";
        case GuideKind::prior_file: return "prior-file";
    }
    throw std::invalid_argument("unknown guide kind");
}

bool guide_uses_mdg(GuideKind kind) {
    return kind == GuideKind::mdg_pdg || kind == GuideKind::mdg;
}

bool guide_uses_pdg(GuideKind kind) {
    return kind == GuideKind::mdg_pdg || kind == GuideKind::pdg;
}

bool guide_uses_pattern(GuideKind kind) {
    switch (kind) {
        case GuideKind::first:
        case GuideKind::next:
        case GuideKind::prev:
        case GuideKind::delim:
        case GuideKind::period:
        case GuideKind::pmi:
        case GuideKind::prior_file:
            return true;
        default:
            return false;
    }
}

void GuidingConfig::validate(std::size_t layers) const {
    require(alpha >= 0.0 && std::isfinite(alpha), "GuidingConfig: alpha must be >= 0");
    require(beta >= 0.0 && std::isfinite(beta), "GuidingConfig: beta must be >= 0");
    require(tau > 0.0 && std::isfinite(tau), "GuidingConfig: tau must be > 0");
    require(pattern_weight >= 0.0 && std::isfinite(pattern_weight),
            "GuidingConfig: pattern_weight must be >= 0");
    require(layer_mask.size() == layers, "GuidingConfig: layer_mask length must equal layers");
    if (guide_kind != GuideKind::none) {
        require(count_unmasked(layer_mask) > 0,
                "GuidingConfig: at least one layer must be selected while guiding");
    }
}

std::vector<double> reduce_attention_map(const Matrix& attn,
                                         const std::vector<std::uint8_t>& pad_mask) {
    require(attn.rows() == attn.cols(), "reduce_attention_map: map must be square");
    require(pad_mask.size() == attn.rows(), "reduce_attention_map: mask length mismatch");
    const std::size_t L = attn.rows();
    std::vector<double> m(L, 0.0);
    for (std::size_t r = 0; r < L; ++r) {
        if (!pad_mask[r]) continue;
        const double* row = attn.row(r);
        for (std::size_t t = 0; t < L; ++t) m[t] += row[t];
    }
    return m;
}

AttentionMatrix build_attention_matrix(const AttentionTensor& attn,
                                       const std::vector<std::uint8_t>& layer_mask,
                                       const std::vector<std::uint8_t>& pad_mask) {
    require(layer_mask.size() == attn.layers,
            "build_attention_matrix: layer_mask length mismatch");
    require(count_unmasked(layer_mask) > 0, "build_attention_matrix: no layers selected");

    AttentionMatrix out;
    const std::size_t rows = count_unmasked(layer_mask) * attn.heads;
    out.m.resize(rows, attn.seq_len);
    out.provenance.reserve(rows);
    out.norms.reserve(rows);
    std::size_t idx = 0;
    for (std::size_t l = 0; l < attn.layers; ++l) {
        if (!layer_mask[l]) continue;
        for (std::size_t h = 0; h < attn.heads; ++h) {
            const std::vector<double> raw = reduce_attention_map(attn.map(l, h), pad_mask);
            double norm_sq = 0.0;
            for (double v : raw) norm_sq += v * v;
            const double norm = std::sqrt(norm_sq);
            if (!(norm > 0.0) || !std::isfinite(norm)) {
                throw numerical_error("build_attention_matrix: reduced row for layer " +
                                      std::to_string(l) + " head " + std::to_string(h) +
                                      " has zero or non-finite norm");
            }
            double* dst = out.m.row(idx);
            for (std::size_t t = 0; t < raw.size(); ++t) dst[t] = raw[t] / norm;
            out.provenance.emplace_back(l, h);
            out.norms.push_back(norm);
            ++idx;
        }
    }
    return out;
}

void attention_matrix_backward(const AttentionMatrix& am, const Matrix& d_m,
                               const std::vector<std::uint8_t>& pad_mask, std::size_t heads,
                               std::vector<Matrix>& d_attn) {
    require(d_m.same_shape(am.m), "attention_matrix_backward: gradient shape mismatch");
    require(pad_mask.size() == am.m.cols(), "attention_matrix_backward: mask length mismatch");
    const std::size_t L = am.m.cols();
    std::vector<double> d_raw(L);
    for (std::size_t i = 0; i < am.m.rows(); ++i) {
        const double* m = am.m.row(i);
        const double* dm = d_m.row(i);
        double inner = 0.0;
        for (std::size_t t = 0; t < L; ++t) inner += m[t] * dm[t];
        const double inv_norm = 1.0 / am.norms[i];
        for (std::size_t t = 0; t < L; ++t) d_raw[t] = (dm[t] - inner * m[t]) * inv_norm;

        const auto [layer, head] = am.provenance[i];
        Matrix& slot = d_attn.at(layer * heads + head);
        if (slot.empty()) slot.resize(L, L);
        require(slot.rows() == L && slot.cols() == L,
                "attention_matrix_backward: d_attn slot shape mismatch");
        for (std::size_t r = 0; r < L; ++r) {
            if (!pad_mask[r]) continue;
            double* dst = slot.row(r);
            for (std::size_t t = 0; t < L; ++t) dst[t] += d_raw[t];
        }
    }
}

LossWithGrad mdg_loss(const Matrix& m, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("mdg_loss: tau must be > 0");
    }
    const std::size_t n = m.rows();
    require(n > 0, "mdg_loss: empty matrix");

    Matrix sim;
    matmul_nt(sim, m, m);

    // d(loss)/d(sim[j][i]) = (P[j][i] - delta_ji) / tau with P the column
    // softmax of sim / tau; the gradient w.r.t. m is (D + D^T) m.
    Matrix d_sim(n, n);
    std::vector<double> column(n);
    LossWithGrad out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) column[j] = sim(j, i) / tau;
        const double lse = log_sum_exp(column.data(), n);
        out.value += lse - column[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double p = std::exp(column[j] - lse);
            d_sim(j, i) = (p - (j == i ? 1.0 : 0.0)) / tau;
        }
    }
    Matrix sym(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) sym(a, b) = d_sim(a, b) + d_sim(b, a);
    matmul(out.d_m, sym, m);
    return out;
}

namespace {

LossWithGrad pdg_loss_impl(const Matrix& m, const std::vector<std::uint8_t>* pad_mask) {
    const std::size_t L = m.cols();
    Matrix gram;
    matmul_tn(gram, m, m);
    for (std::size_t t = 0; t < L; ++t) {
        const bool on_target = pad_mask == nullptr || (*pad_mask)[t];
        if (on_target) gram(t, t) -= 1.0;
    }
    LossWithGrad out;
    out.value = frobenius_norm_sq(gram);
    matmul(out.d_m, m, gram);
    scale_inplace(out.d_m, 4.0);
    return out;
}

}  // namespace

LossWithGrad pdg_loss(const Matrix& m) { return pdg_loss_impl(m, nullptr); }

LossWithGrad pdg_loss_masked(const Matrix& m, const std::vector<std::uint8_t>& pad_mask) {
    require(pad_mask.size() == m.cols(), "pdg_loss_masked: mask length mismatch");
    return pdg_loss_impl(m, &pad_mask);
}

double total_loss(double task, double mdg, double pdg, double alpha, double beta) {
    return task + alpha * mdg + beta * pdg;
}

PriorAttentionTarget fixed_pattern_target(GuideKind kind, const std::vector<int>& ids,
                                          const std::vector<std::size_t>& delimiter_positions,
                                          int period_token_id,
                                          const std::vector<std::uint8_t>& pad_mask) {
    require(ids.size() == pad_mask.size(), "fixed_pattern_target: mask length mismatch");
    const std::size_t L = ids.size();
    require(L > 0, "fixed_pattern_target: empty sequence");
    const std::size_t unmasked = count_unmasked(pad_mask);
    require(unmasked > 0, "fixed_pattern_target: all positions masked");

    PriorAttentionTarget out;
    out.source = to_string(kind);
    out.target.resize(L, L);
    Matrix& t = out.target;

    const auto fill_uniform_row = [&](std::size_t r) {
        const double w = 1.0 / static_cast<double>(unmasked);
        for (std::size_t c = 0; c < L; ++c) t(r, c) = pad_mask[c] ? w : 0.0;
    };

    switch (kind) {
        case GuideKind::first:
            for (std::size_t r = 0; r < L; ++r) t(r, 0) = 1.0;
            break;
        case GuideKind::next:
            for (std::size_t r = 0; r < L; ++r) {
                if (!pad_mask[r]) {
                    fill_uniform_row(r);
                } else if (r + 1 < L && pad_mask[r + 1]) {
                    t(r, r + 1) = 1.0;
                } else {
                    t(r, r) = 1.0;
                }
            }
            break;
        case GuideKind::prev:
            for (std::size_t r = 0; r < L; ++r) {
                if (!pad_mask[r]) {
                    fill_uniform_row(r);
                } else if (r >= 1 && pad_mask[r - 1]) {
                    t(r, r - 1) = 1.0;
                } else {
                    t(r, r) = 1.0;
                }
            }
            break;
        case GuideKind::delim: {
            require(!delimiter_positions.empty(),
                    "fixed_pattern_target: delim pattern needs delimiter positions");
            const double w = 1.0 / static_cast<double>(delimiter_positions.size());
            for (std::size_t p : delimiter_positions) {
                require(p < L && pad_mask[p] != 0,
                        "fixed_pattern_target: delimiter position out of range or masked");
            }
            for (std::size_t r = 0; r < L; ++r)
                for (std::size_t p : delimiter_positions) t(r, p) = w;
            break;
        }
        case GuideKind::period: {
            std::vector<std::size_t> periods;
            for (std::size_t c = 0; c < L; ++c) {
                if (pad_mask[c] && ids[c] == period_token_id) periods.push_back(c);
            }
            if (periods.empty()) periods.push_back(0);
            const double w = 1.0 / static_cast<double>(periods.size());
            for (std::size_t r = 0; r < L; ++r)
                for (std::size_t p : periods) t(r, p) = w;
            break;
        }
        default:
            throw std::invalid_argument("fixed_pattern_target: kind is not a fixed pattern");
    }
    return out;
}

PatternLoss pattern_guiding_loss(const AttentionTensor& attn, const PriorAttentionTarget& target,
                                 const std::vector<std::uint8_t>& layer_mask,
                                 const std::vector<std::uint8_t>& pad_mask) {
    require(layer_mask.size() == attn.layers, "pattern_guiding_loss: layer_mask length mismatch");
    require(pad_mask.size() == attn.seq_len, "pattern_guiding_loss: pad_mask length mismatch");
    const std::size_t L = attn.seq_len;
    require(target.target.rows() == L && target.target.cols() == L,
            "pattern_guiding_loss: target shape mismatch");
    for (std::size_t r = 0; r < L; ++r) {
        const double* row = target.target.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < L; ++c) {
            require(row[c] >= 0.0, "pattern_guiding_loss: negative target entry");
            sum += row[c];
        }
        require(std::abs(sum - 1.0) <= 1e-6, "pattern_guiding_loss: target row does not sum to 1");
    }

    const std::size_t selected_layers = count_unmasked(layer_mask);
    require(selected_layers > 0, "pattern_guiding_loss: no layers selected");
    const std::size_t unmasked_rows = count_unmasked(pad_mask);
    require(unmasked_rows > 0, "pattern_guiding_loss: all rows masked");
    const double inv_count =
        1.0 / static_cast<double>(selected_layers * attn.heads * unmasked_rows);

    PatternLoss out;
    out.d_attn.assign(attn.layers * attn.heads, Matrix());
    for (std::size_t l = 0; l < attn.layers; ++l) {
        if (!layer_mask[l]) continue;
        for (std::size_t h = 0; h < attn.heads; ++h) {
            const Matrix& a = attn.map(l, h);
            Matrix& grad = out.d_attn[l * attn.heads + h];
            grad.resize(L, L);
            for (std::size_t r = 0; r < L; ++r) {
                if (!pad_mask[r]) continue;
                const double* trow = target.target.row(r);
                const double* arow = a.row(r);
                double* grow = grad.row(r);
                for (std::size_t c = 0; c < L; ++c) {
                    if (trow[c] <= 0.0) continue;
                    const double ac = std::max(arow[c], kAttnFloor);
                    out.value += trow[c] * (std::log(trow[c]) - std::log(ac)) * inv_count;
                    grow[c] = -trow[c] / ac * inv_count;
                }
            }
        }
    }
    return out;
}

std::uint64_t PmiTable::key(int x, int y) {
    const auto lo = static_cast<std::uint64_t>(std::min(x, y));
    const auto hi = static_cast<std::uint64_t>(std::max(x, y));
    return (lo << 32) | hi;
}

double PmiTable::score(int x, int y) const {
    const auto it = scores_.find(key(x, y));
    return it == scores_.end() ? 0.0 : it->second;
}

void PmiTable::set(int x, int y, double value) { scores_[key(x, y)] = value; }

PmiTable compute_pmi_table(const std::vector<std::vector<int>>& corpus, std::size_t window) {
    require(!corpus.empty(), "compute_pmi_table: empty corpus");
    require(window >= 1, "compute_pmi_table: window must be >= 1");

    // Each within-window pair is one co-occurrence event in each direction,
    // so the pair table is symmetric and marginals are its row sums.
    std::unordered_map<std::uint64_t, double> pair_count;
    std::unordered_map<int, double> marginal;
    double events = 0.0;
    for (const auto& seq : corpus) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            require(seq[i] >= 0, "compute_pmi_table: negative token id");
            for (std::size_t d = 1; d <= window && i + d < seq.size(); ++d) {
                const int x = seq[i];
                const int y = seq[i + d];
                const auto lo = static_cast<std::uint64_t>(std::min(x, y));
                const auto hi = static_cast<std::uint64_t>(std::max(x, y));
                pair_count[(lo << 32) | hi] += 2.0;
                marginal[x] += 1.0;
                marginal[y] += 1.0;
                events += 2.0;
            }
        }
    }

    PmiTable table;
    if (events == 0.0) return table;
    for (const auto& [key, count] : pair_count) {
        const int x = static_cast<int>(key >> 32);
        const int y = static_cast<int>(key & 0xffffffffULL);
        // Ordered count of (x, y): the symmetric cell holds both directions.
        const double ordered = (x == y) ? count : count / 2.0;
        const double pmi = std::log(ordered * events / (marginal[x] * marginal[y]));
        if (pmi > 0.0) table.set(x, y, pmi);
    }
    return table;
}

PriorAttentionTarget pmi_target(const std::vector<int>& ids, const PmiTable& table,
                                const std::vector<std::uint8_t>& pad_mask) {
    require(ids.size() == pad_mask.size(), "pmi_target: mask length mismatch");
    const std::size_t L = ids.size();
    Matrix raw(L, L);
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < L; ++c) raw(r, c) = table.score(ids[r], ids[c]);
    return finalize_prior_target(raw, pad_mask, "pmi");
}

PriorAttentionTarget finalize_prior_target(const Matrix& raw,
                                           const std::vector<std::uint8_t>& pad_mask,
                                           std::string source) {
    require(raw.rows() == raw.cols(), "finalize_prior_target: matrix must be square");
    require(pad_mask.size() == raw.rows(), "finalize_prior_target: mask length mismatch");
    const std::size_t L = raw.rows();
    const std::size_t unmasked = count_unmasked(pad_mask);
    require(unmasked > 0, "finalize_prior_target: all positions masked");

    PriorAttentionTarget out;
    out.source = std::move(source);
    out.target.resize(L, L);
    for (std::size_t r = 0; r < L; ++r) {
        const double* src = raw.row(r);
        double* dst = out.target.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < L; ++c) {
            require(src[c] >= 0.0, "finalize_prior_target: negative weight");
            if (pad_mask[c]) sum += src[c];
        }
        if (sum > 0.0) {
            for (std::size_t c = 0; c < L; ++c) dst[c] = pad_mask[c] ? src[c] / sum : 0.0;
        } else {
            const double w = 1.0 / static_cast<double>(unmasked);
            for (std::size_t c = 0; c < L; ++c) dst[c] = pad_mask[c] ? w : 0.0;
        }
    }
    return out;
}

std::map<std::size_t, Matrix> load_prior_targets(const std::string& path, std::size_t seq_len) {
    std::ifstream in(path);
    if (!in) throw io_error("load_prior_targets: cannot open '" + path + "'");

    const auto fail = [&](std::size_t line_no, const std::string& what) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    std::map<std::size_t, Matrix> targets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto last = line.find_last_not_of(" \t\r\n");
        if (last == std::string::npos) continue;
        line.erase(last + 1);

        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 4) {
            fail(line_no, "expected 4 tab-separated fields, got " +
                              std::to_string(fields.size()));
        }

        std::size_t example = 0, row = 0, col = 0;
        double weight = 0.0;
        try {
            std::size_t used = 0;
            example = std::stoull(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing characters");
            row = std::stoull(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing characters");
            col = std::stoull(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
            weight = std::stod(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(line_no, "malformed field in '" + line + "'");
        }
        if (row >= seq_len || col >= seq_len) {
            fail(line_no, "index out of range for sequence length " + std::to_string(seq_len));
        }
        if (!(weight >= 0.0) || !std::isfinite(weight)) {
            fail(line_no, "weight must be a finite non-negative number");
        }

        auto [it, inserted] = targets.try_emplace(example);
        if (inserted) it->second.resize(seq_len, seq_len);
        it->second(row, col) += weight;
    }

    for (auto& [example, m] : targets) {
        for (std::size_t r = 0; r < seq_len; ++r) {
            double* row = m.row(r);
            double sum = 0.0;
            for (std::size_t c = 0; c < seq_len; ++c) sum += row[c];
            if (sum > 0.0) {
                for (std::size_t c = 0; c < seq_len; ++c) row[c] /= sum;
            }
        }
    }
    return targets;
}

void write_prior_targets(const std::string& path,
                         const std::map<std::size_t, Matrix>& targets) {
    std::ofstream out(path);
    if (!out) throw io_error("write_prior_targets: cannot open '" + path + "' for writing");
    out << "# example_id\trow\tcol\tweight\n";
    for (const auto& [example, m] : targets) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double* row = m.row(r);
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (row[c] > 0.0) {
                    out << example << '\t' << r << '\t' << c << '\t' << format_weight(row[c])
                        << '\n';
                }
            }
        }
    }
    if (!out) throw io_error("write_prior_targets: write failed for '" + path + "'");
}

}  // namespace ag

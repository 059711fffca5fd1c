#include "ag/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ag/errors.hpp"
#include "ag/pca.hpp"

namespace ag {

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

double head_diversity(const Matrix& m) {
    if (m.rows() < 2) throw std::invalid_argument("head_diversity: need at least 2 rows");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.rows(); ++j) {
            sum += dot(m.row(i), m.row(j), m.cols());
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double decorrelation_score(const Matrix& m) { return pdg_loss(m).value; }

void export_heatmap(const AttentionTensor& attn, const std::vector<std::string>& tokens,
                    const std::string& path) {
    if (attn.maps.empty()) throw std::invalid_argument("export_heatmap: no attention maps");
    const std::size_t L = attn.seq_len;
    if (tokens.size() != L) throw std::invalid_argument("export_heatmap: token count != seq_len");

    Matrix mean(L, L);
    for (const Matrix& map : attn.maps) add_inplace(mean, map);
    scale_inplace(mean, 1.0 / static_cast<double>(attn.maps.size()));

    std::ofstream out(path);
    if (!out) throw io_error("export_heatmap: cannot open '" + path + "' for writing");
    for (std::size_t t = 0; t < L; ++t) {
        if (t > 0) out << ',';
        out << csv_escape(tokens[t]);
    }
    out << '\n';
    for (std::size_t r = 0; r < L; ++r) {
        const double* row = mean.row(r);
        for (std::size_t c = 0; c < L; ++c) {
            if (c > 0) out << ',';
            out << format_value(row[c]);
        }
        out << '\n';
    }
    if (!out) throw io_error("export_heatmap: write failed for '" + path + "'");
}

void pca_heads(const std::vector<AttentionMatrix>& samples, const std::string& path) {
    if (samples.empty()) throw std::invalid_argument("pca_heads: no samples");
    std::size_t total_rows = 0;
    for (const AttentionMatrix& am : samples) total_rows += am.m.rows();
    if (total_rows < 2) throw std::invalid_argument("pca_heads: need at least 2 head rows");

    const std::size_t L = samples.front().m.cols();
    Matrix stacked(total_rows, L);
    std::size_t row = 0;
    for (const AttentionMatrix& am : samples) {
        if (am.m.cols() != L) throw std::invalid_argument("pca_heads: inconsistent row width");
        for (std::size_t i = 0; i < am.m.rows(); ++i, ++row) {
            double* dst = stacked.row(row);
            const double* src = am.m.row(i);
            for (std::size_t c = 0; c < L; ++c) dst[c] = src[c];
        }
    }

    const PcaResult pca = pca_fit_transform(stacked, 2);

    std::ofstream out(path);
    if (!out) throw io_error("pca_heads: cannot open '" + path + "' for writing");
    out << "sample_id,layer,head,x,y\n";
    row = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const AttentionMatrix& am = samples[s];
        for (std::size_t i = 0; i < am.m.rows(); ++i, ++row) {
            out << s << ',' << am.provenance[i].first << ',' << am.provenance[i].second << ','
                << format_value(pca.projections(row, 0)) << ','
                << format_value(pca.projections(row, 1)) << '\n';
        }
    }
    if (!out) throw io_error("pca_heads: write failed for '" + path + "'");
}

}  // namespace ag

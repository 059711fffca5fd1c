#pragma once

// Shared fixtures for the test binaries: tiny architectures, hand-rolled
// batches with varied padding, and a finite-difference certifier that sweeps
// every parameter entry of the full training objective.

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "ag/data.hpp"
#include "ag/encoder.hpp"
#include "ag/gradcheck.hpp"
#include "ag/guiding.hpp"
#include "ag/objective.hpp"
#include "ag/rng.hpp"

namespace agtest {

inline ag::ArchitectureConfig tiny_arch(std::size_t seq_len = 4, std::size_t layers = 1,
                                        std::size_t heads = 2, std::size_t d_model = 8,
                                        std::size_t classes = 3,
                                        std::size_t vocab_size = 12) {
    ag::ArchitectureConfig arch;
    arch.layers = layers;
    arch.heads = heads;
    arch.d_model = d_model;
    arch.d_k = d_model / heads;
    arch.seq_len = seq_len;
    arch.ffn_hidden = 2 * d_model;
    arch.classes = classes;
    arch.vocab_size = vocab_size;
    return arch;
}

// Examples with distinct padding lengths; ids stay clear of the reserved
// range so they are plain content tokens.
inline std::vector<ag::Example> tiny_batch(const ag::ArchitectureConfig& arch, std::size_t n,
                                           ag::Rng& rng) {
    std::vector<ag::Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ag::Example e;
        e.example_id = i;
        e.group_id = i / 2;
        e.label = static_cast<int>(i % arch.classes);
        const std::size_t unmasked =
            1 + rng.below(arch.seq_len);  // at least position 0 stays unmasked
        e.ids.assign(arch.seq_len, 0);
        e.mask.assign(arch.seq_len, 0);
        for (std::size_t t = 0; t < arch.seq_len; ++t) {
            if (t < unmasked) {
                e.ids[t] = static_cast<int>(rng.below(arch.vocab_size));
                e.mask[t] = 1;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<const ag::Example*> batch_view(const std::vector<ag::Example>& examples) {
    std::vector<const ag::Example*> view;
    view.reserve(examples.size());
    for (const ag::Example& e : examples) view.push_back(&e);
    return view;
}

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t entries = 0;
};

// Certifies the analytic gradient of the full batch objective against
// central finite differences, sweeping every entry of every tensor.
inline FdReport certify_gradients(ag::ModelParameters& params,
                                  const std::vector<const ag::Example*>& batch,
                                  ag::TaskKind task, const ag::GuidingConfig& guiding,
                                  const ag::GuideResources& resources, double h = 1e-5) {
    ag::BatchWorkspace workspace;
    ag::ModelParameters grads = ag::ModelParameters::zeros(params.arch);
    ag::batch_total_loss(params, batch, task, guiding, resources, workspace, &grads);

    const auto value = [&] {
        return ag::batch_total_loss(params, batch, task, guiding, resources, workspace,
                                    nullptr)
            .total;
    };

    FdReport report;
    const std::vector<ag::Matrix*> tensors = params.tensors();
    const std::vector<const ag::Matrix*> grad_tensors =
        std::as_const(grads).tensors();
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
            double& x = tensors[t]->data()[i];
            const double saved = x;
            x = saved + h;
            const double up = value();
            x = saved - h;
            const double down = value();
            x = saved;
            const double fd = (up - down) / (2.0 * h);
            const double err = ag::relative_error(fd, grad_tensors[t]->data()[i]);
            report.max_rel_err = std::max(report.max_rel_err, err);
            ++report.entries;
        }
    }
    return report;
}

}  // namespace agtest

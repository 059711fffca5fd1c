#pragma once

#include <string>
#include <vector>

#include "ag/encoder.hpp"

namespace ag {

struct Checkpoint {
    ModelParameters params;
    std::vector<std::string> vocab_tokens;  // id-ordered, reserved tokens first
};

// Binary container: 8-byte magic "AGCKPT01", little-endian u64 header length,
// a JSON header carrying the architecture and vocabulary, then every tensor
// as raw little-endian doubles in ModelParameters::tensors() order.
void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const std::vector<std::string>& vocab_tokens);

// Throws parse_error on a bad magic, version, or truncated/oversized payload,
// io_error when the file cannot be read, numerical_error on non-finite
// tensor values.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ag

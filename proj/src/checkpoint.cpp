#include "ag/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "ag/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace ag {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'C', 'K', 'P', 'T', '0', '1'};

nlohmann::ordered_json arch_to_json(const ArchitectureConfig& arch) {
    return {
        {"layers", arch.layers},     {"heads", arch.heads},
        {"d_model", arch.d_model},   {"d_k", arch.d_k},
        {"seq_len", arch.seq_len},   {"ffn_hidden", arch.ffn_hidden},
        {"classes", arch.classes},   {"vocab_size", arch.vocab_size},
    };
}

ArchitectureConfig arch_from_json(const nlohmann::json& j) {
    ArchitectureConfig arch;
    arch.layers = j.at("layers").get<std::size_t>();
    arch.heads = j.at("heads").get<std::size_t>();
    arch.d_model = j.at("d_model").get<std::size_t>();
    arch.d_k = j.at("d_k").get<std::size_t>();
    arch.seq_len = j.at("seq_len").get<std::size_t>();
    arch.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
    arch.classes = j.at("classes").get<std::size_t>();
    arch.vocab_size = j.at("vocab_size").get<std::size_t>();
    return arch;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const std::vector<std::string>& vocab_tokens) {
    if (vocab_tokens.size() != params.arch.vocab_size) {
        throw std::invalid_argument("save_checkpoint: vocabulary size mismatch");
    }
    nlohmann::ordered_json header = arch_to_json(params.arch);
    header["vocab"] = vocab_tokens;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const Matrix* tensor : params.tensors()) {
        out.write(reinterpret_cast<const char*>(tensor->data()),
                  static_cast<std::streamsize>(tensor->size() * sizeof(double)));
    }
    if (!out) throw io_error("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_checkpoint: cannot open '" + path + "'");

    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw parse_error("load_checkpoint: '" + path +
                          "' is not a recognized checkpoint (bad magic or version)");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    if (!in || header_len > (1u << 30)) {
        throw parse_error("load_checkpoint: corrupt header length in '" + path + "'");
    }
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw parse_error("load_checkpoint: truncated header in '" + path + "'");

    Checkpoint ckpt;
    try {
        const nlohmann::json header = nlohmann::json::parse(header_text);
        ckpt.params = ModelParameters::zeros(arch_from_json(header));
        ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("load_checkpoint: bad header in '" + path + "': " + e.what());
    }
    if (ckpt.vocab_tokens.size() != ckpt.params.arch.vocab_size) {
        throw parse_error("load_checkpoint: header vocabulary size disagrees with vocab_size");
    }

    for (Matrix* tensor : ckpt.params.tensors()) {
        in.read(reinterpret_cast<char*>(tensor->data()),
                static_cast<std::streamsize>(tensor->size() * sizeof(double)));
        if (!in) throw parse_error("load_checkpoint: truncated tensor data in '" + path + "'");
        if (!tensor->all_finite()) {
            throw numerical_error("load_checkpoint: non-finite tensor values in '" + path + "'");
        }
    }
    in.peek();
    if (!in.eof()) {
        throw parse_error("load_checkpoint: trailing bytes after tensors in '" + path + "'");
    }
    return ckpt;
}

}  // namespace ag

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ag/rng.hpp"

namespace ag {

inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kSepId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kPeriodId = 4;
inline constexpr std::size_t kReservedIds = 5;

enum class TaskKind { nli, ranking };

TaskKind parse_task_kind(const std::string& name);  // unknown -> parse_error
std::string to_string(TaskKind task);

/// Token/id bijection with ids 0..4 reserved for [PAD], [CLS], [SEP], [UNK],
/// and '.'. Lookups of unknown tokens map to [UNK].
class Vocabulary {
public:
    Vocabulary();

    int add(const std::string& token);  // returns the existing id when present
    int id_of(const std::string& token) const;
    const std::string& token_of(std::size_t id) const;
    std::size_t size() const { return tokens_; }
    const std::vector<std::string>& id_to_token() const { return id_to_token_; }

private:
    std::size_t tokens_ = 0;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

struct Example {
    std::vector<int> ids;            // length L
    std::vector<std::uint8_t> mask;  // 1 marks a real token, 0 a [PAD] slot
    int label = 0;                   // class index, or binary relevance for ranking
    std::size_t example_id = 0;
    std::size_t group_id = 0;        // claim id; meaningful for the ranking task only
};

// Throws invalid_argument when sizes, id ranges, or the mask/[PAD]
// correspondence are violated.
void validate_example(const Example& example, std::size_t vocab_size, std::size_t seq_len);

// Lowercased whitespace tokenization.
std::vector<std::string> tokenize_text(const std::string& text);

// Frequency-descending, ties lexicographic, ids assigned from 5 upward.
// Tokens equal to a reserved token keep the reserved id.
Vocabulary build_vocab(const std::vector<std::string>& corpus);

// Vocabulary for generated data: reserved tokens plus w5, w6, ... w{V-1}.
Vocabulary synthetic_vocabulary(std::size_t vocab_size);

// [CLS] p1..pm [SEP] h1..hn [SEP] [PAD]...; when the pair exceeds the budget
// the longer side loses tokens from its tail first (ties trim the premise).
std::pair<std::vector<int>, std::vector<std::uint8_t>> tokenize_pair(const std::string& premise,
                                                                     const std::string& hypothesis,
                                                                     const Vocabulary& vocab,
                                                                     std::size_t seq_len);

struct RawPair {
    std::string first;   // premise, or claim text
    std::string second;  // hypothesis, or candidate text
    int label = 0;
    std::size_t group_id = 0;
};

// NLI lines: "label<TAB>premise<TAB>hypothesis" with labels entailment /
// contradiction / neutral -> 0 / 1 / 2. Ranking lines:
// "claim_id<TAB>relevance<TAB>claim<TAB>candidate" with relevance in {0, 1}.
std::vector<RawPair> read_tsv_rows(const std::string& path, TaskKind task);

std::vector<Example> examples_from_rows(const std::vector<RawPair>& rows,
                                        const Vocabulary& vocab, std::size_t seq_len);

std::vector<Example> load_tsv_pairs(const std::string& path, const Vocabulary& vocab,
                                    std::size_t seq_len, TaskKind task);

// Reconstructs a vocabulary from an id-ordered token list (as stored in
// checkpoints); the first five entries must be the reserved tokens.
Vocabulary vocabulary_from_tokens(const std::vector<std::string>& tokens);

// Writes examples back out in the TSV format of read_tsv_rows, rendering
// ids through the vocabulary.
void write_examples_tsv(const std::string& path, const std::vector<Example>& examples,
                        const Vocabulary& vocab, TaskKind task);

// Class-balanced three-way task over a synthetic vocabulary. Entailment:
// the hypothesis is a contiguous subspan of the premise. Contradiction: that
// subspan with one token swapped for one from a disjoint "antonym" id block.
// Neutral: an unrelated sequence. Labels are 0/1/2 in that order.
std::vector<Example> generate_synthetic_nli(std::size_t n, std::size_t vocab_size,
                                            std::size_t seq_len, std::uint64_t seed);

// Grouped claim/candidate pairs: per claim exactly one positive candidate
// sharing most of the claim's tokens and candidates_per_claim - 1 negatives
// sharing none.
std::vector<Example> generate_synthetic_ranking(std::size_t n_claims,
                                                std::size_t candidates_per_claim,
                                                std::size_t vocab_size, std::size_t seq_len,
                                                std::uint64_t seed);

// Uniform sample without replacement of round(fraction * n) examples,
// keeping per-label counts as close to proportional as parity allows.
// Output preserves the input's relative order.
std::vector<Example> subsample(const std::vector<Example>& examples, double fraction,
                               std::uint64_t seed);

}  // namespace ag

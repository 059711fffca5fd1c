#include "ag/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ag/errors.hpp"

namespace ag {

namespace {

const char* const kReservedTokens[kReservedIds] = {"[PAD]", "[CLS]", "[SEP]", "[UNK]", "."};

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

// Id blocks for the generators: most of the non-reserved range carries
// ordinary tokens, the tail is the "antonym" block contradictions draw from.
struct IdBlocks {
    int general_begin, general_end;  // [begin, end)
    int antonym_begin, antonym_end;
};

IdBlocks split_id_blocks(std::size_t vocab_size) {
    require(vocab_size >= 20, "synthetic generator: vocab_size must be >= 20");
    const int first = static_cast<int>(kReservedIds);
    const int total = static_cast<int>(vocab_size) - first;
    const int general = (total * 4) / 5;
    return {first, first + general, first + general, static_cast<int>(vocab_size)};
}

int draw_from(Rng& rng, int begin, int end) {
    return begin + static_cast<int>(rng.below(static_cast<std::uint64_t>(end - begin)));
}

Example make_pair_example(const std::vector<int>& first, const std::vector<int>& second,
                          std::size_t seq_len) {
    Example e;
    e.ids.assign(seq_len, kPadId);
    e.mask.assign(seq_len, 0);
    std::size_t pos = 0;
    const auto push = [&](int id) {
        e.ids[pos] = id;
        e.mask[pos] = 1;
        ++pos;
    };
    push(kClsId);
    for (int id : first) push(id);
    push(kSepId);
    for (int id : second) push(id);
    push(kSepId);
    return e;
}

}  // namespace

TaskKind parse_task_kind(const std::string& name) {
    if (name == "nli") return TaskKind::nli;
    if (name == "ranking") return TaskKind::ranking;
    throw parse_error("unknown task '" + name + "'");
}

std::string to_string(TaskKind task) {
    return task == TaskKind::nli ? "nli" : "ranking";
}

Vocabulary::Vocabulary() {
    for (const char* token : kReservedTokens) add(token);
}

int Vocabulary::add(const std::string& token) {
    const auto [it, inserted] = token_to_id_.try_emplace(token, static_cast<int>(tokens_));
    if (inserted) {
        id_to_token_.push_back(token);
        ++tokens_;
    }
    return it->second;
}

int Vocabulary::id_of(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
    if (id >= tokens_) throw std::invalid_argument("Vocabulary: id out of range");
    return id_to_token_[id];
}

void validate_example(const Example& example, std::size_t vocab_size, std::size_t seq_len) {
    require(example.ids.size() == seq_len, "Example: id count != seq_len");
    require(example.mask.size() == seq_len, "Example: mask length != seq_len");
    require(example.mask[0] != 0, "Example: position 0 must be a real token");
    for (std::size_t t = 0; t < seq_len; ++t) {
        require(example.ids[t] >= 0 && static_cast<std::size_t>(example.ids[t]) < vocab_size,
                "Example: token id out of vocabulary range");
        require((example.mask[t] == 0) == (example.ids[t] == kPadId),
                "Example: mask must mark exactly the [PAD] positions");
        if (t > 0) {
            require(example.mask[t] <= example.mask[t - 1],
                    "Example: padding must be a suffix");
        }
    }
}

std::vector<std::string> tokenize_text(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus) {
    require(!corpus.empty(), "build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const std::string& text : corpus) {
        for (std::string& token : tokenize_text(text)) counts[std::move(token)] += 1;
    }

    Vocabulary vocab;
    std::vector<std::pair<std::string, std::size_t>> entries;
    entries.reserve(counts.size());
    for (const auto& [token, count] : counts) {
        if (vocab.id_of(token) == kUnkId && token != kReservedTokens[kUnkId]) {
            entries.emplace_back(token, count);
        }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [token, count] : entries) vocab.add(token);
    return vocab;
}

Vocabulary synthetic_vocabulary(std::size_t vocab_size) {
    require(vocab_size >= kReservedIds, "synthetic_vocabulary: vocab_size below reserved ids");
    Vocabulary vocab;
    for (std::size_t id = kReservedIds; id < vocab_size; ++id) {
        vocab.add("w" + std::to_string(id));
    }
    return vocab;
}

std::pair<std::vector<int>, std::vector<std::uint8_t>> tokenize_pair(const std::string& premise,
                                                                     const std::string& hypothesis,
                                                                     const Vocabulary& vocab,
                                                                     std::size_t seq_len) {
    require(seq_len >= 4, "tokenize_pair: seq_len must be >= 4");
    std::vector<std::string> p = tokenize_text(premise);
    std::vector<std::string> h = tokenize_text(hypothesis);
    const std::size_t budget = seq_len - 3;  // [CLS] and two [SEP]
    while (p.size() + h.size() > budget) {
        if (p.size() >= h.size()) {
            p.pop_back();
        } else {
            h.pop_back();
        }
    }

    std::vector<int> first, second;
    first.reserve(p.size());
    second.reserve(h.size());
    for (const std::string& token : p) first.push_back(vocab.id_of(token));
    for (const std::string& token : h) second.push_back(vocab.id_of(token));
    Example e = make_pair_example(first, second, seq_len);
    return {std::move(e.ids), std::move(e.mask)};
}

std::vector<RawPair> read_tsv_rows(const std::string& path, TaskKind task) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");

    const auto fail = [&](std::size_t line_no, const std::string& what) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    std::vector<RawPair> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_tabs(line);
        RawPair row;
        if (task == TaskKind::nli) {
            if (fields.size() != 3) {
                fail(line_no, "expected 3 tab-separated fields, got " +
                                  std::to_string(fields.size()));
            }
            if (fields[0] == "entailment") {
                row.label = 0;
            } else if (fields[0] == "contradiction") {
                row.label = 1;
            } else if (fields[0] == "neutral") {
                row.label = 2;
            } else {
                fail(line_no, "unknown label '" + fields[0] + "'");
            }
            row.first = fields[1];
            row.second = fields[2];
        } else {
            if (fields.size() != 4) {
                fail(line_no, "expected 4 tab-separated fields, got " +
                                  std::to_string(fields.size()));
            }
            try {
                std::size_t used = 0;
                row.group_id = std::stoull(fields[0], &used);
                if (used != fields[0].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                fail(line_no, "claim_id '" + fields[0] + "' is not a non-negative integer");
            }
            if (fields[1] == "0") {
                row.label = 0;
            } else if (fields[1] == "1") {
                row.label = 1;
            } else {
                fail(line_no, "relevance '" + fields[1] + "' must be 0 or 1");
            }
            row.first = fields[2];
            row.second = fields[3];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Example> examples_from_rows(const std::vector<RawPair>& rows,
                                        const Vocabulary& vocab, std::size_t seq_len) {
    std::vector<Example> examples;
    examples.reserve(rows.size());
    std::size_t index = 0;
    for (const RawPair& row : rows) {
        Example e;
        std::tie(e.ids, e.mask) = tokenize_pair(row.first, row.second, vocab, seq_len);
        e.label = row.label;
        e.example_id = index++;
        e.group_id = row.group_id;
        examples.push_back(std::move(e));
    }
    return examples;
}

std::vector<Example> load_tsv_pairs(const std::string& path, const Vocabulary& vocab,
                                    std::size_t seq_len, TaskKind task) {
    return examples_from_rows(read_tsv_rows(path, task), vocab, seq_len);
}

Vocabulary vocabulary_from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < kReservedIds) {
        throw parse_error("vocabulary list is shorter than the reserved id range");
    }
    for (std::size_t id = 0; id < kReservedIds; ++id) {
        if (tokens[id] != kReservedTokens[id]) {
            throw parse_error("vocabulary list does not start with the reserved tokens");
        }
    }
    Vocabulary vocab;
    for (std::size_t id = kReservedIds; id < tokens.size(); ++id) {
        if (static_cast<std::size_t>(vocab.add(tokens[id])) != id) {
            throw parse_error("vocabulary list contains a duplicate token: " + tokens[id]);
        }
    }
    return vocab;
}

void write_examples_tsv(const std::string& path, const std::vector<Example>& examples,
                        const Vocabulary& vocab, TaskKind task) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing");

    static const char* const kNliLabels[3] = {"entailment", "contradiction", "neutral"};
    for (const Example& e : examples) {
        // Layout is [CLS] first [SEP] second [SEP]; recover the two segments.
        std::string first, second;
        std::string* segment = &first;
        for (std::size_t t = 1; t < e.ids.size() && e.mask[t]; ++t) {
            if (e.ids[t] == kSepId) {
                segment = &second;
                continue;
            }
            if (!segment->empty()) segment->push_back(' ');
            *segment += vocab.token_of(static_cast<std::size_t>(e.ids[t]));
        }
        if (task == TaskKind::nli) {
            require(e.label >= 0 && e.label < 3, "write_examples_tsv: nli label out of range");
            out << kNliLabels[e.label] << '\t' << first << '\t' << second << '\n';
        } else {
            out << e.group_id << '\t' << e.label << '\t' << first << '\t' << second << '\n';
        }
    }
    if (!out) throw io_error("write failed for '" + path + "'");
}

std::vector<Example> generate_synthetic_nli(std::size_t n, std::size_t vocab_size,
                                            std::size_t seq_len, std::uint64_t seed) {
    require(n >= 3, "generate_synthetic_nli: n must be >= 3");
    require(seq_len >= 21, "generate_synthetic_nli: seq_len must be >= 21");
    const IdBlocks blocks = split_id_blocks(vocab_size);

    Rng rng(seed);
    std::vector<Example> examples;
    examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 3);
        const std::size_t m = 6 + rng.below(7);  // premise length in [6, 12]
        std::vector<int> premise(m);
        for (int& id : premise) id = draw_from(rng, blocks.general_begin, blocks.general_end);
        const std::size_t k = 3 + rng.below(4);  // hypothesis length in [3, 6]
        const std::size_t start = rng.below(m - k + 1);

        std::vector<int> hypothesis;
        if (label == 2) {
            hypothesis.resize(k);
            for (int& id : hypothesis) {
                id = draw_from(rng, blocks.general_begin, blocks.general_end);
            }
        } else {
            hypothesis.assign(premise.begin() + start, premise.begin() + start + k);
            if (label == 1) {
                hypothesis[rng.below(k)] =
                    draw_from(rng, blocks.antonym_begin, blocks.antonym_end);
            }
        }

        Example e = make_pair_example(premise, hypothesis, seq_len);
        e.label = label;
        e.example_id = i;
        examples.push_back(std::move(e));
    }
    return examples;
}

std::vector<Example> generate_synthetic_ranking(std::size_t n_claims,
                                                std::size_t candidates_per_claim,
                                                std::size_t vocab_size, std::size_t seq_len,
                                                std::uint64_t seed) {
    require(n_claims >= 1, "generate_synthetic_ranking: n_claims must be >= 1");
    require(candidates_per_claim >= 2,
            "generate_synthetic_ranking: candidates_per_claim must be >= 2");
    require(seq_len >= 19, "generate_synthetic_ranking: seq_len must be >= 19");
    const IdBlocks blocks = split_id_blocks(vocab_size);

    Rng rng(seed);
    std::vector<Example> examples;
    examples.reserve(n_claims * candidates_per_claim);
    std::size_t index = 0;
    for (std::size_t claim_id = 0; claim_id < n_claims; ++claim_id) {
        const std::size_t c = 5 + rng.below(4);  // claim length in [5, 8]
        std::vector<int> claim;
        while (claim.size() < c) {
            const int id = draw_from(rng, blocks.general_begin, blocks.general_end);
            if (std::find(claim.begin(), claim.end(), id) == claim.end()) claim.push_back(id);
        }
        const auto outside_claim = [&](Rng& r) {
            while (true) {
                const int id = draw_from(r, blocks.general_begin, blocks.general_end);
                if (std::find(claim.begin(), claim.end(), id) == claim.end()) return id;
            }
        };

        // Positive candidate: ceil(0.6 c) claim tokens, the rest fresh.
        const std::size_t overlap = (c * 3 + 4) / 5;
        std::vector<int> positive = claim;
        rng.shuffle(positive);
        positive.resize(overlap);
        while (positive.size() < c) positive.push_back(outside_claim(rng));
        rng.shuffle(positive);

        const std::size_t positive_slot = rng.below(candidates_per_claim);
        for (std::size_t slot = 0; slot < candidates_per_claim; ++slot) {
            std::vector<int> candidate;
            if (slot == positive_slot) {
                candidate = positive;
            } else {
                candidate.resize(c);
                for (int& id : candidate) id = outside_claim(rng);
            }
            Example e = make_pair_example(claim, candidate, seq_len);
            e.label = slot == positive_slot ? 1 : 0;
            e.example_id = index++;
            e.group_id = claim_id;
            examples.push_back(std::move(e));
        }
    }
    return examples;
}

std::vector<Example> subsample(const std::vector<Example>& examples, double fraction,
                               std::uint64_t seed) {
    require(fraction > 0.0 && fraction <= 1.0, "subsample: fraction must be in (0, 1]");
    const std::size_t n = examples.size();
    const auto target =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (target >= n) return examples;

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[examples[i].label].push_back(i);

    // Per-class quota: floor the proportional share, then hand out the
    // remaining slots by largest fractional remainder (ties to lower label).
    struct Share {
        int label;
        std::size_t quota;
        double remainder;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [label, indices] : by_label) {
        const double exact = fraction * static_cast<double>(indices.size());
        const auto quota = static_cast<std::size_t>(exact);
        shares.push_back({label, quota, exact - static_cast<double>(quota)});
        assigned += quota;
    }
    std::stable_sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
        if (a.remainder != b.remainder) return a.remainder > b.remainder;
        return a.label < b.label;
    });
    for (std::size_t i = 0; assigned < target; i = (i + 1) % shares.size()) {
        if (shares[i].quota < by_label[shares[i].label].size()) {
            ++shares[i].quota;
            ++assigned;
        }
    }

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(target);
    std::sort(shares.begin(), shares.end(),
              [](const Share& a, const Share& b) { return a.label < b.label; });
    for (const Share& share : shares) {
        std::vector<std::size_t>& indices = by_label[share.label];
        rng.shuffle(indices);
        chosen.insert(chosen.end(), indices.begin(), indices.begin() + share.quota);
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<Example> out;
    out.reserve(chosen.size());
    for (std::size_t i : chosen) out.push_back(examples[i]);
    return out;
}

}  // namespace ag

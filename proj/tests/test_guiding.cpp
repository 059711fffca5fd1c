#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"

#include "ag/errors.hpp"
#include "ag/gradcheck.hpp"
#include "ag/guiding.hpp"
#include "ag/numeric.hpp"
#include "ag/rng.hpp"
#include "test_support.hpp"

using namespace ag;

namespace {

Matrix unit_rows(std::size_t n, std::size_t l, Rng& rng) {
    Matrix m(n, l);
    for (std::size_t i = 0; i < n; ++i) {
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            m(i, j) = rng.uniform(0.05, 1.0);
            norm_sq += m(i, j) * m(i, j);
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (std::size_t j = 0; j < l; ++j) m(i, j) *= inv;
    }
    return m;
}

// Direct evaluation of the discrimination loss, no log-sum-exp tricks.
double naive_mdg(const Matrix& m, double tau) {
    double loss = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < m.rows(); ++j) {
            denom += std::exp(dot(m.row(j), m.row(i), m.cols()) / tau);
        }
        loss -= std::log(std::exp(dot(m.row(i), m.row(i), m.cols()) / tau) / denom);
    }
    return loss;
}

// Quadruple-loop evaluation of || M^T M - I ||_F^2.
double brute_pdg(const Matrix& m) {
    double loss = 0.0;
    for (std::size_t a = 0; a < m.cols(); ++a) {
        for (std::size_t b = 0; b < m.cols(); ++b) {
            double g = 0.0;
            for (std::size_t k = 0; k < m.rows(); ++k) g += m(k, a) * m(k, b);
            const double target = a == b ? 1.0 : 0.0;
            loss += (g - target) * (g - target);
        }
    }
    return loss;
}

std::vector<double> flatten(const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix unflatten(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = v[i];
    return m;
}

AttentionTensor random_attention(std::size_t layers, std::size_t heads, std::size_t L,
                                 const std::vector<std::uint8_t>& pad_mask, Rng& rng) {
    AttentionTensor at;
    at.layers = layers;
    at.heads = heads;
    at.seq_len = L;
    at.maps.resize(layers * heads);
    for (Matrix& map : at.maps) {
        map.resize(L, L);
        for (std::size_t r = 0; r < L; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < L; ++c) {
                if (pad_mask[c]) {
                    map(r, c) = rng.uniform(0.2, 1.0);
                    sum += map(r, c);
                }
            }
            for (std::size_t c = 0; c < L; ++c) map(r, c) /= sum;
        }
    }
    return at;
}

}  // namespace

TEST_CASE("reduce_attention_map sums attention received over unmasked queries") {
    Matrix a(3, 3);
    a(0, 0) = 0.5;
    a(0, 1) = 0.5;
    a(1, 0) = 0.2;
    a(1, 1) = 0.8;
    a(2, 0) = 0.9;  // masked query row, must be ignored
    a(2, 2) = 0.1;
    const std::vector<double> m = reduce_attention_map(a, {1, 1, 0});
    REQUIRE(m.size() == 3);
    CHECK(m[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(m[2] == 0.0);
    CHECK_THROWS_AS(reduce_attention_map(Matrix(2, 3), {1, 1, 0}), std::invalid_argument);
}

TEST_CASE("build_attention_matrix stacks unit rows layer-major") {
    Rng rng(41);
    const std::vector<std::uint8_t> pad_mask = {1, 1, 1, 0};
    const AttentionTensor at = random_attention(2, 2, 4, pad_mask, rng);

    const AttentionMatrix am = build_attention_matrix(at, {1, 1}, pad_mask);
    REQUIRE(am.m.rows() == 4);
    REQUIRE(am.m.cols() == 4);
    REQUIRE(am.provenance.size() == 4);
    CHECK(am.provenance[0] == std::make_pair(std::size_t{0}, std::size_t{0}));
    CHECK(am.provenance[1] == std::make_pair(std::size_t{0}, std::size_t{1}));
    CHECK(am.provenance[2] == std::make_pair(std::size_t{1}, std::size_t{0}));
    CHECK(am.provenance[3] == std::make_pair(std::size_t{1}, std::size_t{1}));
    for (std::size_t r = 0; r < am.m.rows(); ++r) {
        CHECK(dot(am.m.row(r), am.m.row(r), 4) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(am.m(r, 3) == 0.0);  // masked column stays structurally zero
        // The unit row times its stored norm recovers the raw reduction.
        const std::vector<double> raw =
            reduce_attention_map(at.map(am.provenance[r].first, am.provenance[r].second),
                                 pad_mask);
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(am.m(r, c) * am.norms[r] == doctest::Approx(raw[c]).epsilon(1e-12));
        }
    }

    SUBCASE("layer mask restricts the rows") {
        const AttentionMatrix first_only = build_attention_matrix(at, {1, 0}, pad_mask);
        REQUIRE(first_only.m.rows() == 2);
        CHECK(first_only.provenance[1] == std::make_pair(std::size_t{0}, std::size_t{1}));
    }
    SUBCASE("a zero attention map cannot be normalized") {
        AttentionTensor zeroed = at;
        zeroed.maps[0].set_zero();
        CHECK_THROWS_AS(build_attention_matrix(zeroed, {1, 1}, pad_mask), numerical_error);
    }
}

TEST_CASE("mdg closed forms") {
    SUBCASE("two identical unit rows, tau 1") {
        Matrix m(2, 3);
        m(0, 0) = 1.0;
        m(1, 0) = 1.0;
        CHECK(mdg_loss(m, 1.0).value == doctest::Approx(1.3862943611198906).epsilon(1e-9));
    }
    SUBCASE("five identical rows reach 5 ln 5") {
        Matrix m(5, 4);
        for (std::size_t i = 0; i < 5; ++i) m(i, 1) = 1.0;
        CHECK(mdg_loss(m, 1.0).value == doctest::Approx(8.047189562170502).epsilon(1e-9));
    }
    SUBCASE("orthonormal pair e1, e2 at tau 1") {
        Matrix m(2, 2);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        CHECK(mdg_loss(m, 1.0).value == doctest::Approx(0.6265233750364457).epsilon(1e-9));
    }
    SUBCASE("orthonormal pair e1, e2 at tau 0.5") {
        Matrix m(2, 2);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        CHECK(mdg_loss(m, 0.5).value == doctest::Approx(0.2538560220859454).epsilon(1e-9));
    }
    SUBCASE("tau must be positive") {
        Matrix m(2, 2);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        CHECK_THROWS_AS(mdg_loss(m, 0.0), std::invalid_argument);
    }
}

TEST_CASE("mdg matches the naive evaluator and finite differences") {
    Rng rng(43);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 2 + rng.below(5);
        const std::size_t l = 3 + rng.below(5);
        const double tau = rng.uniform(0.4, 2.0);
        const Matrix m = unit_rows(n, l, rng);
        const LossWithGrad out = mdg_loss(m, tau);
        CHECK(out.value == doctest::Approx(naive_mdg(m, tau)).epsilon(1e-12));

        const auto f = [&](const std::vector<double>& v) {
            return mdg_loss(unflatten(v, n, l), tau).value;
        };
        const std::vector<double> fd = finite_difference_gradient(f, flatten(m));
        for (std::size_t i = 0; i < fd.size(); ++i) {
            CHECK(relative_error(fd[i], out.d_m.data()[i]) < 1e-6);
        }
    }
}

TEST_CASE("pdg closed forms and brute-force equivalence") {
    CHECK(pdg_loss(Matrix::identity(3)).value == 0.0);
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    CHECK(pdg_loss(m).value == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(47);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 2 + rng.below(6);
        const std::size_t l = 2 + rng.below(8);
        Matrix x(n, l);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0.0, 1.0);
        const LossWithGrad out = pdg_loss(x);
        CHECK(out.value == doctest::Approx(brute_pdg(x)).epsilon(1e-10));

        const auto f = [&](const std::vector<double>& v) {
            return pdg_loss(unflatten(v, n, l)).value;
        };
        const std::vector<double> fd = finite_difference_gradient(f, flatten(x));
        for (std::size_t i = 0; i < fd.size(); ++i) {
            CHECK(relative_error(fd[i], out.d_m.data()[i]) < 1e-6);
        }
    }
}

TEST_CASE("masked pdg drops padded diagonal targets") {
    Rng rng(53);
    const std::vector<std::uint8_t> pad_mask = {1, 1, 0, 1};
    Matrix m(3, 4);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            m(i, j) = pad_mask[j] ? rng.normal(0.0, 1.0) : 0.0;  // structural zeros
        }
    }
    // Equals the full-identity loss on the matrix with the padded column removed.
    Matrix dropped(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        dropped(i, 0) = m(i, 0);
        dropped(i, 1) = m(i, 1);
        dropped(i, 2) = m(i, 3);
    }
    const LossWithGrad masked = pdg_loss_masked(m, pad_mask);
    CHECK(masked.value == doctest::Approx(pdg_loss(dropped).value).epsilon(1e-12));
    // And differs from the full loss by the constant +1 per padded column.
    CHECK(pdg_loss(m).value == doctest::Approx(masked.value + 1.0).epsilon(1e-12));

    const auto f = [&](const std::vector<double>& v) {
        return pdg_loss_masked(unflatten(v, 3, 4), pad_mask).value;
    };
    const std::vector<double> fd = finite_difference_gradient(f, flatten(m));
    for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(relative_error(fd[i], masked.d_m.data()[i]) < 1e-6);
    }
}

TEST_CASE("total_loss arithmetic") {
    CHECK(total_loss(1.5, 2.0, 3.0, 0.1, 0.01) ==
          doctest::Approx(1.5 + 0.2 + 0.03).epsilon(1e-15));
    CHECK(total_loss(1.5, 123.0, 456.0, 0.0, 0.0) == 1.5);
}

TEST_CASE("gradients flow through the attention-matrix reduction") {
    Rng rng(59);
    const std::vector<std::uint8_t> pad_mask = {1, 1, 1, 0};
    const AttentionTensor at = random_attention(1, 2, 4, pad_mask, rng);

    const AttentionMatrix am = build_attention_matrix(at, {1}, pad_mask);
    LossWithGrad loss = mdg_loss(am.m, 1.0);
    std::vector<Matrix> d_attn(at.maps.size());
    attention_matrix_backward(am, loss.d_m, pad_mask, at.heads, d_attn);

    for (std::size_t h = 0; h < at.maps.size(); ++h) {
        const auto f = [&](const std::vector<double>& v) {
            AttentionTensor perturbed = at;
            perturbed.maps[h] = unflatten(v, 4, 4);
            const AttentionMatrix pam = build_attention_matrix(perturbed, {1}, pad_mask);
            return mdg_loss(pam.m, 1.0).value;
        };
        const std::vector<double> fd = finite_difference_gradient(f, flatten(at.maps[h]));
        REQUIRE(d_attn[h].rows() == 4);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            CHECK(relative_error(fd[i], d_attn[h].data()[i]) < 1e-5);
        }
    }
}

TEST_CASE("fixed pattern targets") {
    const std::vector<std::uint8_t> mask = {1, 1, 1, 0};
    const std::vector<int> ids = {1, 7, 4, 0};

    SUBCASE("first sends every row to column 0") {
        const PriorAttentionTarget t = fixed_pattern_target(GuideKind::first, ids, {}, 4, mask);
        for (std::size_t r = 0; r < 4; ++r) {
            CHECK(t.target(r, 0) == 1.0);
            CHECK(t.target(r, 1) == 0.0);
        }
        CHECK(t.source == "first");
    }
    SUBCASE("next walks the superdiagonal with a self edge") {
        const PriorAttentionTarget t = fixed_pattern_target(GuideKind::next, ids, {}, 4, mask);
        CHECK(t.target(0, 1) == 1.0);
        CHECK(t.target(1, 2) == 1.0);
        CHECK(t.target(2, 2) == 1.0);  // next position is masked: attend self
        CHECK(t.target(3, 0) == doctest::Approx(1.0 / 3.0));  // masked row: uniform
        CHECK(t.target(3, 3) == 0.0);
    }
    SUBCASE("prev walks the subdiagonal with a self edge") {
        const PriorAttentionTarget t = fixed_pattern_target(GuideKind::prev, ids, {}, 4, mask);
        CHECK(t.target(0, 0) == 1.0);
        CHECK(t.target(1, 0) == 1.0);
        CHECK(t.target(2, 1) == 1.0);
    }
    SUBCASE("delim spreads mass over the delimiter positions") {
        const PriorAttentionTarget t =
            fixed_pattern_target(GuideKind::delim, ids, {0, 2}, 4, mask);
        for (std::size_t r = 0; r < 4; ++r) {
            CHECK(t.target(r, 0) == 0.5);
            CHECK(t.target(r, 2) == 0.5);
            CHECK(t.target(r, 1) == 0.0);
        }
        CHECK_THROWS_AS(fixed_pattern_target(GuideKind::delim, ids, {}, 4, mask),
                        std::invalid_argument);
        CHECK_THROWS_AS(fixed_pattern_target(GuideKind::delim, ids, {3}, 4, mask),
                        std::invalid_argument);
    }
    SUBCASE("period targets the period tokens, falling back to column 0") {
        const PriorAttentionTarget t = fixed_pattern_target(GuideKind::period, ids, {}, 7, mask);
        for (std::size_t r = 0; r < 4; ++r) CHECK(t.target(r, 1) == 1.0);
        const PriorAttentionTarget fallback =
            fixed_pattern_target(GuideKind::period, ids, {}, 9, mask);
        for (std::size_t r = 0; r < 4; ++r) CHECK(fallback.target(r, 0) == 1.0);
    }
    SUBCASE("non-pattern kinds are rejected") {
        CHECK_THROWS_AS(fixed_pattern_target(GuideKind::mdg, ids, {}, 4, mask),
                        std::invalid_argument);
    }
}

TEST_CASE("pattern guiding loss is the mean row KL and its gradient checks out") {
    Rng rng(61);
    const std::vector<std::uint8_t> pad_mask = {1, 1, 1, 0};
    const AttentionTensor at = random_attention(2, 2, 4, pad_mask, rng);
    const PriorAttentionTarget target =
        fixed_pattern_target(GuideKind::first, {1, 7, 4, 0}, {}, 4, pad_mask);
    const std::vector<std::uint8_t> layer_mask = {1, 0};

    const PatternLoss loss = pattern_guiding_loss(at, target, layer_mask, pad_mask);

    // Independent evaluation: KL over layer 0 heads, unmasked rows only.
    double expected = 0.0;
    std::size_t terms = 0;
    for (std::size_t h = 0; h < 2; ++h) {
        const Matrix& a = at.map(0, h);
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                const double t = target.target(r, c);
                if (t > 0.0) expected += t * std::log(t / a(r, c));
            }
            ++terms;
        }
    }
    expected /= static_cast<double>(terms);
    CHECK(loss.value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(loss.value > 0.0);
    REQUIRE(loss.d_attn.size() == 4);
    CHECK(loss.d_attn[2].empty());  // layer 1 unselected
    CHECK(loss.d_attn[3].empty());

    for (std::size_t h = 0; h < 2; ++h) {
        const auto f = [&](const std::vector<double>& v) {
            AttentionTensor perturbed = at;
            perturbed.maps[h] = unflatten(v, 4, 4);
            return pattern_guiding_loss(perturbed, target, layer_mask, pad_mask).value;
        };
        const std::vector<double> fd = finite_difference_gradient(f, flatten(at.maps[h]));
        for (std::size_t i = 0; i < fd.size(); ++i) {
            CHECK(relative_error(fd[i], loss.d_attn[h].data()[i]) < 1e-5);
        }
    }

    SUBCASE("loss vanishes when attention equals the target") {
        AttentionTensor exact = at;
        const PriorAttentionTarget uniform =
            fixed_pattern_target(GuideKind::delim, {1, 7, 4, 0}, {0, 1, 2}, 4, pad_mask);
        for (Matrix& map : exact.maps) map = uniform.target;
        const PatternLoss zero = pattern_guiding_loss(exact, uniform, {1, 1}, pad_mask);
        CHECK(zero.value == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("invalid target rows rejected") {
        PriorAttentionTarget bad = target;
        bad.target(0, 0) = 2.0;
        CHECK_THROWS_AS(pattern_guiding_loss(at, bad, layer_mask, pad_mask),
                        std::invalid_argument);
    }
}

TEST_CASE("pmi counting on the alternating corpus") {
    // "a b a b", window 1: ordered events 6, all between a and b.
    const std::vector<std::vector<int>> corpus = {{7, 8, 7, 8}};
    const PmiTable table = compute_pmi_table(corpus, 1);
    CHECK(table.score(7, 8) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(table.score(8, 7) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(table.score(7, 7) == 0.0);
    CHECK(table.score(7, 9) == 0.0);

    SUBCASE("self pairs with flat marginals carry no positive pmi") {
        const PmiTable self_table = compute_pmi_table({{5, 5}}, 1);
        CHECK(self_table.score(5, 5) == 0.0);
    }
    SUBCASE("window must be positive, corpus non-empty") {
        CHECK_THROWS_AS(compute_pmi_table(corpus, 0), std::invalid_argument);
        CHECK_THROWS_AS(compute_pmi_table({}, 1), std::invalid_argument);
    }
}

TEST_CASE("pmi target rows normalize positive scores with uniform fallback") {
    PmiTable table;
    table.set(1, 2, 2.0);
    table.set(1, 3, 1.0);
    const std::vector<int> ids = {1, 2, 3, 0};
    const std::vector<std::uint8_t> mask = {1, 1, 1, 0};
    const PriorAttentionTarget t = pmi_target(ids, table, mask);
    CHECK(t.source == "pmi");
    // Row 0: token 1 scores 2 with token 2 and 1 with token 3.
    CHECK(t.target(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(t.target(0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(t.target(0, 0) == 0.0);
    // Row 1: only the pair (2,1) scores.
    CHECK(t.target(1, 0) == 1.0);
    // Masked column never receives mass.
    for (std::size_t r = 0; r < 4; ++r) CHECK(t.target(r, 3) == 0.0);
}

TEST_CASE("prior target files round-trip and reject malformed rows") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ag_prior_test";
    fs::create_directories(dir);
    const std::string path = (dir / "targets.tsv").string();

    std::map<std::size_t, Matrix> targets;
    Matrix t0(4, 4);
    t0(0, 1) = 0.75;
    t0(0, 2) = 0.25;
    t0(2, 0) = 1.0;
    targets[0] = t0;
    Matrix t5(4, 4);
    t5(1, 1) = 1.0;
    targets[5] = t5;
    write_prior_targets(path, targets);

    const std::map<std::size_t, Matrix> loaded = load_prior_targets(path, 4);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded.count(0) == 1);
    REQUIRE(loaded.count(5) == 1);
    CHECK(max_abs_diff(loaded.at(0), t0) < 1e-12);
    CHECK(max_abs_diff(loaded.at(5), t5) < 1e-12);

    SUBCASE("comments and blank lines ignored, duplicate triplets accumulate") {
        const std::string hand = (dir / "hand.tsv").string();
        std::ofstream out(hand);
        out << "# prior targets\n\n0\t0\t1\t1.0\n0\t0\t1\t1.0 # same cell again\n"
            << "0\t0\t2\t2.0\n";
        out.close();
        const auto m = load_prior_targets(hand, 4);
        CHECK(m.at(0)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(m.at(0)(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("malformed rows raise parse errors naming the line") {
        const std::string bad = (dir / "bad.tsv").string();
        {
            std::ofstream out(bad);
            out << "0\t0\t1\n";
        }
        CHECK_THROWS_AS(load_prior_targets(bad, 4), parse_error);
        {
            std::ofstream out(bad);
            out << "0\t9\t1\t1.0\n";
        }
        CHECK_THROWS_AS(load_prior_targets(bad, 4), parse_error);
        {
            std::ofstream out(bad);
            out << "0\t0\t1\t-2.0\n";
        }
        CHECK_THROWS_AS(load_prior_targets(bad, 4), parse_error);
        {
            std::ofstream out(bad);
            out << "0\t0\tx\t1.0\n";
        }
        CHECK_THROWS_AS(load_prior_targets(bad, 4), parse_error);
        CHECK_THROWS_AS(load_prior_targets((dir / "absent.tsv").string(), 4), io_error);
    }

    SUBCASE("finalize restricts to the mask and fills empty rows uniform") {
        Matrix raw(3, 3);
        raw(0, 0) = 2.0;
        raw(0, 2) = 2.0;  // masked column: dropped before normalization
        const PriorAttentionTarget fin = finalize_prior_target(raw, {1, 1, 0}, "file");
        CHECK(fin.target(0, 0) == 1.0);
        CHECK(fin.target(0, 2) == 0.0);
        CHECK(fin.target(1, 0) == 0.5);  // empty row: uniform over unmasked
        CHECK(fin.target(1, 1) == 0.5);
        CHECK(fin.source == "file");
    }
}

TEST_CASE("guide kind parsing and the term selectors") {
    CHECK(parse_guide_kind("mdg+pdg") == GuideKind::mdg_pdg);
    CHECK(parse_guide_kind("prior-file") == GuideKind::prior_file);
    CHECK(to_string(GuideKind::mdg_pdg) == "mdg+pdg");
    CHECK_THROWS_AS(parse_guide_kind("bogus"), parse_error);

    CHECK(guide_uses_mdg(GuideKind::mdg_pdg));
    CHECK(guide_uses_mdg(GuideKind::mdg));
    CHECK_FALSE(guide_uses_mdg(GuideKind::pdg));
    CHECK(guide_uses_pdg(GuideKind::mdg_pdg));
    CHECK_FALSE(guide_uses_pdg(GuideKind::first));
    CHECK(guide_uses_pattern(GuideKind::pmi));
    CHECK(guide_uses_pattern(GuideKind::prior_file));
    CHECK_FALSE(guide_uses_pattern(GuideKind::none));

    GuidingConfig cfg;
    cfg.layer_mask = {1, 0};
    CHECK_NOTHROW(cfg.validate(2));
    cfg.guide_kind = GuideKind::mdg;
    cfg.layer_mask = {0, 0};
    CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
    cfg.layer_mask = {1};
    CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
    cfg.layer_mask = {1, 1};
    cfg.tau = -1.0;
    CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
}

TEST_CASE("full objective gradients with every guide family") {
    const ArchitectureConfig arch = agtest::tiny_arch(4, 1, 2, 8, 3, 12);
    Rng rng(67);
    ModelParameters params = ModelParameters::random_init(arch, rng);
    const std::vector<Example> examples = agtest::tiny_batch(arch, 3, rng);
    const std::vector<const Example*> batch = agtest::batch_view(examples);
    const GuideResources resources;

    SUBCASE("mdg plus pdg") {
        GuidingConfig guiding;
        guiding.guide_kind = GuideKind::mdg_pdg;
        guiding.alpha = 0.7;
        guiding.beta = 0.4;
        guiding.layer_mask = {1};
        const auto report =
            agtest::certify_gradients(params, batch, TaskKind::nli, guiding, resources);
        CHECK(report.max_rel_err < 1e-4);
    }
    SUBCASE("pattern guide") {
        GuidingConfig guiding;
        guiding.guide_kind = GuideKind::first;
        guiding.pattern_weight = 0.5;
        guiding.layer_mask = {1};
        const auto report =
            agtest::certify_gradients(params, batch, TaskKind::nli, guiding, resources);
        CHECK(report.max_rel_err < 1e-4);
    }
    SUBCASE("raw-row pdg variant") {
        GuidingConfig guiding;
        guiding.guide_kind = GuideKind::pdg;
        guiding.beta = 0.3;
        guiding.pdg_raw_rows = true;
        guiding.layer_mask = {1};
        // Raw rows make the loss value large relative to single-entry
        // gradients, so h = 1e-5 sits in the cancellation regime; h = 1e-4
        // keeps the central difference well conditioned.
        const auto report =
            agtest::certify_gradients(params, batch, TaskKind::nli, guiding, resources, 1e-4);
        CHECK(report.max_rel_err < 1e-4);
    }
}

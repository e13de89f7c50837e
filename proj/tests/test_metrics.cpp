#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "evslt/metrics.hpp"
#include "evslt/rng.hpp"

using namespace evslt;

namespace {

using Corpus = std::vector<TokenSeq>;

// brute force: longest subsequence of a that is also a subsequence of b,
// found by enumerating every subset of a
int64_t lcs_exhaustive(const TokenSeq& a, const TokenSeq& b) {
    const size_t n = a.size();
    int64_t best = 0;
    for (uint32_t m = 0; m < (1u << n); ++m) {
        size_t bi = 0;
        int64_t len = 0;
        bool ok = true;
        for (size_t i = 0; i < n && ok; ++i) {
            if (!(m & (1u << i))) continue;
            while (bi < b.size() && b[bi] != a[i]) ++bi;
            if (bi == b.size()) {
                ok = false;
            } else {
                ++bi;
                ++len;
            }
        }
        if (ok) best = std::max(best, len);
    }
    return best;
}

TokenSeq random_seq(Rng& rng, int64_t max_len, int alphabet, int offset = 0) {
    TokenSeq s(static_cast<size_t>(rng.below(max_len + 1)));
    for (auto& t : s) t = offset + static_cast<int>(rng.below(alphabet));
    return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("bleu is exactly 1 on a perfectly matching corpus") {
    Corpus c{{4, 5, 6}, {7, 8}, {9, 10, 11, 12}};
    for (int n = 1; n <= 4; ++n) CHECK(bleu_n(c, c, n) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("clipping: 'the the the' against 'the cat' gives p1 = 1/3") {
    Corpus cand{{10, 10, 10}};
    Corpus ref{{10, 11}};
    const auto ps = bleu_precisions(cand, ref, 1);
    CHECK(ps[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // c=3 > r=2 so BP=1 and BLEU-1 equals the precision
    CHECK(bleu_n(cand, ref, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("brevity penalty e^{1-4/2} on a short fully matching candidate") {
    Corpus cand{{7, 8}};
    Corpus ref{{7, 8, 9, 10}};
    const auto ps = bleu_precisions(cand, ref, 1);
    CHECK(ps[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bleu_n(cand, ref, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("zero precision without smoothing zeroes the score") {
    CHECK(bleu_n({{5, 6}}, {{7, 8}}, 1) == 0.0);
    // unigrams overlap but no 4-gram exists in a 3-token pair
    CHECK(bleu_n({{5, 6, 7}}, {{5, 6, 7}}, 3) == doctest::Approx(1.0));
    CHECK(bleu_n({{5, 6, 7}}, {{5, 6, 8}}, 4) == 0.0);
}

TEST_CASE("add-one smoothing lifts an empty match to (0+1)/(1+1)") {
    Corpus cand{{5}};
    Corpus ref{{7}};
    CHECK(bleu_n(cand, ref, 1) == 0.0);
    CHECK(bleu_n(cand, ref, 1, true) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty or mismatched corpora are rejected") {
    CHECK_THROWS_AS(bleu_n({}, {}, 1), EmptyCorpus);
    CHECK_THROWS_AS(rouge_l({}, {}), EmptyCorpus);
    CHECK_THROWS_AS(bleu_n({{1}}, {{1}, {2}}, 1), DataError);
    CHECK_THROWS_AS(bleu_n({{1}}, {{1}}, 5), ConfigError);
}

TEST_CASE("empty candidate sentences give score 0, not a crash") {
    CHECK(bleu_n({{}, {}}, {{4, 5}, {6}}, 1) == 0.0);
    CHECK(rouge_l({{}, {}}, {{4, 5}, {6}}) == 0.0);
}

TEST_CASE("bleu precision order monotonicity on random imperfect corpora") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        Corpus cand, ref;
        for (int i = 0; i < 5; ++i) {
            cand.push_back(random_seq(rng, 12, 5, 4));
            ref.push_back(random_seq(rng, 12, 5, 4));
        }
        bool any = false;
        for (const auto& s : cand) any = any || !s.empty();
        if (!any) continue;
        const auto ps = bleu_precisions(cand, ref, 4);
        for (int n = 0; n < 3; ++n) CHECK(ps[size_t(n + 1)] <= ps[size_t(n)] + 1e-12);
    }
}

TEST_CASE("rouge-l is 1 on identical sentences") {
    Corpus c{{4, 5, 6, 7}, {8}, {9, 10}};
    CHECK(rouge_l(c, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rouge-l on 'a b c d' vs 'a c b d' is 0.75") {
    Corpus cand{{1, 2, 3, 4}};
    Corpus ref{{1, 3, 2, 4}};
    CHECK(lcs_length(cand[0], ref[0]) == 3);
    CHECK(lcs_exhaustive(cand[0], ref[0]) == 3);
    CHECK(rouge_l(cand, ref) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("disjoint vocabularies score 0") {
    CHECK(rouge_l({{1, 2, 3}}, {{4, 5, 6}}) == 0.0);
}

TEST_CASE("rouge-l averages per-pair F measures") {
    // pair 1 perfect (F=1), pair 2 disjoint (F=0)
    Corpus cand{{4, 5}, {6}};
    Corpus ref{{4, 5}, {7}};
    CHECK(rouge_l(cand, ref) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lcs matches exhaustive search on all pairs up to length 5, alphabet 3") {
    std::vector<TokenSeq> all;
    all.push_back({});
    for (int len = 1; len <= 5; ++len) {
        std::vector<TokenSeq> next;
        for (const auto& s : all) {
            if (static_cast<int>(s.size()) != len - 1) continue;
            for (int t = 0; t < 3; ++t) {
                TokenSeq e = s;
                e.push_back(t);
                next.push_back(std::move(e));
            }
        }
        all.insert(all.end(), next.begin(), next.end());
    }
    REQUIRE(all.size() == 364);  // 1 + 3 + 9 + 27 + 81 + 243
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = i; j < all.size(); ++j) {
            const int64_t got = lcs_length(all[i], all[j]);
            CHECK(got == lcs_exhaustive(all[i], all[j]));
            CHECK(got >= 0);
            CHECK(got <= static_cast<int64_t>(std::min(all[i].size(), all[j].size())));
        }
}

TEST_CASE("lcs spot checks at length 8 against exhaustive search") {
    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = random_seq(rng, 8, 3);
        const auto b = random_seq(rng, 8, 3);
        CHECK(lcs_length(a, b) == lcs_exhaustive(a, b));
    }
}

TEST_CASE("score_corpus stays in [0,1] and counts the corpus") {
    Rng rng(5);
    Corpus cand, ref;
    for (int i = 0; i < 8; ++i) {
        cand.push_back(random_seq(rng, 10, 6, 4));
        ref.push_back(random_seq(rng, 10, 6, 4));
    }
    cand[0] = {4, 5};  // ensure a non-empty candidate
    const auto rep = score_corpus(cand, ref);
    CHECK(rep.corpus_size == 8);
    CHECK(rep.rouge_l >= 0.0);
    CHECK(rep.rouge_l <= 1.0);
    for (double b : rep.bleu) {
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
    }
}

}  // TEST_SUITE

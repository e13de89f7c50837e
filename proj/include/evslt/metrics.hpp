#pragma once

// Corpus-level BLEU-1..4 and ROUGE-L over token id sequences. One reference
// per candidate; scoring never touches raw strings.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "evslt/errors.hpp"

namespace evslt {

using TokenSeq = std::vector<int>;

struct ScoreReport {
    std::array<double, 4> bleu{0, 0, 0, 0};  // BLEU-1..4
    double rouge_l = 0;
    int64_t corpus_size = 0;
};

namespace detail {

inline void check_corpus(const std::vector<TokenSeq>& cand, const std::vector<TokenSeq>& ref) {
    if (cand.size() != ref.size()) throw DataError("candidate/reference count mismatch");
    if (cand.empty()) throw EmptyCorpus("no sentence pairs to score");
}

// clipped n-gram matches and candidate n-gram count for one pair
inline void ngram_stats(const TokenSeq& cand, const TokenSeq& ref, int n, int64_t& matched,
                        int64_t& total) {
    const int64_t nc = static_cast<int64_t>(cand.size()) - n + 1;
    const int64_t nr = static_cast<int64_t>(ref.size()) - n + 1;
    if (nc > 0) total += nc;
    if (nc <= 0 || nr <= 0) return;
    std::map<std::vector<int>, int64_t> ref_counts;
    for (int64_t i = 0; i < nr; ++i)
        ++ref_counts[std::vector<int>(ref.begin() + i, ref.begin() + i + n)];
    std::map<std::vector<int>, int64_t> cand_counts;
    for (int64_t i = 0; i < nc; ++i)
        ++cand_counts[std::vector<int>(cand.begin() + i, cand.begin() + i + n)];
    for (const auto& [gram, cnt] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched += std::min(cnt, it->second);
    }
}

}  // namespace detail

inline int64_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return 0;
    std::vector<int64_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Corpus-level clipped modified n-gram precisions p_1..p_n_max. A vanishing
// numerator or denominator yields 0 (or the add-one smoothed value).
inline std::vector<double> bleu_precisions(const std::vector<TokenSeq>& cand,
                                           const std::vector<TokenSeq>& ref, int n_max,
                                           bool add_one = false) {
    detail::check_corpus(cand, ref);
    if (n_max < 1 || n_max > 4) throw ConfigError("bleu order must be in 1..4");
    std::vector<double> ps;
    for (int n = 1; n <= n_max; ++n) {
        int64_t matched = 0, total = 0;
        for (size_t i = 0; i < cand.size(); ++i)
            detail::ngram_stats(cand[i], ref[i], n, matched, total);
        if (add_one)
            ps.push_back(double(matched + 1) / double(total + 1));
        else if (matched == 0 || total == 0)
            ps.push_back(0.0);
        else
            ps.push_back(double(matched) / double(total));
    }
    return ps;
}

// Corpus BLEU: geometric mean of the clipped precisions with uniform weights,
// times the brevity penalty exp(1 - r/c) when c <= r. Unsmoothed by default:
// any zero precision zeroes the score.
inline double bleu_n(const std::vector<TokenSeq>& cand, const std::vector<TokenSeq>& ref,
                     int n_max, bool add_one = false) {
    const auto ps = bleu_precisions(cand, ref, n_max, add_one);
    int64_t c_len = 0, r_len = 0;
    for (size_t i = 0; i < cand.size(); ++i) {
        c_len += static_cast<int64_t>(cand[i].size());
        r_len += static_cast<int64_t>(ref[i].size());
    }
    if (c_len == 0) return 0.0;
    double log_sum = 0.0;
    for (double p : ps) {
        if (p == 0.0) return 0.0;
        log_sum += std::log(p) / n_max;
    }
    const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - double(r_len) / double(c_len));
    return bp * std::exp(log_sum);
}

// Mean per-pair LCS F-measure with beta weighting recall; 0/0 counts as 0.
inline double rouge_l(const std::vector<TokenSeq>& cand, const std::vector<TokenSeq>& ref,
                      double beta = 1.2) {
    detail::check_corpus(cand, ref);
    const double b2 = beta * beta;
    double sum = 0.0;
    for (size_t i = 0; i < cand.size(); ++i) {
        const int64_t l = lcs_length(cand[i], ref[i]);
        if (l == 0) continue;
        const double r = double(l) / double(ref[i].size());
        const double p = double(l) / double(cand[i].size());
        sum += (1.0 + b2) * r * p / (r + b2 * p);
    }
    return sum / double(cand.size());
}

inline ScoreReport score_corpus(const std::vector<TokenSeq>& cand,
                                const std::vector<TokenSeq>& ref) {
    ScoreReport rep;
    rep.corpus_size = static_cast<int64_t>(cand.size());
    for (int n = 1; n <= 4; ++n) rep.bleu[size_t(n - 1)] = bleu_n(cand, ref, n);
    rep.rouge_l = rouge_l(cand, ref);
    return rep;
}

}  // namespace evslt

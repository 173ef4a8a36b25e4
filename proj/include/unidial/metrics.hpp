#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unidial/record.hpp"

namespace unidial {

// Shared surface normalizer for string-equality metrics: ASCII lowercase plus
// whitespace collapse.
std::string metric_normalize(std::string_view text);

// Longest common subsequence over token sequences. O(|a|*|b|).
std::size_t lcs_length(const std::vector<std::string_view>& a,
                       const std::vector<std::string_view>& b);

struct ScoreReport {
  std::string metric;
  double value = 0.0;
  std::uint64_t support = 0;   // number of scored examples
  ojson params = ojson::object();  // pinned variant choices (beta, smoothing, ...)

  ojson to_json() const;
};

// Label accuracy: exact match fraction after metric_normalize.
// Throws DataError on empty or mismatched inputs.
double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// Exact match of full strings after metric_normalize.
bool exact_match(std::string_view pred, std::string_view gold);
double exact_match_corpus(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds);

using SlotPairs = std::vector<std::pair<std::string, std::string>>;

struct PrF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t true_positive = 0;
  std::uint64_t pred_total = 0;
  std::uint64_t gold_total = 0;
};

// Micro-averaged F1 over exact (slot, value) matches. Pairs are
// metric-normalized and deduplicated per example; empty-vs-empty examples
// contribute nothing. Throws DataError on length mismatch.
PrF1 slot_f1(const std::vector<SlotPairs>& preds, const std::vector<SlotPairs>& golds);

// Normalized deduplicated (domain-slot, value) set for one turn.
using BeliefState = std::set<std::pair<std::string, std::string>>;
BeliefState make_belief_state(const SlotPairs& pairs);

// Fraction of aligned turns whose predicted state equals the gold state
// exactly; empty-vs-empty counts as correct.
double joint_goal_accuracy(const std::vector<BeliefState>& preds,
                           const std::vector<BeliefState>& golds);

inline constexpr double kRougeBeta = 1.2;

// LCS-based F-score: P = LCS/|pred|, R = LCS/|gold|,
// F = (1 + beta^2) P R / (R + beta^2 P). Throws DataError when gold is empty.
double rouge_l(std::string_view pred, std::string_view gold);
double rouge_l_corpus(const std::vector<std::string>& preds,
                      const std::vector<std::string>& golds);  // mean over pairs

inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU-4: clipped modified n-gram precisions (n = 1..4) pooled over the
// corpus, geometric mean, brevity penalty, scaled to [0, 100]. Zero n-gram
// counts are add-epsilon smoothed; an all-empty hypothesis corpus scores 0.
double bleu4(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// 0.5 * (inform + success) + bleu. Inform and success are percentages in
// [0, 100]; DataError "RangeViolation" otherwise.
double combined_score(double inform, double success, double bleu);

}  // namespace unidial

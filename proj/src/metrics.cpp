#include "unidial/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "unidial/errors.hpp"
#include "unidial/text.hpp"

namespace unidial {

std::string metric_normalize(std::string_view text) {
  return to_lower_ascii(collapse_ws_ascii(text));
}

std::size_t lcs_length(const std::vector<std::string_view>& a,
                       const std::vector<std::string_view>& b) {
  if (a.empty() || b.empty()) return 0;
  // One-row DP; prev = value of dp[i-1][j-1].
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t prev = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cur = row[j];
      row[j] = a[i - 1] == b[j - 1] ? prev + 1 : std::max(row[j], row[j - 1]);
      prev = cur;
    }
  }
  return row[b.size()];
}

ojson ScoreReport::to_json() const {
  ojson j = ojson::object();
  j["metric"] = metric;
  j["value"] = value;
  j["support"] = support;
  j["params"] = params;
  return j;
}

namespace {

void require_aligned(std::size_t preds, std::size_t golds, bool forbid_empty = true) {
  if (preds != golds) {
    throw DataError("LengthMismatch: " + std::to_string(preds) + " predictions vs " +
                    std::to_string(golds) + " references");
  }
  if (forbid_empty && preds == 0) throw DataError("Empty: no examples to score");
}

std::vector<std::string_view> metric_tokens(const std::string& normalized) {
  return split_ws(normalized);
}

}  // namespace

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
  require_aligned(preds.size(), golds.size());
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (metric_normalize(preds[i]) == metric_normalize(golds[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

bool exact_match(std::string_view pred, std::string_view gold) {
  return metric_normalize(pred) == metric_normalize(gold);
}

double exact_match_corpus(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds) {
  require_aligned(preds.size(), golds.size());
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (exact_match(preds[i], golds[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

namespace {

std::set<std::pair<std::string, std::string>> normalized_pair_set(const SlotPairs& pairs) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [slot, value] : pairs) {
    out.emplace(metric_normalize(slot), metric_normalize(value));
  }
  return out;
}

}  // namespace

PrF1 slot_f1(const std::vector<SlotPairs>& preds, const std::vector<SlotPairs>& golds) {
  require_aligned(preds.size(), golds.size(), /*forbid_empty=*/false);
  PrF1 out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto pred_set = normalized_pair_set(preds[i]);
    const auto gold_set = normalized_pair_set(golds[i]);
    out.pred_total += pred_set.size();
    out.gold_total += gold_set.size();
    for (const auto& p : pred_set) {
      if (gold_set.count(p) > 0) out.true_positive += 1;
    }
  }
  const auto tp = static_cast<double>(out.true_positive);
  out.precision = out.pred_total > 0 ? tp / static_cast<double>(out.pred_total) : 0.0;
  out.recall = out.gold_total > 0 ? tp / static_cast<double>(out.gold_total) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

BeliefState make_belief_state(const SlotPairs& pairs) {
  return normalized_pair_set(pairs);
}

double joint_goal_accuracy(const std::vector<BeliefState>& preds,
                           const std::vector<BeliefState>& golds) {
  require_aligned(preds.size(), golds.size());
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double rouge_l(std::string_view pred, std::string_view gold) {
  const std::string gold_norm = metric_normalize(gold);
  const auto gold_toks = metric_tokens(gold_norm);
  if (gold_toks.empty()) throw DataError("EmptyGold: reference has no tokens");
  const std::string pred_norm = metric_normalize(pred);
  const auto pred_toks = metric_tokens(pred_norm);
  if (pred_toks.empty()) return 0.0;

  const auto lcs = static_cast<double>(lcs_length(pred_toks, gold_toks));
  const double p = lcs / static_cast<double>(pred_toks.size());
  const double r = lcs / static_cast<double>(gold_toks.size());
  const double b2 = kRougeBeta * kRougeBeta;
  const double denom = r + b2 * p;
  return denom > 0.0 ? (1.0 + b2) * p * r / denom : 0.0;
}

double rouge_l_corpus(const std::vector<std::string>& preds,
                      const std::vector<std::string>& golds) {
  require_aligned(preds.size(), golds.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += rouge_l(preds[i], golds[i]);
  return sum / static_cast<double>(preds.size());
}

double bleu4(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
  require_aligned(preds.size(), golds.size());
  constexpr int kMaxOrder = 4;
  std::array<std::uint64_t, kMaxOrder> matched{};
  std::array<std::uint64_t, kMaxOrder> total{};
  std::uint64_t pred_len = 0;
  std::uint64_t gold_len = 0;

  using NgramCounts = std::map<std::vector<std::string_view>, std::uint64_t>;
  const auto count_ngrams = [](const std::vector<std::string_view>& toks, int n) {
    NgramCounts counts;
    if (toks.size() >= static_cast<std::size_t>(n)) {
      for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        counts[{toks.begin() + i, toks.begin() + i + n}] += 1;
      }
    }
    return counts;
  };

  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string pred_norm = metric_normalize(preds[i]);
    const std::string gold_norm = metric_normalize(golds[i]);
    const auto pred_toks = metric_tokens(pred_norm);
    const auto gold_toks = metric_tokens(gold_norm);
    pred_len += pred_toks.size();
    gold_len += gold_toks.size();
    for (int n = 1; n <= kMaxOrder; ++n) {
      const NgramCounts pred_counts = count_ngrams(pred_toks, n);
      const NgramCounts gold_counts = count_ngrams(gold_toks, n);
      for (const auto& [gram, count] : pred_counts) {
        const auto it = gold_counts.find(gram);
        const std::uint64_t clip = it == gold_counts.end() ? 0 : it->second;
        matched[n - 1] += std::min(count, clip);
      }
      if (pred_toks.size() >= static_cast<std::size_t>(n)) {
        total[n - 1] += pred_toks.size() - n + 1;
      }
    }
  }

  if (pred_len == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    const double num = matched[n] > 0 ? static_cast<double>(matched[n]) : kBleuEpsilon;
    const double den = total[n] > 0 ? static_cast<double>(total[n]) : 1.0;
    log_sum += std::log(num / den) / kMaxOrder;
  }
  const double bp =
      pred_len >= gold_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(gold_len) / static_cast<double>(pred_len));
  return 100.0 * bp * std::exp(log_sum);
}

double combined_score(double inform, double success, double bleu) {
  if (inform < 0.0 || inform > 100.0 || success < 0.0 || success > 100.0) {
    throw DataError("RangeViolation: inform and success must lie in [0, 100]");
  }
  return 0.5 * (inform + success) + bleu;
}

}  // namespace unidial

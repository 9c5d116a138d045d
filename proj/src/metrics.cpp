#include "mds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mds/error.hpp"

namespace mds {

namespace {

using NGram = std::vector<std::string>;
using Counts = std::map<NGram, long>;

Counts count_ngrams(const Sentence& s, int order) {
  Counts counts;
  if (static_cast<int>(s.size()) < order) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= s.size(); ++i) {
    ++counts[NGram(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i) + order)];
  }
  return counts;
}

void check_corpus(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  if (candidates.empty()) throw InputError("metric over an empty corpus");
  if (candidates.size() != references.size()) {
    throw InputError("metric: " + std::to_string(candidates.size()) + " candidates vs " +
                     std::to_string(references.size()) + " references");
  }
}

}  // namespace

double bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_order) {
  check_corpus(candidates, references);
  if (max_order < 1 || max_order > 4) throw InputError("BLEU order must be in 1..4");

  double log_precision = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    long matched = 0;
    long total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Counts cand = count_ngrams(candidates[i], n);
      const Counts ref = count_ngrams(references[i], n);
      for (const auto& [gram, c] : cand) {
        total += c;
        if (auto it = ref.find(gram); it != ref.end()) matched += std::min(c, it->second);
      }
    }
    if (matched == 0 || total == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }

  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(references[i].size());
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_precision / max_order);
}

double nist(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_order) {
  check_corpus(candidates, references);
  if (max_order < 1) throw InputError("NIST order must be positive");

  // Information weights from reference n-gram statistics.
  std::vector<Counts> ref_counts(static_cast<std::size_t>(max_order) + 1);
  double ref_words = 0.0;
  for (const auto& ref : references) {
    ref_words += static_cast<double>(ref.size());
    for (int n = 1; n <= max_order; ++n) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) ref_counts[static_cast<std::size_t>(n)][gram] += c;
    }
  }
  auto info = [&](const NGram& gram) {
    const auto n = gram.size();
    const double count = static_cast<double>(ref_counts[n].at(gram));
    double context = ref_words;
    if (n > 1) context = static_cast<double>(ref_counts[n - 1].at(NGram(gram.begin(), gram.end() - 1)));
    return std::log2(context / count);
  };

  double score = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    double info_sum = 0.0;
    long total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Counts cand = count_ngrams(candidates[i], n);
      const Counts ref = count_ngrams(references[i], n);
      for (const auto& [gram, c] : cand) {
        total += c;
        if (auto it = ref.find(gram); it != ref.end()) info_sum += info(gram) * static_cast<double>(std::min(c, it->second));
      }
    }
    if (total > 0) score += info_sum / static_cast<double>(total);
  }

  double cand_len = 0.0;
  for (const auto& c : candidates) cand_len += static_cast<double>(c.size());
  if (cand_len == 0.0 || ref_words == 0.0) return 0.0;
  const double ratio = std::min(cand_len / ref_words, 1.0);
  const double beta = std::log(0.5) / std::pow(std::log(1.5), 2);
  return score * std::exp(beta * std::pow(std::log(ratio), 2));
}

}  // namespace mds

#pragma once

#include <string>
#include <vector>

namespace mds {

using Sentence = std::vector<std::string>;

/// Corpus-level BLEU-N (1 <= N <= 4): clipped n-gram precisions pooled over
/// the corpus, geometric mean, brevity penalty, no smoothing. One reference
/// per candidate. Throws InputError on an empty corpus or unequal counts.
double bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_order);

/// Corpus-level NIST up to `max_order` with reference-derived information
/// weights and the NIST brevity factor. Orders with no candidate n-grams add
/// nothing.
double nist(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_order = 5);

}  // namespace mds

#include "mds/synth.hpp"

#include <algorithm>
#include <string>

#include "mds/error.hpp"
#include "mds/params.hpp"
#include "mds/text.hpp"

namespace mds {

namespace {

const std::vector<std::string> kFirstWords = {
    "golden", "silver", "jade",  "crimson", "azure", "amber",  "coral",  "ivory",  "maple", "cedar",
    "lotus",  "orchid", "pearl", "ruby",    "sunny", "misty",  "royal",  "grand",  "urban", "ocean",
    "river",  "hill",   "harbor", "willow", "bamboo", "copper", "velvet", "emerald", "little", "meadow"};
const std::vector<std::string> kSecondWords = {"palace", "corner", "house", "point",  "terrace", "square", "court",
                                               "lane",   "haven",  "station", "plaza", "tower",   "village", "bay",
                                               "wharf",  "yard",   "loft",  "nest",   "hall"};
const std::vector<std::string> kDomains = {"mall", "hotel", "restaurant", "museum", "cafe", "park"};
const std::vector<std::string> kLocations = {"orchard road", "marina bay",   "chinatown",   "bugis",
                                             "sentosa",      "clarke quay", "little india", "tiong bahru"};
const std::vector<std::string> kPrices = {"cheap", "moderate", "expensive"};
const std::vector<std::string> kGreetings = {"hello , i need some help .", "hi there .", "good morning ."};

struct OpenExchange {
  const char* question;
  const char* answer;
};
const std::vector<OpenExchange> kOpen = {
    {"thank you so much !", "you are welcome , have a nice day ."},
    {"goodbye .", "goodbye , enjoy your trip ."},
    {"can you help me ?", "sure , what are you looking for ?"},
};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::string value_of(const Entity& e, const std::string& type) {
  for (const auto& a : e.attributes) {
    if (a.type == type) return a.value;
  }
  return {};
}

FeatureVector unit_vector(std::size_t dim, Rng& rng) {
  FeatureVector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.normal();
  return v / v.norm();
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_entities, std::size_t n_pairs,
                                      const SynthOptions& opts) {
  if (n_entities < 4) throw InputError("synthetic corpus needs at least 4 entities");
  if (n_entities > kFirstWords.size() * kSecondWords.size()) throw InputError("too many synthetic entities");
  Rng rng(seed);

  std::vector<std::string> names;
  for (const auto& a : kFirstWords) {
    for (const auto& b : kSecondWords) names.push_back(a + " " + b);
  }
  shuffle(names, rng);
  names.resize(n_entities);

  // Entity i < heads is "near" one entity from the second half.
  const std::size_t heads = n_entities / 2;
  std::vector<Entity> entities(n_entities);
  for (std::size_t i = 0; i < n_entities; ++i) {
    Entity& e = entities[i];
    e.name = names[i];
    e.attributes = {{"domain", pick(kDomains, rng)},
                    {"location", pick(kLocations, rng)},
                    {"price", pick(kPrices, rng)},
                    {"rating", std::to_string(1 + rng.below(5))},
                    {"phone", std::to_string(60000000 + rng.below(40000000))}};
    if (i < heads) e.attributes.push_back({"near", names[heads + rng.below(n_entities - heads)]});
    if (opts.with_images) {
      const std::size_t n_images = 1 + rng.below(2);
      for (std::size_t k = 0; k < n_images; ++k) e.image_features.push_back(unit_vector(opts.feature_dim, rng));
    }
  }

  SyntheticCorpus out;
  for (const auto& e : entities) out.kb.add(e);

  std::vector<std::size_t> head_order(heads);
  for (std::size_t i = 0; i < heads; ++i) head_order[i] = i;
  shuffle(head_order, rng);
  std::size_t next_head = 0;

  const double total_weight = opts.family_weights[0] + opts.family_weights[1] + opts.family_weights[2];
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const double u = rng.uniform() * total_weight;
    QuestionFamily family = QuestionFamily::open;
    if (u < opts.family_weights[0]) {
      family = QuestionFamily::attribute;
    } else if (u < opts.family_weights[0] + opts.family_weights[1]) {
      family = QuestionFamily::relation;
    }

    std::vector<std::string> utterances{pick(kGreetings, rng)};
    std::vector<FeatureVector> images;
    std::string response;
    if (family == QuestionFamily::attribute) {
      const Entity& e = entities[rng.below(n_entities)];
      const bool visual = opts.with_images && rng.uniform() < 0.3;
      const std::string subject = visual ? "this place" : e.name;
      switch (rng.below(5)) {
        case 0:
          utterances.push_back("what is the phone number of " + subject + " ?");
          response = "the phone number is " + value_of(e, "phone") + " .";
          break;
        case 1:
          utterances.push_back("where is " + subject + " located ?");
          response = "it is located at " + value_of(e, "location") + " .";
          break;
        case 2:
          utterances.push_back("how expensive is " + subject + " ?");
          response = "it is " + value_of(e, "price") + " .";
          break;
        case 3:
          utterances.push_back("what is the rating of " + subject + " ?");
          response = "it has a rating of " + value_of(e, "rating") + " .";
          break;
        default:
          utterances.push_back("what kind of place is " + subject + " ?");
          response = "it is a " + value_of(e, "domain") + " .";
          break;
      }
      if (visual) {
        const auto& img = e.image_features[rng.below(e.image_features.size())];
        FeatureVector noisy = img;
        for (auto& x : noisy) x += opts.image_noise * rng.normal();
        images.push_back(noisy);
      }
    } else if (family == QuestionFamily::relation) {
      std::size_t head;
      if (opts.distinct_relation_heads) {
        if (next_head == heads) {
          shuffle(head_order, rng);
          next_head = 0;
        }
        head = head_order[next_head++];
      } else {
        head = rng.below(heads);
      }
      const Entity& a = entities[head];
      const Entity& b = *out.kb.find(value_of(a, "near"));
      utterances.push_back("is there anything interesting near " + a.name + " ?");
      response = b.name + " is a " + value_of(b, "domain") + " near " + a.name + " .";
    } else {
      const auto& ex = pick(kOpen, rng);
      utterances.push_back(ex.question);
      response = ex.answer;
    }

    DialogPair pair;
    pair.utterances = utterances;
    pair.context = make_context(utterances, std::move(images));
    pair.response = tokenize(response);
    out.pairs.push_back(std::move(pair));
    out.families.push_back(family);
  }
  return out;
}

}  // namespace mds

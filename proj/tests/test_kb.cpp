#include <doctest.h>

#include <set>
#include <sstream>

#include "mds/error.hpp"
#include "mds/kb.hpp"
#include "support.hpp"
#include "walk_oracle.hpp"

using namespace mds;

namespace {

KnowledgeBase parse(const std::string& text) {
  std::istringstream in(text);
  return parse_kb(in);
}

Entity entity(std::string name, std::vector<AttributeValuePair> attrs) {
  return Entity{std::move(name), std::move(attrs), {}};
}

}  // namespace

TEST_CASE("parse_kb reads entities and attribute counts") {
  auto kb = parse(R"([
    {"name": "Wisma Atria", "attributes": [{"type": "domain", "value": "mall"},
      {"type": "location", "value": "Orchard Road"}, {"type": "rating", "value": "4"}]},
    {"name": "Inaniwa Yosuke", "attributes": [{"type": "near", "value": "Wisma Atria"},
      {"type": "domain", "value": "food"}, {"type": "price", "value": "cheap"}],
     "image_features": [[1, 0], [0, 1]]}
  ])");
  CHECK(kb.size() == 2);
  CHECK(kb.find("Wisma Atria")->attributes.size() == 3);
  CHECK(kb.find("Inaniwa Yosuke")->attributes.size() == 3);
  CHECK(kb.feature_dim() == 2);
  CHECK(kb.find("nobody") == nullptr);
}

TEST_CASE("parse_kb without images has feature_dim 0") {
  auto kb = parse(R"([{"name": "A", "attributes": [], "image_features": []}])");
  CHECK(kb.feature_dim() == 0);
}

TEST_CASE("parse_kb errors name the entity and position") {
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  auto dup = message(R"([{"name": "Wisma Atria"}, {"name": "Wisma Atria"}])");
  CHECK(dup.find("duplicate") != std::string::npos);
  CHECK(dup.find("#1") != std::string::npos);
  CHECK(dup.find("Wisma Atria") != std::string::npos);

  auto dims = message(R"([{"name": "A", "image_features": [[1, 2]]}, {"name": "B", "image_features": [[1, 2, 3]]}])");
  CHECK(dims.find("'B'") != std::string::npos);
  CHECK(dims.find("dimension") != std::string::npos);

  CHECK(message("[{\"name\": \"A\"").find("malformed") != std::string::npos);
  CHECK(message(R"({"name": "A"})").find("array") != std::string::npos);
  CHECK(message(R"([{"attributes": []}])").find("#0") != std::string::npos);
  CHECK(message(R"([{"name": "A", "attributes": [{"type": "", "value": "x"}]}])").find("empty") != std::string::npos);
  CHECK(message(R"([{"name": "A", "attributes": [{"type": "t"}]}])").find("attribute #0") != std::string::npos);
}

TEST_CASE("write_kb round trips") {
  KnowledgeBase kb;
  Entity a = entity("A", {{"near", "B"}, {"domain", "mall"}});
  a.image_features.push_back(FeatureVector::LinSpaced(3, 0.1, 0.7));
  kb.add(a);
  kb.add(entity("B", {{"domain", "mall"}}));
  std::stringstream buf;
  write_kb(buf, kb);
  auto back = parse_kb(buf);
  REQUIRE(back.size() == 2);
  CHECK(back.find("A")->attributes == kb.find("A")->attributes);
  CHECK(back.find("A")->image_features[0] == kb.find("A")->image_features[0]);
  CHECK(back.feature_dim() == 3);
}

TEST_CASE("build_graph unifies tails with entity names") {
  KnowledgeBase kb;
  kb.add(entity("A", {{"near", "B"}, {"domain", "mall"}}));
  kb.add(entity("B", {{"domain", "mall"}}));
  auto g = build_graph(kb);
  CHECK(g.nodes() == std::set<std::string>{"A", "B", "mall"});
  CHECK(g.edges().size() == 3);
  CHECK(g.out_degree("A") == 2);
  CHECK(g.out_degree("mall") == 0);
  CHECK(g.out_edges("A").front() == OutEdge{"domain", "mall"});
}

TEST_CASE("build_graph of an empty KB is empty") {
  auto g = build_graph(KnowledgeBase{});
  CHECK(g.nodes().empty());
  CHECK(g.edges().empty());
  CHECK(g.out_degree("anything") == 0);
}

TEST_CASE("node identity trims whitespace and collapses duplicate triplets") {
  KnowledgeBase kb;
  kb.add(entity("A", {{"near", "  B "}, {"near", "B"}, {"near", "C"}}));
  kb.add(entity("B", {}));
  auto g = build_graph(kb);
  CHECK(g.nodes() == std::set<std::string>{"A", "B", "C"});
  CHECK(g.edges().size() == 2);
  CHECK(g.out_degree("A") == 2);
}

TEST_CASE("edge count matches a set-based recount on random KBs") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    KnowledgeBase kb;
    std::set<std::tuple<std::string, std::string, std::string>> expected;
    std::set<std::string> nodes;
    std::map<std::string, std::set<std::pair<std::string, std::string>>> per_entity;
    for (int i = 0; i < 10; ++i) {
      Entity e;
      e.name = "e" + std::to_string(i);
      nodes.insert(e.name);
      const std::size_t n = rng.below(6);
      for (std::size_t k = 0; k < n; ++k) {
        std::string type = rng.below(2) ? "near" : "domain";
        std::string value = rng.below(2) ? "e" + std::to_string(rng.below(10)) : "v" + std::to_string(rng.below(4));
        e.attributes.push_back({type, value});
        expected.insert({e.name, type, value});
        nodes.insert(value);
        per_entity[e.name].insert({type, value});
      }
      kb.add(e);
    }
    auto g = build_graph(kb);
    CHECK(g.edges().size() == expected.size());
    CHECK(g.nodes() == nodes);
    for (const auto& [name, pairs] : per_entity) CHECK(g.out_degree(name) == pairs.size());
    for (const auto& t : g.edges()) {
      CHECK(g.contains(t.head));
      CHECK(g.contains(t.tail));
    }
    auto again = build_graph(kb);
    CHECK(again.edges() == g.edges());
    CHECK(again.nodes() == g.nodes());
  }
}

TEST_CASE("random walk KBs respect the node and edge bounds") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto g = build_graph(testing::random_walk_kb(rng, 12, 24));
    CHECK(g.nodes().size() <= 12);
    CHECK(g.edges().size() <= 24);
  }
}

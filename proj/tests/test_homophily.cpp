#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "hetmp/homophily.hpp"
#include "test_util.hpp"

using namespace hetmp;

namespace {

Graph labeled_graph(int n, std::vector<std::pair<int, int>> undirected,
                    std::vector<int> labels, int classes) {
  Graph g;
  g.num_nodes = n;
  g.num_classes = classes;
  g.edges = symmetric_closure(undirected);
  g.labels = std::move(labels);
  g.finalize();
  return g;
}

}  // namespace

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity({1, 2}, {1, 2}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  SUBCASE("zero-norm convention") {
    CHECK(cosine_similarity({0, 0}, {1, 2}) == 0.0);
  }
  SUBCASE("symmetry and positive scale invariance") {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> a(5), b(5);
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.normal();
      double s = cosine_similarity(a, b);
      CHECK(cosine_similarity(b, a) == doctest::Approx(s));
      std::vector<double> ca = a;
      for (auto& v : ca) v *= 3.7;
      CHECK(cosine_similarity(ca, b) == doctest::Approx(s));
    }
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS(cosine_similarity({1, 2}, {1, 2, 3}));
  }
}

TEST_CASE("scaling factors") {
  std::vector<double> u{1, 0}, v{0, 1};
  CHECK(scaling_factor(u, u, Channel::het) == doctest::Approx(0.0));
  CHECK(scaling_factor(u, v, Channel::orig) == 1.0);
  CHECK(scaling_factor(u, v, Channel::hom) == doctest::Approx(0.0));

  SUBCASE("channel table identities over random pairs") {
    Rng rng(17);
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> a(4), b(4);
      for (auto& x : a) x = rng.normal();
      for (auto& x : b) x = rng.normal();
      double hom = scaling_factor(a, b, Channel::hom);
      double het = scaling_factor(a, b, Channel::het);
      CHECK(scaling_factor(a, b, Channel::orig) == 1.0);  // exact
      CHECK(hom + het == 1.0);  // bit-level: het computed as 1 - hom
    }
  }
  SUBCASE("negative similarity passes through unclamped") {
    std::vector<double> a{1, 0}, b{-1, 0};
    CHECK(scaling_factor(a, b, Channel::hom) == doctest::Approx(-1.0));
    CHECK(scaling_factor(a, b, Channel::het) == doctest::Approx(2.0));
  }
}

TEST_CASE("node homophily") {
  SUBCASE("triangle, all same label -> 1") {
    Graph g = labeled_graph(3, {{0, 1}, {1, 2}, {2, 0}}, {0, 0, 0}, 1);
    CHECK(node_homophily(g) == doctest::Approx(1.0));
  }
  SUBCASE("path with alternating labels -> 0") {
    Graph g = labeled_graph(3, {{0, 1}, {1, 2}}, {0, 1, 0}, 2);
    CHECK(node_homophily(g) == doctest::Approx(0.0));
  }
  SUBCASE("degree-0 nodes contribute 0") {
    Graph g = labeled_graph(3, {{0, 1}}, {0, 0, 0}, 1);
    CHECK(node_homophily(g) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("missing labels rejected") {
    Graph g;
    g.num_nodes = 2;
    g.num_classes = 1;
    g.edges = {{0, 1}, {1, 0}};
    g.finalize();
    CHECK_THROWS(node_homophily(g));
  }
}

TEST_CASE("edge homophily") {
  SUBCASE("triangle with labels 0,0,1 -> 1/3") {
    Graph g = labeled_graph(3, {{0, 1}, {1, 2}, {2, 0}}, {0, 0, 1}, 2);
    CHECK(edge_homophily(g) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("all labels equal -> 1") {
    Graph g = labeled_graph(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 0, 0, 0}, 1);
    CHECK(edge_homophily(g) == doctest::Approx(1.0));
  }
  SUBCASE("empty edge set rejected") {
    Graph g = labeled_graph(2, {}, {0, 1}, 2);
    CHECK_THROWS(edge_homophily(g));
  }
}

TEST_CASE("class-insensitive edge homophily") {
  SUBCASE("2 balanced classes, only intra edges -> 1") {
    Graph g = labeled_graph(4, {{0, 1}, {2, 3}}, {0, 0, 1, 1}, 2);
    CHECK(class_insensitive_edge_homophily(g) == doctest::Approx(1.0));
  }
  SUBCASE("fully heterophilous -> 0 (max with 0)") {
    Graph g = labeled_graph(4, {{0, 2}, {1, 3}}, {0, 0, 1, 1}, 2);
    CHECK(class_insensitive_edge_homophily(g) == doctest::Approx(0.0));
  }
  SUBCASE("C < 2 rejected") {
    Graph g = labeled_graph(2, {{0, 1}}, {0, 0}, 1);
    CHECK_THROWS(class_insensitive_edge_homophily(g));
  }
}

TEST_CASE("metrics are invariant to node relabeling") {
  Graph g = testutil::random_graph(25, 3, 4, 0.2, 99);
  HomophilyReport base = homophily_report(g);
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    std::vector<int> perm(g.num_nodes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Graph pg = testutil::permute_graph(g, perm);
    HomophilyReport r = homophily_report(pg);
    CHECK(r.h_node == doctest::Approx(base.h_node));
    CHECK(r.h_edge == doctest::Approx(base.h_edge));
    CHECK(r.h_edge_insensitive == doctest::Approx(base.h_edge_insensitive));
  }
}

TEST_CASE("report ranges") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = testutil::random_graph(30, 4, 3, 0.15, seed);
    HomophilyReport r = homophily_report(g);
    CHECK(r.h_node >= 0.0);
    CHECK(r.h_node <= 1.0);
    CHECK(r.h_edge >= 0.0);
    CHECK(r.h_edge <= 1.0);
    CHECK(r.h_edge_insensitive >= 0.0);
    CHECK(r.h_edge_insensitive <= 1.0);
    CHECK(r.num_classes == 4);
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sanitrack/cluster.hpp"

using namespace sanitrack;

namespace {

std::vector<Point3> two_blobs(std::mt19937_64& rng, std::size_t n, double sigma, double gap) {
  auto a = oracle::gaussian_blob(rng, {0, 0, 1}, sigma, n);
  const auto b = oracle::gaussian_blob(rng, {static_cast<float>(gap), 0, 1}, sigma, n);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<double> sorted_weights(const std::vector<MstEdge>& mst) {
  std::vector<double> w;
  for (const auto& e : mst) w.push_back(e.weight);
  std::sort(w.begin(), w.end());
  return w;
}

}  // namespace

TEST(CoreDistances, CollinearExamples) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_EQ(core_distances(pts, 1), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(core_distances(pts, 2), (std::vector<double>{2, 1, 2}));
}

TEST(CoreDistances, Duplicates) {
  const std::vector<Point3> pts = {{0, 0, 1}, {0, 0, 1}, {5, 0, 1}};
  const auto core = core_distances(pts, 1);
  EXPECT_EQ(core[0], 0.0);
  EXPECT_EQ(core[1], 0.0);
}

TEST(CoreDistances, TooFewPoints) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(core_distances(pts, 2), ParameterError);
  EXPECT_THROW(core_distances(pts, 0), ParameterError);
}

TEST(CoreDistances, MatchBruteForce) {
  std::mt19937_64 rng(41);
  const auto pts = oracle::uniform_cloud(rng, 300, 1.0);
  EXPECT_EQ(core_distances(pts, 5), oracle::core_distances(pts, 5));
}

TEST(MutualReachability, Examples) {
  const Point3 a{0, 0, 0};
  const Point3 b{0.5f, 0, 0};
  EXPECT_DOUBLE_EQ(mutual_reachability(a, b, 0.1, 0.1), 0.5);
  EXPECT_DOUBLE_EQ(mutual_reachability(a, b, 0.8, 0.1), 0.8);
  std::mt19937_64 rng(42);
  const auto pts = oracle::uniform_cloud(rng, 50, 1.0);
  const auto core = core_distances(pts, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double m = mutual_reachability(pts[i], pts[j], core[i], core[j]);
      EXPECT_EQ(m, mutual_reachability(pts[j], pts[i], core[j], core[i]));
      EXPECT_GE(m, oracle::dist(pts[i], pts[j]));
    }
  }
}

TEST(Mst, MatchesKruskal) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 17;
    const auto pts = oracle::uniform_cloud(rng, n, 0.3);
    const auto core = oracle::core_distances(pts, 5);
    const auto mst = mutual_reachability_mst(pts, core);
    ASSERT_EQ(mst.size(), n - 1);
    EXPECT_EQ(sorted_weights(mst), oracle::kruskal_weights(pts, core));
    for (const auto& e : mst) EXPECT_LT(e.a, e.b);
  }
}

TEST(Mst, SpansAllPoints) {
  std::mt19937_64 rng(44);
  const auto pts = oracle::uniform_cloud(rng, 100, 1.0);
  const auto mst = mutual_reachability_mst(pts, core_distances(pts, 3));
  oracle::UnionFind uf(pts.size());
  for (const auto& e : mst) EXPECT_TRUE(uf.unite(e.a, e.b));
}

TEST(Hdbscan, TwoBlobsExample) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point3> pts;
    for (const float cx : {0.0f, 0.3f}) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::size_t added = 0;
      while (added < 20) {
        const double x = u(rng), y = u(rng), z = u(rng);
        if (x * x + y * y + z * z > 1.0) continue;
        pts.push_back({static_cast<float>(cx + 0.02 * x), static_cast<float>(0.02 * y),
                       static_cast<float>(1.0 + 0.02 * z)});
        ++added;
      }
    }
    const auto result = hdbscan(pts, {10, 5});
    ASSERT_EQ(result.cluster_count(), 2u);
    EXPECT_EQ(std::count(result.labels.begin(), result.labels.end(), kNoise), 0);
    EXPECT_NEAR(result.centroids[0].x, 0.0, 0.01);
    EXPECT_NEAR(result.centroids[1].x, 0.3, 0.01);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(result.labels[i], i < 20 ? 0 : 1);
  }
}

TEST(Hdbscan, TooFewPointsAllNoise) {
  const std::vector<Point3> pts = {{0, 0, 1}, {0.01f, 0, 1}, {0, 0.01f, 1}, {0.01f, 0.01f, 1}, {0, 0, 1.01f}};
  const auto result = hdbscan(pts, {10, 5});
  EXPECT_EQ(result.cluster_count(), 0u);
  for (const int l : result.labels) EXPECT_EQ(l, kNoise);
}

TEST(Hdbscan, SingleBlobIsOneCluster) {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = oracle::gaussian_blob(rng, {0, 0, 1}, 0.02, 50);
    const auto result = hdbscan(pts, {15, 5});
    EXPECT_EQ(result.cluster_count(), 1u);
    oracle::NaiveHdbscan ref(pts, 15, 5);
    EXPECT_EQ(result.labels, ref.labels());
  }
}

TEST(Hdbscan, MatchesNaiveReference) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> gap(0.03, 0.2);
  std::uniform_int_distribution<int> size(8, 30);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Point3> pts;
    const int blobs = 1 + trial % 3;
    for (int b = 0; b < blobs; ++b) {
      const auto blob = oracle::gaussian_blob(
          rng, {static_cast<float>(b * gap(rng)), static_cast<float>(0.05 * (trial % 2)), 1.0f}, 0.015,
          static_cast<std::size_t>(size(rng)));
      pts.insert(pts.end(), blob.begin(), blob.end());
    }
    const auto noise = oracle::uniform_cloud(rng, static_cast<std::size_t>(trial % 7), 0.3);
    pts.insert(pts.end(), noise.begin(), noise.end());
    for (const std::size_t mcs : {5u, 10u}) {
      const auto result = hdbscan(pts, {mcs, 3});
      oracle::NaiveHdbscan ref(pts, mcs, 3);
      EXPECT_EQ(result.labels, ref.labels()) << "trial " << trial << " mcs " << mcs;
      ++compared;
    }
  }
  EXPECT_EQ(compared, 80);
}

TEST(Hdbscan, TiedLatticeMatchesNaiveReference) {
  for (const int spacing : {4, 5, 7}) {
    std::vector<Point3> pts;
    for (int block = 0; block < 2; ++block) {
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          pts.push_back({0.01f * static_cast<float>(i + block * spacing), 0.01f * static_cast<float>(j), 1.0f});
        }
      }
    }
    for (const std::size_t mcs : {3u, 5u, 8u}) {
      const auto result = hdbscan(pts, {mcs, 2});
      oracle::NaiveHdbscan ref(pts, mcs, 2);
      EXPECT_EQ(result.labels, ref.labels()) << "spacing " << spacing << " mcs " << mcs;
    }
  }
}

TEST(Hdbscan, ResultInvariants) {
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = two_blobs(rng, 40, 0.01, 0.05 + 0.01 * trial);
    const auto extra = oracle::uniform_cloud(rng, 30, 0.3);
    pts.insert(pts.end(), extra.begin(), extra.end());
    const ClusterParams params{15, 5};
    const auto result = hdbscan(pts, params);
    const auto m = static_cast<int>(result.cluster_count());
    std::set<int> seen;
    int first_index_order = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int l = result.labels[i];
      ASSERT_GE(l, kNoise);
      ASSERT_LT(l, m);
      if (l >= 0 && seen.insert(l).second) {
        EXPECT_EQ(l, first_index_order + 1);
        first_index_order = l;
      }
    }
    EXPECT_EQ(static_cast<int>(seen.size()), m);
    const auto members = result.members();
    for (int c = 0; c < m; ++c) {
      EXPECT_GE(result.sizes[static_cast<std::size_t>(c)], params.min_cluster_size);
      EXPECT_EQ(members[static_cast<std::size_t>(c)].size(), result.sizes[static_cast<std::size_t>(c)]);
      double sx = 0, sy = 0, sz = 0;
      for (const auto i : members[static_cast<std::size_t>(c)]) {
        sx += pts[i].x;
        sy += pts[i].y;
        sz += pts[i].z;
      }
      const double n = static_cast<double>(members[static_cast<std::size_t>(c)].size());
      EXPECT_NEAR(result.centroids[static_cast<std::size_t>(c)].x, sx / n, 1e-6);
      EXPECT_NEAR(result.centroids[static_cast<std::size_t>(c)].y, sy / n, 1e-6);
      EXPECT_NEAR(result.centroids[static_cast<std::size_t>(c)].z, sz / n, 1e-6);
    }
  }
}

TEST(Hdbscan, ClusterCountPermutationInvariant) {
  std::mt19937_64 rng(49);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = two_blobs(rng, 30, 0.01, 0.1);
    const auto third = oracle::gaussian_blob(rng, {0.05f, 0.1f, 1.0f}, 0.01, 30);
    pts.insert(pts.end(), third.begin(), third.end());
    const auto base = hdbscan(pts, {15, 5}).cluster_count();
    std::shuffle(pts.begin(), pts.end(), rng);
    EXPECT_EQ(hdbscan(pts, {15, 5}).cluster_count(), base);
  }
}

TEST(Hdbscan, SeparationProperty) {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = two_blobs(rng, 25, 0.01, 0.5);
    const auto result = hdbscan(pts, {15, 5});
    ASSERT_EQ(result.cluster_count(), 2u);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(result.labels[i], i < 25 ? 0 : 1);
  }
}

TEST(Hdbscan, ParamValidation) {
  EXPECT_THROW((ClusterParams{1, 5}).validate(), ParameterError);
  EXPECT_THROW((ClusterParams{5, 0}).validate(), ParameterError);
  EXPECT_NO_THROW((ClusterParams{2, 1}).validate());
}

TEST(Centroids, Examples) {
  const std::vector<Point3> pts = {{0, 0, 1}, {2, 0, 1}, {7, 7, 7}};
  const std::vector<int> labels = {0, 0, 1};
  const auto c = centroids(labels, pts);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Point3{1, 0, 1}));
  EXPECT_EQ(c[1], pts[2]);
}

TEST(Centroids, TranslationEquivariant) {
  std::mt19937_64 rng(51);
  const auto pts = two_blobs(rng, 30, 0.01, 0.2);
  const auto result = hdbscan(pts, {15, 5});
  std::vector<Point3> moved;
  for (const auto& p : pts) moved.push_back({p.x + 0.5f, p.y, p.z});
  const auto shifted = centroids(result.labels, moved);
  for (std::size_t c = 0; c < shifted.size(); ++c) {
    EXPECT_NEAR(shifted[c].x, result.centroids[c].x + 0.5, 1e-5);
    EXPECT_NEAR(shifted[c].z, result.centroids[c].z, 1e-6);
  }
}

TEST(CondensedTree, LambdaOfCoincidentPointsIsFinite) {
  EXPECT_TRUE(std::isfinite(lambda_of(0.0)));
  EXPECT_DOUBLE_EQ(lambda_of(0.5), 2.0);
}

#include "sanitrack/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sanitrack/kdtree.hpp"

namespace sanitrack {

namespace {

constexpr double kMinDistance = 1e-12;

struct Merge {
  std::uint32_t left;
  std::uint32_t right;
  double distance;
  std::size_t size;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), label_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
    std::iota(label_.begin(), label_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Joins the sets and tags the result with a new dendrogram node label.
  void unite(std::uint32_t a, std::uint32_t b, std::uint32_t new_label) {
    const auto ra = find(a);
    const auto rb = find(b);
    parent_[rb] = ra;
    label_[ra] = new_label;
  }

  std::uint32_t label(std::uint32_t x) { return label_[find(x)]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> label_;
};

}  // namespace

void ClusterParams::validate() const {
  if (min_cluster_size < 2) throw ParameterError("min_cluster_size must be at least 2");
  if (min_samples < 1) throw ParameterError("min_samples must be at least 1");
}

std::vector<std::vector<std::uint32_t>> ClusterResult::members() const {
  std::vector<std::vector<std::uint32_t>> out(sizes.size());
  for (std::uint32_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

double lambda_of(double distance) { return 1.0 / std::max(distance, kMinDistance); }

std::vector<double> core_distances(std::span<const Point3> points, std::size_t k) {
  if (k < 1) throw ParameterError("core distance needs k >= 1");
  if (points.size() <= k) {
    throw ParameterError("core distance needs more than k = " + std::to_string(k) + " points, got " +
                         std::to_string(points.size()));
  }
  const KdTree tree(points);
  std::vector<double> core(points.size());
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const auto nn = tree.knn(points[i], k, i);
    core[i] = std::sqrt(nn.back().sq_dist);
  }
  return core;
}

double mutual_reachability(const Point3& a, const Point3& b, double core_a, double core_b) {
  return std::max({core_a, core_b, distance(a, b)});
}

std::vector<MstEdge> mutual_reachability_mst(std::span<const Point3> points,
                                             std::span<const double> core) {
  const std::size_t n = points.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);

  // Dense Prim over the vertices not yet in the tree, kept in a compact array.
  std::vector<std::uint32_t> rest(n - 1);
  std::vector<double> key(n - 1, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> link(n - 1, 0);
  std::vector<double> xs(n - 1), ys(n - 1), zs(n - 1), cs(n - 1);
  for (std::uint32_t v = 1; v < n; ++v) {
    rest[v - 1] = v;
    xs[v - 1] = points[v].x;
    ys[v - 1] = points[v].y;
    zs[v - 1] = points[v].z;
    cs[v - 1] = core[v];
  }
  std::uint32_t current = 0;
  for (std::size_t left = n - 1; left > 0; --left) {
    const double px = points[current].x, py = points[current].y, pz = points[current].z;
    const double cc = core[current];
    std::size_t best = 0;
    for (std::size_t r = 0; r < left; ++r) {
      const double floor_w = std::max(cc, cs[r]);
      if (floor_w < key[r]) {
        const double dx = xs[r] - px, dy = ys[r] - py, dz = zs[r] - pz;
        const double w = std::max(floor_w, std::sqrt(dx * dx + dy * dy + dz * dz));
        if (w < key[r]) {
          key[r] = w;
          link[r] = current;
        }
      }
      if (key[r] < key[best] || (key[r] == key[best] && rest[r] < rest[best])) best = r;
    }
    const std::uint32_t v = rest[best];
    edges.push_back({std::min(v, link[best]), std::max(v, link[best]), key[best]});
    current = v;
    const std::size_t last = left - 1;
    rest[best] = rest[last];
    key[best] = key[last];
    link[best] = link[last];
    xs[best] = xs[last];
    ys[best] = ys[last];
    zs[best] = zs[last];
    cs[best] = cs[last];
  }
  return edges;
}

std::vector<CondensedEntry> condense_tree(std::vector<MstEdge> mst, std::size_t n_points,
                                          std::size_t min_cluster_size) {
  std::vector<CondensedEntry> tree;
  if (n_points < 2 || mst.size() + 1 != n_points) return tree;

  std::sort(mst.begin(), mst.end(), [](const MstEdge& l, const MstEdge& r) {
    if (l.weight != r.weight) return l.weight < r.weight;
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });

  // Single-linkage dendrogram: node n + i is the i-th merge.
  const auto n = static_cast<std::uint32_t>(n_points);
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  UnionFind uf(2 * n - 1);
  std::vector<std::size_t> node_size(2 * n - 1, 1);
  for (std::uint32_t i = 0; i < mst.size(); ++i) {
    const auto left = uf.label(mst[i].a);
    const auto right = uf.label(mst[i].b);
    const std::uint32_t node = n + i;
    node_size[node] = node_size[left] + node_size[right];
    merges.push_back({left, right, mst[i].weight, node_size[node]});
    uf.unite(mst[i].a, mst[i].b, node);
  }

  const std::uint32_t root = 2 * n - 2;
  std::vector<std::uint32_t> relabel(2 * n - 1, 0);
  std::uint32_t next_cluster = 1;  // cluster 0 is the root

  // Emits every leaf below `node` as a point falling out of `cluster` at `lambda`.
  std::vector<std::uint32_t> stack;
  const auto spill = [&](std::uint32_t node, std::uint32_t cluster, double lambda) {
    stack.assign(1, node);
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      if (x < n) {
        tree.push_back({cluster, x, lambda, 1, false});
      } else {
        stack.push_back(merges[x - n].left);
        stack.push_back(merges[x - n].right);
      }
    }
  };

  // Components left when every edge of the node's weight is cut at once.
  std::vector<std::uint32_t> parts;
  const auto split_at = [&](std::uint32_t node, double distance) {
    parts.clear();
    stack.assign(1, node);
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      if (x >= n && merges[x - n].distance == distance) {
        stack.push_back(merges[x - n].right);
        stack.push_back(merges[x - n].left);
      } else {
        parts.push_back(x);
      }
    }
  };

  // Breadth-first from the root so parent clusters get smaller ids than children.
  std::vector<std::uint32_t> queue{root};
  std::vector<std::uint32_t> big;
  std::vector<std::uint32_t> small;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::uint32_t node = queue[head];
    if (node < n) continue;
    const double distance = merges[node - n].distance;
    const std::uint32_t cluster = relabel[node];
    const double lambda = lambda_of(distance);
    split_at(node, distance);
    big.clear();
    small.clear();
    for (const auto part : parts) (node_size[part] >= min_cluster_size ? big : small).push_back(part);

    for (const auto part : small) spill(part, cluster, lambda);
    if (big.size() >= 2) {
      for (const auto child : big) {
        relabel[child] = next_cluster++;
        tree.push_back({cluster, relabel[child], lambda, node_size[child], true});
        queue.push_back(child);
      }
    } else if (big.size() == 1) {
      relabel[big[0]] = cluster;
      queue.push_back(big[0]);
    }
  }
  return tree;
}

std::vector<bool> select_clusters(const std::vector<CondensedEntry>& tree) {
  std::uint32_t clusters = 1;
  for (const auto& e : tree) {
    clusters = std::max(clusters, e.parent + 1);
    if (e.child_is_cluster) clusters = std::max(clusters, e.child + 1);
  }

  std::vector<double> birth(clusters, 0.0);
  std::vector<std::vector<std::uint32_t>> children(clusters);
  for (const auto& e : tree) {
    if (e.child_is_cluster) {
      birth[e.child] = e.lambda;
      children[e.parent].push_back(e.child);
    }
  }
  std::vector<double> stability(clusters, 0.0);
  for (const auto& e : tree) {
    stability[e.parent] += (e.lambda - birth[e.parent]) * static_cast<double>(e.size);
  }

  // Children always carry larger ids than their parent, so a reverse sweep is bottom-up.
  std::vector<bool> selected(clusters, false);
  std::vector<double> best(clusters, 0.0);
  for (std::uint32_t c = clusters; c-- > 0;) {
    if (children[c].empty()) {
      selected[c] = true;
      best[c] = stability[c];
      continue;
    }
    double subtree = 0.0;
    for (const auto ch : children[c]) subtree += best[ch];
    if (subtree > stability[c]) {
      best[c] = subtree;
    } else {
      best[c] = stability[c];
      selected[c] = true;
      std::vector<std::uint32_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const auto x = stack.back();
        stack.pop_back();
        selected[x] = false;
        stack.insert(stack.end(), children[x].begin(), children[x].end());
      }
    }
  }
  return selected;
}

ClusterResult hdbscan(std::span<const Point3> points, const ClusterParams& params) {
  params.validate();
  const std::size_t n = points.size();
  ClusterResult result;
  result.labels.assign(n, kNoise);
  if (n < params.min_cluster_size || n < 2) return result;

  const std::size_t k = std::min(params.min_samples, n - 1);
  const auto core = core_distances(points, k);
  const auto tree = condense_tree(mutual_reachability_mst(points, core), n, params.min_cluster_size);
  const auto selected = select_clusters(tree);

  // Resolve each cluster to its selected ancestor-or-self.
  const auto clusters = static_cast<std::uint32_t>(selected.size());
  std::vector<std::int64_t> parent_of(clusters, -1);
  for (const auto& e : tree) {
    if (e.child_is_cluster) parent_of[e.child] = e.parent;
  }
  std::vector<std::int64_t> owner(clusters, -1);
  for (std::uint32_t c = 0; c < clusters; ++c) {  // parents precede children
    if (selected[c]) {
      owner[c] = c;
    } else if (parent_of[c] >= 0) {
      owner[c] = owner[static_cast<std::size_t>(parent_of[c])];
    }
  }

  std::vector<std::int64_t> raw(n, -1);
  for (const auto& e : tree) {
    if (!e.child_is_cluster) raw[e.child] = owner[e.parent];
  }

  // Number clusters by their smallest member index.
  std::vector<int> dense(clusters, kNoise);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] < 0) continue;
    auto& d = dense[static_cast<std::size_t>(raw[i])];
    if (d == kNoise) d = next++;
    result.labels[i] = d;
  }
  result.sizes.assign(static_cast<std::size_t>(next), 0);
  for (const int l : result.labels) {
    if (l >= 0) ++result.sizes[static_cast<std::size_t>(l)];
  }
  result.centroids = centroids(result.labels, points);
  return result;
}

std::vector<Point3> centroids(std::span<const int> labels, std::span<const Point3> points) {
  int clusters = 0;
  for (const int l : labels) clusters = std::max(clusters, l + 1);
  std::vector<double> sx(clusters, 0.0), sy(clusters, 0.0), sz(clusters, 0.0);
  std::vector<std::size_t> count(clusters, 0);
  for (std::size_t i = 0; i < labels.size() && i < points.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[i]);
    sx[c] += points[i].x;
    sy[c] += points[i].y;
    sz[c] += points[i].z;
    ++count[c];
  }
  std::vector<Point3> out(static_cast<std::size_t>(clusters));
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (count[c] == 0) continue;
    const auto m = static_cast<double>(count[c]);
    out[c] = {static_cast<float>(sx[c] / m), static_cast<float>(sy[c] / m),
              static_cast<float>(sz[c] / m)};
  }
  return out;
}

}  // namespace sanitrack

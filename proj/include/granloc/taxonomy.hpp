/*
Copyright 2026 The granloc Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// Label hierarchies and the coarsening operator c_k, dataset relabeling under
// a coarsening vector, repair of multi-parent DAGs into trees, granularity
// tiers and per-category subsampling.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "granloc/error.hpp"
#include "granloc/manifest.hpp"
#include "granloc/rng.hpp"

namespace granloc {

using NodeId = std::uint32_t;

struct Edge {
  std::string parent;
  std::string child;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct LabelNode {
  NodeId id = 0;
  std::string name;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // in edge insertion order
};

/// Rooted tree over label names. Immutable once built.
class LabelHierarchy {
 public:
  /// Validating constructor behind build_hierarchy().
  static LabelHierarchy from_edges(std::span<const Edge> edges);

  /// Hierarchy consisting of the root alone.
  static LabelHierarchy singleton(std::string root_name) {
    if (root_name.empty()) throw Error(Errc::InvalidArgument, "", "empty node name");
    LabelHierarchy h;
    h.nodes_.push_back(LabelNode{0, std::move(root_name), std::nullopt, {}});
    h.finalize();
    return h;
  }

  NodeId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  const LabelNode& node(NodeId id) const { return nodes_.at(id); }
  const std::string& name(NodeId id) const { return nodes_.at(id).name; }
  const std::vector<LabelNode>& nodes() const { return nodes_; }

  std::optional<NodeId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeId id_of(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw Error(Errc::UnknownNode, std::string(name));
  }

  bool contains(NodeId id) const { return id < nodes_.size(); }
  bool is_leaf(NodeId id) const { return nodes_.at(id).children.empty(); }

  /// Leaf ids in ascending id order.
  const std::vector<NodeId>& leaves() const { return leaves_; }

  std::size_t depth(NodeId id) const {
    check(id);
    return depth_[id];
  }

  /// Ancestor k edges closer to the root; the root once k >= depth(v).
  NodeId coarsen(NodeId v, std::size_t k) const {
    check(v);
    k = std::min(k, depth_[v]);
    for (; k > 0; --k) v = *nodes_[v].parent;
    return v;
  }

  /// True when `ancestor` lies strictly above `v`.
  bool is_proper_ancestor(NodeId ancestor, NodeId v) const {
    check(ancestor);
    check(v);
    if (depth_[ancestor] >= depth_[v]) return false;
    return coarsen(v, depth_[v] - depth_[ancestor]) == ancestor;
  }

  /// Edges in preorder, children in insertion order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(nodes_.size());
    preorder_edges(root_, out);
    return out;
  }

  friend bool operator==(const LabelHierarchy& a, const LabelHierarchy& b) {
    if (a.size() != b.size()) return false;
    for (const auto& n : a.nodes_) {
      auto other = b.find(n.name);
      if (!other) return false;
      const auto& m = b.node(*other);
      if (n.parent.has_value() != m.parent.has_value()) return false;
      if (n.parent && a.name(*n.parent) != b.name(*m.parent)) return false;
      if (n.children.size() != m.children.size()) return false;
      for (std::size_t i = 0; i < n.children.size(); ++i)
        if (a.name(n.children[i]) != b.name(m.children[i])) return false;
    }
    return true;
  }

 private:
  void check(NodeId id) const {
    if (id >= nodes_.size()) throw Error(Errc::UnknownNode, "#" + std::to_string(id));
  }

  void preorder_edges(NodeId u, std::vector<Edge>& out) const {
    for (NodeId c : nodes_[u].children) {
      out.push_back({nodes_[u].name, nodes_[c].name});
      preorder_edges(c, out);
    }
  }

  void finalize() {
    index_.clear();
    for (const auto& n : nodes_) index_.emplace(n.name, n.id);
    root_ = 0;
    for (const auto& n : nodes_)
      if (!n.parent) root_ = n.id;
    depth_.assign(nodes_.size(), 0);
    leaves_.clear();
    std::vector<NodeId> queue{root_};
    for (std::size_t i = 0; i < queue.size(); ++i) {
      NodeId u = queue[i];
      for (NodeId c : nodes_[u].children) {
        depth_[c] = depth_[u] + 1;
        queue.push_back(c);
      }
    }
    for (const auto& n : nodes_)
      if (n.children.empty()) leaves_.push_back(n.id);
  }

  std::vector<LabelNode> nodes_;
  std::unordered_map<std::string, NodeId> index_;
  NodeId root_ = 0;
  std::vector<std::size_t> depth_;
  std::vector<NodeId> leaves_;
};

inline LabelHierarchy LabelHierarchy::from_edges(std::span<const Edge> edges) {
  if (edges.empty()) throw Error(Errc::InvalidArgument, "", "edge list is empty");
  LabelHierarchy h;
  auto intern = [&](const std::string& name) -> NodeId {
    if (name.empty()) throw Error(Errc::InvalidArgument, "", "empty node name");
    auto [it, inserted] = h.index_.try_emplace(name, static_cast<NodeId>(h.nodes_.size()));
    if (inserted) h.nodes_.push_back(LabelNode{it->second, name, std::nullopt, {}});
    return it->second;
  };
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& e : edges) {
    NodeId p = intern(e.parent);
    NodeId c = intern(e.child);
    if (!seen.emplace(p, c).second)
      throw Error(Errc::DuplicateEdge, e.parent + "," + e.child);
    if (p == c) throw Error(Errc::CycleDetected, e.child);
    auto& child = h.nodes_[c];
    if (child.parent) throw Error(Errc::MultipleParents, e.child);
    child.parent = p;
    h.nodes_[p].children.push_back(c);
  }
  std::vector<NodeId> roots;
  for (const auto& n : h.nodes_)
    if (!n.parent) roots.push_back(n.id);
  // every node has one parent: a rootless component must close a cycle
  if (roots.empty()) throw Error(Errc::CycleDetected, h.nodes_.front().name);
  if (roots.size() > 1)
    throw Error(Errc::MultipleRoots, h.nodes_[roots[0]].name + "," + h.nodes_[roots[1]].name);
  std::vector<bool> reached(h.nodes_.size(), false);
  std::vector<NodeId> queue{roots[0]};
  reached[roots[0]] = true;
  for (std::size_t i = 0; i < queue.size(); ++i)
    for (NodeId c : h.nodes_[queue[i]].children)
      if (!reached[c]) {
        reached[c] = true;
        queue.push_back(c);
      }
  for (const auto& n : h.nodes_)
    if (!reached[n.id]) throw Error(Errc::CycleDetected, n.name);
  h.finalize();
  return h;
}

inline LabelHierarchy build_hierarchy(std::span<const Edge> edges) {
  return LabelHierarchy::from_edges(edges);
}

inline std::size_t depth(const LabelHierarchy& h, std::string_view node) {
  return h.depth(h.id_of(node));
}

inline const std::string& coarsen(const LabelHierarchy& h, std::string_view node, std::size_t k) {
  return h.name(h.coarsen(h.id_of(node), k));
}

// ---------------------------------------------------------------------------
// Dataset coarsening

/// Relabels every sample i with c_{k_i}(y_i). The coarsened label set must be
/// an antichain; otherwise InvalidCoarsening names the first sample (in order)
/// whose label lies below another sample's label, and that other sample.
inline Manifest coarsen_dataset(const LabelHierarchy& h, const Manifest& manifest,
                                std::span<const std::size_t> k_vector) {
  if (k_vector.size() != manifest.size())
    throw Error(Errc::InvalidArgument, "k_vector",
                "length " + std::to_string(k_vector.size()) + " != " +
                    std::to_string(manifest.size()) + " samples");
  Manifest out = manifest;
  std::vector<NodeId> coarse(manifest.size());
  std::unordered_map<NodeId, std::size_t> first_with_label;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& label = manifest.records[i].label;
    auto id = h.find(label);
    if (!id) throw Error(Errc::UnknownLabel, manifest.records[i].image_id, label);
    if (!h.is_leaf(*id))
      throw Error(Errc::InvalidArgument, manifest.records[i].image_id,
                  "label " + label + " is not a leaf");
    coarse[i] = h.coarsen(*id, k_vector[i]);
    first_with_label.try_emplace(coarse[i], i);
    out.records[i].label = h.name(coarse[i]);
  }
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    NodeId v = coarse[i];
    while (h.node(v).parent) {
      v = *h.node(v).parent;
      if (auto it = first_with_label.find(v); it != first_with_label.end())
        throw Error(Errc::InvalidCoarsening,
                    "samples " + std::to_string(i) + "," + std::to_string(it->second),
                    h.name(coarse[i]) + " is a descendant of " + h.name(v));
    }
  }
  return out;
}

inline Manifest coarsen_dataset(const LabelHierarchy& h, const Manifest& manifest, std::size_t k) {
  std::vector<std::size_t> ks(manifest.size(), k);
  return coarsen_dataset(h, manifest, ks);
}

// ---------------------------------------------------------------------------
// DAG repair

/// Label graph in which a node may have several parents.
class LabelDag {
 public:
  /// Duplicate edges are collapsed. Throws CyclicInput or MultipleRoots.
  static LabelDag from_edges(std::span<const Edge> edges) {
    if (edges.empty()) throw Error(Errc::InvalidArgument, "", "edge list is empty");
    LabelDag d;
    auto intern = [&](const std::string& name) -> std::size_t {
      if (name.empty()) throw Error(Errc::InvalidArgument, "", "empty node name");
      auto [it, inserted] = d.index_.try_emplace(name, d.names_.size());
      if (inserted) {
        d.names_.push_back(name);
        d.children_.emplace_back();
        d.parents_.emplace_back();
      }
      return it->second;
    };
    for (const auto& e : edges) {
      std::size_t p = intern(e.parent);
      std::size_t c = intern(e.child);
      if (p == c) throw Error(Errc::CyclicInput, e.child);
      if (std::find(d.children_[p].begin(), d.children_[p].end(), c) != d.children_[p].end())
        continue;
      d.children_[p].push_back(c);
      d.parents_[c].push_back(p);
    }
    // Kahn's algorithm: anything left unvisited sits on a cycle
    std::vector<std::size_t> indeg(d.names_.size());
    std::vector<std::size_t> queue;
    for (std::size_t i = 0; i < d.names_.size(); ++i) {
      indeg[i] = d.parents_[i].size();
      if (indeg[i] == 0) queue.push_back(i);
    }
    for (std::size_t i = 0; i < queue.size(); ++i)
      for (std::size_t c : d.children_[queue[i]])
        if (--indeg[c] == 0) queue.push_back(c);
    if (queue.size() != d.names_.size()) {
      for (std::size_t i = 0; i < d.names_.size(); ++i)
        if (indeg[i] != 0) throw Error(Errc::CyclicInput, d.names_[i]);
    }
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < d.names_.size(); ++i)
      if (d.parents_[i].empty()) roots.push_back(i);
    if (roots.size() != 1)
      throw Error(Errc::MultipleRoots, d.names_[roots[0]] + "," + d.names_[roots[1]]);
    d.root_ = roots[0];
    return d;
  }

  std::size_t size() const { return names_.size(); }
  std::size_t root() const { return root_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
  bool is_leaf(std::size_t i) const { return children_[i].empty(); }

  std::vector<std::string> leaf_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (children_[i].empty()) out.push_back(names_[i]);
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> parents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t root_ = 0;
};

/// Which parent a multi-parent node kept, for reporting.
struct ParentChoice {
  std::string node;
  std::string kept_parent;
  std::size_t reachable_leaves = 0;
  std::vector<std::string> deleted_parents;
};

struct DagResolution {
  LabelHierarchy hierarchy;
  std::vector<ParentChoice> choices;
};

namespace detail {

// `root_cut[c]` drops the edge root -> c while keeping both nodes.
inline std::vector<bool> reachable_from(const LabelDag& dag, std::size_t root, const std::vector<bool>& alive,
                                        const std::vector<bool>& root_cut) {
  std::vector<bool> seen(dag.size(), false);
  if (!alive[root]) return seen;
  std::vector<std::size_t> stack{root};
  seen[root] = true;
  while (!stack.empty()) {
    std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t c : dag.children(u))
      if (alive[c] && !seen[c] && !(u == root && root_cut[c])) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  return seen;
}

}  // namespace detail

/// Greedy multi-parent repair. Multi-parent nodes are visited in ascending
/// name order. For each, every surviving parent is tried in turn: the other
/// parents are deleted, and the original leaves still reachable from the root
/// are counted against the current (partially repaired) graph. The parent
/// with the largest count is kept (ties: smallest name), the others are
/// deleted along with everything no longer reachable. The root is never
/// deleted: when it loses, only its edge to the node is cut. Internal nodes
/// left without children are deleted rather than becoming new leaves.
inline DagResolution resolve_dag_detailed(const LabelDag& dag) {
  const std::size_t n = dag.size();
  const std::size_t root = dag.root();
  std::vector<bool> alive(n, true);
  std::vector<bool> root_cut(n, false);
  std::vector<std::size_t> multi;
  for (std::size_t i = 0; i < n; ++i)
    if (dag.parents(i).size() > 1) multi.push_back(i);
  std::sort(multi.begin(), multi.end(),
            [&](std::size_t a, std::size_t b) { return dag.name(a) < dag.name(b); });

  auto count_leaves = [&](const std::vector<bool>& reach) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i] && dag.is_leaf(i)) ++count;
    return count;
  };

  std::vector<ParentChoice> choices;
  for (std::size_t m : multi) {
    if (!alive[m]) continue;
    std::vector<std::size_t> parents;
    for (std::size_t p : dag.parents(m))
      if (alive[p] && !(p == root && root_cut[m])) parents.push_back(p);
    if (parents.size() < 2) continue;

    std::size_t best = parents[0];
    std::size_t best_count = 0;
    bool have_best = false;
    for (std::size_t p : parents) {
      std::vector<bool> trial = alive;
      std::vector<bool> trial_cut = root_cut;
      for (std::size_t q : parents) {
        if (q == p) continue;
        if (q == root) trial_cut[m] = true;
        else trial[q] = false;
      }
      std::size_t count = count_leaves(detail::reachable_from(dag, root, trial, trial_cut));
      if (!have_best || count > best_count ||
          (count == best_count && dag.name(p) < dag.name(best))) {
        best = p;
        best_count = count;
        have_best = true;
      }
    }
    ParentChoice choice{dag.name(m), dag.name(best), best_count, {}};
    for (std::size_t q : parents)
      if (q != best) {
        if (q == root) root_cut[m] = true;
        else alive[q] = false;
        choice.deleted_parents.push_back(dag.name(q));
      }
    std::sort(choice.deleted_parents.begin(), choice.deleted_parents.end());
    auto reach = detail::reachable_from(dag, root, alive, root_cut);
    for (std::size_t i = 0; i < n; ++i) alive[i] = alive[i] && reach[i];
    choices.push_back(std::move(choice));
  }
  // drop internal nodes that lost every child
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i] || dag.is_leaf(i) || i == root) continue;
      bool any = std::any_of(dag.children(i).begin(), dag.children(i).end(),
                             [&](std::size_t c) { return alive[c]; });
      if (!any) {
        alive[i] = false;
        changed = true;
      }
    }
  }

  std::vector<Edge> edges;
  // preorder keeps the input child order
  auto visit = [&](auto&& self, std::size_t u) -> void {
    for (std::size_t c : dag.children(u)) {
      if (!alive[c] || (u == root && root_cut[c])) continue;
      edges.push_back({dag.name(u), dag.name(c)});
      self(self, c);
    }
  };
  visit(visit, dag.root());
  if (edges.empty()) {
    if (dag.is_leaf(dag.root()))
      return {LabelHierarchy::singleton(dag.name(dag.root())), std::move(choices)};
    throw Error(Errc::EmptyResult, dag.name(dag.root()));
  }
  return {LabelHierarchy::from_edges(edges), std::move(choices)};
}

inline LabelHierarchy resolve_dag(const LabelDag& dag) {
  return resolve_dag_detailed(dag).hierarchy;
}

// ---------------------------------------------------------------------------
// Granularity tiers

struct Consistency {
  bool consistent = false;
  std::size_t depth = 0;  ///< common leaf depth, meaningful when consistent
};

/// A hierarchy is consistent when every leaf sits at the same depth.
inline Consistency is_consistent(const LabelHierarchy& h) {
  const auto& leaves = h.leaves();
  std::size_t d = h.depth(leaves.front());
  for (NodeId l : leaves)
    if (h.depth(l) != d) return {false, 0};
  return {true, d};
}

/// Names of all nodes at exactly `tier_depth`, sorted.
inline std::vector<std::string> tier_labels(const LabelHierarchy& h, std::size_t tier_depth) {
  auto c = is_consistent(h);
  if (!c.consistent) throw Error(Errc::InconsistentHierarchy, h.name(h.root()));
  if (tier_depth > c.depth)
    throw Error(Errc::DepthOutOfRange, std::to_string(tier_depth),
                "leaf depth is " + std::to_string(c.depth));
  std::vector<std::string> out;
  for (const auto& n : h.nodes())
    if (h.depth(n.id) == tier_depth) out.push_back(n.name);
  std::sort(out.begin(), out.end());
  return out;
}

struct TierStats {
  std::string granularity_name;
  std::size_t n_categories = 0;
  std::size_t n_images = 0;
  std::size_t min_images = 0;
  std::size_t max_images = 0;
  double mean_images = 0;
  double imbalance_factor = 1.0;  ///< max / min, rounded half-up to 1 decimal
};

/// max/min rounded half-up to one decimal, in exact integer arithmetic.
inline double imbalance_factor(std::size_t max_count, std::size_t min_count) {
  if (min_count == 0) throw Error(Errc::InvalidArgument, "imbalance", "empty category");
  const std::uint64_t tenths = (20 * static_cast<std::uint64_t>(max_count) + min_count) /
                               (2 * static_cast<std::uint64_t>(min_count));
  return static_cast<double>(tenths) / 10.0;
}

/// Per-category image counts after lifting every sample label to
/// `tier_depth`. Only occupied categories count.
inline std::map<std::string, std::size_t> tier_counts(const LabelHierarchy& h,
                                                      const Manifest& manifest,
                                                      std::size_t tier_depth) {
  auto c = is_consistent(h);
  if (!c.consistent) throw Error(Errc::InconsistentHierarchy, h.name(h.root()));
  if (tier_depth > c.depth)
    throw Error(Errc::DepthOutOfRange, std::to_string(tier_depth),
                "leaf depth is " + std::to_string(c.depth));
  std::vector<std::size_t> per_node(h.size(), 0);
  for (const auto& r : manifest.records) {
    auto id = h.find(r.label);
    if (!id) throw Error(Errc::UnknownLabel, r.image_id, r.label);
    std::size_t d = h.depth(*id);
    if (d < tier_depth)
      throw Error(Errc::DepthOutOfRange, r.image_id,
                  "label " + r.label + " lies above tier " + std::to_string(tier_depth));
    ++per_node[h.coarsen(*id, d - tier_depth)];
  }
  std::map<std::string, std::size_t> out;
  for (NodeId i = 0; i < h.size(); ++i)
    if (per_node[i] > 0) out.emplace(h.name(i), per_node[i]);
  return out;
}

inline TierStats tier_stats(const LabelHierarchy& h, const Manifest& manifest,
                            std::size_t tier_depth, std::string granularity_name = {}) {
  if (granularity_name.empty()) granularity_name = "depth_" + std::to_string(tier_depth);
  auto counts = tier_counts(h, manifest, tier_depth);
  TierStats s;
  s.granularity_name = std::move(granularity_name);
  if (counts.empty()) throw Error(Errc::EmptySampleSet, s.granularity_name);
  s.n_categories = counts.size();
  s.min_images = counts.begin()->second;
  for (const auto& [name, n] : counts) {
    s.n_images += n;
    s.min_images = std::min(s.min_images, n);
    s.max_images = std::max(s.max_images, n);
  }
  s.mean_images = static_cast<double>(s.n_images) / static_cast<double>(s.n_categories);
  s.imbalance_factor = imbalance_factor(s.max_images, s.min_images);
  return s;
}

// ---------------------------------------------------------------------------
// Subsampling

struct SubsampleResult {
  Manifest manifest;
  std::size_t short_categories = 0;  ///< categories with fewer than n samples, kept whole
};

/// Keeps min(n, size) samples of every label, drawn uniformly without
/// replacement. Each label gets its own stream SplitMix64::keyed(seed, label);
/// the draw is a partial Fisher-Yates shuffle over the label's samples in
/// input order (for i in 0..k-1: j = i + below(size - i); swap(i, j)), and
/// the first k positions are kept. Output preserves input order.
inline SubsampleResult subsample_per_category(const Manifest& manifest, std::size_t n_per_category,
                                              std::uint64_t seed) {
  if (n_per_category == 0) throw Error(Errc::InvalidArgument, "n_per_category", "must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    by_label[manifest.records[i].label].push_back(i);

  SubsampleResult result;
  std::vector<bool> keep(manifest.size(), false);
  for (auto& [label, members] : by_label) {
    const std::size_t k = std::min(n_per_category, members.size());
    if (members.size() < n_per_category) ++result.short_categories;
    auto rng = SplitMix64::keyed(seed, label);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(members.size() - i));
      std::swap(members[i], members[j]);
    }
    for (std::size_t i = 0; i < k; ++i) keep[members[i]] = true;
  }
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (keep[i]) result.manifest.records.push_back(manifest.records[i]);
  return result;
}

}  // namespace granloc

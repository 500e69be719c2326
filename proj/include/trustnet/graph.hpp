#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trustnet/numerics.hpp"

namespace trustnet {

/// Dense user index in 0..n-1.
enum class UserId : std::uint32_t {};

constexpr std::uint32_t index(UserId u) noexcept { return static_cast<std::uint32_t>(u); }
constexpr UserId user(std::size_t i) noexcept { return static_cast<UserId>(i); }

/// Identifier as it appears in an input file.
using RawId = std::int64_t;

struct TrustEdge {
  UserId trustor;
  UserId trustee;

  friend bool operator==(const TrustEdge&, const TrustEdge&) = default;
};

using RawPair = std::pair<RawId, RawId>;

struct ParsedEdgeList {
  std::vector<RawPair> pairs;
  std::size_t self_loops = 0;
};

/// Two integer tokens per line, separated by whitespace or one comma. Blank lines and
/// lines starting with '#' are skipped; self-loops are dropped and counted.
/// Throws ParseError carrying the 1-based line number.
ParsedEdgeList parse_edge_list(std::istream& in);
ParsedEdgeList parse_edge_list_file(const std::string& path);

/// Directed trust graph. Immutable once built.
class TrustGraph {
 public:
  /// `raw_ids[i]` is the external id of dense user i. Edges must be unique and loop-free.
  TrustGraph(std::vector<RawId> raw_ids, std::vector<TrustEdge> edges);

  std::size_t num_users() const noexcept { return raw_ids_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const TrustEdge> edges() const noexcept { return edges_; }

  std::span<const UserId> out_neighbors(UserId u) const { return out_adj_.at(index(u)); }
  std::span<const UserId> in_neighbors(UserId u) const { return in_adj_.at(index(u)); }
  std::size_t out_degree(UserId u) const { return out_adj_.at(index(u)).size(); }
  std::size_t in_degree(UserId u) const { return in_adj_.at(index(u)).size(); }

  bool has_edge(UserId r, UserId s) const { return edge_set_.contains(key(r, s)); }
  bool contains(UserId u) const noexcept { return index(u) < num_users(); }

  RawId raw_id(UserId u) const { return raw_ids_.at(index(u)); }
  std::span<const RawId> raw_ids() const noexcept { return raw_ids_; }
  /// Dense id for an external id, if the user exists.
  std::optional<UserId> find(RawId raw) const;

  /// Repeated input pairs dropped by build_graph.
  std::size_t duplicates_dropped() const noexcept { return duplicates_dropped_; }

 private:
  friend TrustGraph build_graph(std::span<const RawPair> pairs);

  static std::uint64_t key(UserId r, UserId s) noexcept {
    return (static_cast<std::uint64_t>(index(r)) << 32) | index(s);
  }

  std::vector<RawId> raw_ids_;
  std::unordered_map<RawId, UserId> dense_;
  std::vector<TrustEdge> edges_;
  std::unordered_set<std::uint64_t> edge_set_;
  std::vector<std::vector<UserId>> out_adj_;
  std::vector<std::vector<UserId>> in_adj_;
  std::size_t duplicates_dropped_ = 0;
};

/// Dense ids are assigned in order of first appearance; repeated pairs are dropped.
TrustGraph build_graph(std::span<const RawPair> pairs);

/// Writes the edges in graph order as raw-id pairs. Re-parsing and rebuilding yields the
/// same dense mapping and edge order.
void write_edge_list(std::ostream& out, const TrustGraph& graph);
void write_edge_list(std::ostream& out, const TrustGraph& graph,
                     std::span<const TrustEdge> edges);

struct EdgeSplit {
  std::vector<TrustEdge> train;
  std::vector<TrustEdge> test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

/// Uniform random permutation of the edges; the first round(ratio * |E|) are train.
EdgeSplit split_edges(const TrustGraph& graph, double ratio, std::uint64_t seed);

inline constexpr int kNegativeSampleAttempts = 1000;

/// Uniform ordered pair (r, s) with r != s and no edge r -> s, by rejection sampling.
/// Throws InfeasibleSampling after kNegativeSampleAttempts rejections.
TrustEdge sample_negative_pair(const TrustGraph& graph, Rng& rng);

enum class DegreeClass { Low, High };

inline constexpr std::size_t kDefaultDegreeThreshold = 5;

constexpr DegreeClass degree_class(std::size_t degree,
                                   std::size_t threshold = kDefaultDegreeThreshold) noexcept {
  return degree < threshold ? DegreeClass::Low : DegreeClass::High;
}

const char* to_string(DegreeClass c) noexcept;

}  // namespace trustnet

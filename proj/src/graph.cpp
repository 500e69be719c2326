#include "trustnet/graph.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace trustnet {

namespace {

constexpr std::string_view kSpace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kSpace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kSpace);
  return s.substr(b, e - b + 1);
}

bool parse_int(std::string_view token, RawId& out) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  if (const auto comma = line.find(','); comma != std::string_view::npos) {
    tokens.push_back(trim(line.substr(0, comma)));
    tokens.push_back(trim(line.substr(comma + 1)));
    return tokens;
  }
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto b = line.find_first_not_of(kSpace, pos);
    if (b == std::string_view::npos) break;
    auto e = line.find_first_of(kSpace, b);
    if (e == std::string_view::npos) e = line.size();
    tokens.push_back(line.substr(b, e - b));
    pos = e;
  }
  return tokens;
}

}  // namespace

ParsedEdgeList parse_edge_list(std::istream& in) {
  ParsedEdgeList result;
  std::string buffer;
  std::size_t line_no = 0;
  while (std::getline(in, buffer)) {
    ++line_no;
    const auto line = trim(buffer);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = split_tokens(line);
    if (tokens.size() != 2) {
      throw ParseError(line_no, "expected two ids, found " + std::to_string(tokens.size()) +
                                    " tokens");
    }
    RawId r = 0;
    RawId s = 0;
    if (!parse_int(tokens[0], r) || !parse_int(tokens[1], s)) {
      throw ParseError(line_no, "non-integer id in '" + std::string(line) + "'");
    }
    if (r == s) {
      ++result.self_loops;
      continue;
    }
    result.pairs.emplace_back(r, s);
  }
  return result;
}

ParsedEdgeList parse_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list '" + path + "'");
  return parse_edge_list(in);
}

TrustGraph::TrustGraph(std::vector<RawId> raw_ids, std::vector<TrustEdge> edges)
    : raw_ids_(std::move(raw_ids)),
      edges_(std::move(edges)),
      out_adj_(raw_ids_.size()),
      in_adj_(raw_ids_.size()) {
  dense_.reserve(raw_ids_.size());
  for (std::size_t i = 0; i < raw_ids_.size(); ++i) {
    if (!dense_.emplace(raw_ids_[i], user(i)).second) {
      throw DataError("duplicate raw id " + std::to_string(raw_ids_[i]));
    }
  }
  edge_set_.reserve(edges_.size());
  for (const auto& e : edges_) {
    if (!contains(e.trustor) || !contains(e.trustee)) {
      throw std::out_of_range("TrustGraph: edge endpoint out of range");
    }
    if (e.trustor == e.trustee) throw DataError("TrustGraph: self-loop");
    if (!edge_set_.insert(key(e.trustor, e.trustee)).second) {
      throw DataError("TrustGraph: duplicate edge");
    }
    out_adj_[index(e.trustor)].push_back(e.trustee);
    in_adj_[index(e.trustee)].push_back(e.trustor);
  }
}

std::optional<UserId> TrustGraph::find(RawId raw) const {
  const auto it = dense_.find(raw);
  if (it == dense_.end()) return std::nullopt;
  return it->second;
}

TrustGraph build_graph(std::span<const RawPair> pairs) {
  if (pairs.empty()) throw DataError("edge list contains no edges");
  std::vector<RawId> raw_ids;
  std::unordered_map<RawId, UserId> dense;
  auto intern = [&](RawId raw) {
    const auto [it, inserted] = dense.emplace(raw, user(raw_ids.size()));
    if (inserted) raw_ids.push_back(raw);
    return it->second;
  };

  std::vector<TrustEdge> edges;
  edges.reserve(pairs.size());
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(pairs.size());
  std::size_t duplicates = 0;
  for (const auto& [r, s] : pairs) {
    if (r == s) throw DataError("self-loop on raw id " + std::to_string(r));
    const UserId ur = intern(r);
    const UserId us = intern(s);
    if (!seen.insert((static_cast<std::uint64_t>(index(ur)) << 32) | index(us)).second) {
      ++duplicates;
      continue;
    }
    edges.push_back({ur, us});
  }
  TrustGraph graph(std::move(raw_ids), std::move(edges));
  graph.duplicates_dropped_ = duplicates;
  return graph;
}

void write_edge_list(std::ostream& out, const TrustGraph& graph,
                     std::span<const TrustEdge> edges) {
  for (const auto& e : edges) {
    out << graph.raw_id(e.trustor) << ' ' << graph.raw_id(e.trustee) << '\n';
  }
}

void write_edge_list(std::ostream& out, const TrustGraph& graph) {
  write_edge_list(out, graph, graph.edges());
}

EdgeSplit split_edges(const TrustGraph& graph, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("split ratio must lie in (0, 1)");
  }
  std::vector<TrustEdge> shuffled(graph.edges().begin(), graph.edges().end());
  Rng rng(seed);
  rng.shuffle(std::span(shuffled));
  const auto n_train =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(shuffled.size())));

  EdgeSplit split;
  split.ratio = ratio;
  split.seed = seed;
  split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  return split;
}

TrustEdge sample_negative_pair(const TrustGraph& graph, Rng& rng) {
  const std::size_t n = graph.num_users();
  if (n >= 2) {
    for (int attempt = 0; attempt < kNegativeSampleAttempts; ++attempt) {
      const UserId r = user(rng.uniform_index(n));
      const UserId s = user(rng.uniform_index(n));
      if (r != s && !graph.has_edge(r, s)) return {r, s};
    }
  }
  throw InfeasibleSampling("no non-edge found after " +
                           std::to_string(kNegativeSampleAttempts) + " attempts");
}

const char* to_string(DegreeClass c) noexcept {
  return c == DegreeClass::Low ? "Low" : "High";
}

}  // namespace trustnet

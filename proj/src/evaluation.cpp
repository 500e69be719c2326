#include "trustnet/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace trustnet {

namespace {

MetricReport summarize(std::size_t n_pairs, std::uint64_t trusted_positives,
                       std::vector<Confusion> runs) {
  MetricReport r;
  r.n_pairs = n_pairs;
  r.accuracy_no_neg =
      n_pairs == 0 ? 0.0 : static_cast<double>(trusted_positives) / static_cast<double>(n_pairs);
  r.runs = runs.size();
  if (!runs.empty()) {
    const auto k = static_cast<double>(runs.size());
    for (const auto& c : runs) {
      r.fscore_mean += c.fscore() / k;
      r.precision_mean += c.precision() / k;
      r.recall_mean += c.recall() / k;
    }
    double var = 0.0;
    for (const auto& c : runs) var += (c.fscore() - r.fscore_mean) * (c.fscore() - r.fscore_mean);
    r.fscore_std = std::sqrt(var / k);
  }
  r.per_run = std::move(runs);
  return r;
}

Confusion balanced_run(std::uint64_t trusted_positives, std::size_t n_pos,
                       std::uint64_t trusted_negatives, std::size_t n_neg) {
  Confusion c;
  c.tp = trusted_positives;
  c.fn = n_pos - trusted_positives;
  c.fp = trusted_negatives;
  c.tn = n_neg - trusted_negatives;
  return c;
}

std::string fmt_fraction(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

TrustPredictor predictor_for(const TrainedModel& model, float threshold) {
  return [&model, threshold](UserId r, UserId s) { return predict(model, r, s, threshold).trust; };
}

std::uint64_t count_trusted(const TrustPredictor& predict, std::span<const TrustEdge> pairs,
                            unsigned threads) {
  auto count_range = [&](std::size_t begin, std::size_t end) {
    std::uint64_t n = 0;
    for (std::size_t i = begin; i < end; ++i) n += predict(pairs[i].trustor, pairs[i].trustee);
    return n;
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(pairs.size() / 1024 + 1)));
  if (threads == 1) return count_range(0, pairs.size());

  std::vector<std::uint64_t> partial(threads, 0);
  std::vector<std::jthread> workers;
  const std::size_t chunk = (pairs.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(pairs.size(), t * chunk);
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    workers.emplace_back([&, t, begin, end] { partial[t] = count_range(begin, end); });
  }
  workers.clear();
  std::uint64_t total = 0;
  for (const auto p : partial) total += p;
  return total;
}

double accuracy_without_negatives(const TrustPredictor& predict,
                                  std::span<const TrustEdge> positives, unsigned threads) {
  if (positives.empty()) throw std::invalid_argument("accuracy: empty positive test set");
  return static_cast<double>(count_trusted(predict, positives, threads)) /
         static_cast<double>(positives.size());
}

MetricReport fscore_with_negatives(const TrustPredictor& predict,
                                   std::span<const TrustEdge> positives, const TrustGraph& graph,
                                   std::size_t runs, Rng& rng, unsigned threads) {
  if (positives.empty()) throw std::invalid_argument("fscore: empty positive test set");
  if (runs == 0) throw std::invalid_argument("fscore: runs must be at least 1");
  const auto trusted_pos = count_trusted(predict, positives, threads);
  std::vector<Confusion> per_run;
  std::vector<TrustEdge> negatives(positives.size());
  for (std::size_t run = 0; run < runs; ++run) {
    for (auto& neg : negatives) neg = sample_negative_pair(graph, rng);
    per_run.push_back(balanced_run(trusted_pos, positives.size(),
                                   count_trusted(predict, negatives, threads), negatives.size()));
  }
  return summarize(positives.size(), trusted_pos, std::move(per_run));
}

const char* to_string(DegreeView view) noexcept {
  return view == DegreeView::InDegree ? "indegree" : "outdegree";
}

std::string SegmentKey::name() const {
  return std::string(to_string(trustor)) + "-" + to_string(trustee);
}

std::vector<SegmentKey> segment_keys(DegreeView view) {
  using enum DegreeClass;
  return {{view, High, High}, {view, High, Low}, {view, Low, High}, {view, Low, Low}};
}

std::size_t view_degree(const TrustGraph& graph, UserId u, DegreeView view) {
  return view == DegreeView::InDegree ? graph.in_degree(u) : graph.out_degree(u);
}

std::map<SegmentKey, std::vector<TrustEdge>> segment_test_pairs(
    std::span<const TrustEdge> test_pairs, const TrustGraph& graph, DegreeView view,
    std::size_t threshold) {
  std::map<SegmentKey, std::vector<TrustEdge>> segments;
  for (const auto& key : segment_keys(view)) segments[key];
  for (const auto& e : test_pairs) {
    const SegmentKey key{view, degree_class(view_degree(graph, e.trustor, view), threshold),
                         degree_class(view_degree(graph, e.trustee, view), threshold)};
    segments[key].push_back(e);
  }
  return segments;
}

std::vector<SegmentRow> segment_report(const TrustPredictor& predict,
                                       std::span<const TrustEdge> test_positives,
                                       const TrustGraph& graph, DegreeView view,
                                       std::size_t runs, Rng& rng, std::size_t threshold,
                                       unsigned threads) {
  if (runs == 0) throw std::invalid_argument("segment_report: runs must be at least 1");
  std::array<std::vector<UserId>, 2> pools;  // indexed by DegreeClass
  for (std::size_t i = 0; i < graph.num_users(); ++i) {
    const auto c = degree_class(view_degree(graph, user(i), view), threshold);
    pools[static_cast<std::size_t>(c)].push_back(user(i));
  }
  auto sample_matched = [&](const SegmentKey& key) {
    const auto& from = pools[static_cast<std::size_t>(key.trustor)];
    const auto& to = pools[static_cast<std::size_t>(key.trustee)];
    for (int attempt = 0; attempt < kNegativeSampleAttempts; ++attempt) {
      const UserId r = from[rng.uniform_index(from.size())];
      const UserId s = to[rng.uniform_index(to.size())];
      if (r != s && !graph.has_edge(r, s)) return TrustEdge{r, s};
    }
    throw InfeasibleSampling("no " + key.name() + " non-edge found after " +
                             std::to_string(kNegativeSampleAttempts) + " attempts");
  };

  const auto segments = segment_test_pairs(test_positives, graph, view, threshold);
  std::vector<SegmentRow> rows;
  for (const auto& key : segment_keys(view)) {
    const auto& pairs = segments.at(key);
    if (pairs.empty()) {
      rows.push_back({key, {}});
      continue;
    }
    const auto trusted_pos = count_trusted(predict, pairs, threads);
    std::vector<Confusion> per_run;
    std::vector<TrustEdge> negatives(pairs.size());
    for (std::size_t run = 0; run < runs; ++run) {
      for (auto& neg : negatives) neg = sample_matched(key);
      per_run.push_back(balanced_run(trusted_pos, pairs.size(),
                                     count_trusted(predict, negatives, threads),
                                     negatives.size()));
    }
    rows.push_back({key, summarize(pairs.size(), trusted_pos, std::move(per_run))});
  }
  return rows;
}

TrustGraph make_synthetic_two_community_graph(std::size_t n_per_block, double p_in,
                                              double p_out, std::uint64_t seed) {
  if (n_per_block == 0) throw std::invalid_argument("SBM: empty blocks");
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0) || !(p_in > p_out)) {
    throw std::invalid_argument("SBM: need 0 <= p_out < p_in <= 1");
  }
  const std::size_t n = 2 * n_per_block;
  Rng rng(seed);
  std::vector<TrustEdge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      const bool same = (u < n_per_block) == (v < n_per_block);
      if (rng.bernoulli(same ? p_in : p_out)) edges.push_back({user(u), user(v)});
    }
  }
  std::vector<RawId> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<RawId>(i);
  return TrustGraph(std::move(raw), std::move(edges));
}

void write_report_csv(std::ostream& out, std::span<const ReportLine> lines) {
  out << "view,segment,accuracy,f_mean,f_std,precision,recall,n_pairs\n";
  for (const auto& l : lines) {
    out << l.view << ',' << l.segment << ',';
    if (l.report.empty()) {
      out << ",,,,," << 0 << '\n';
      continue;
    }
    const auto& r = l.report;
    out << fmt_fraction(r.accuracy_no_neg) << ',' << fmt_fraction(r.fscore_mean) << ','
        << fmt_fraction(r.fscore_std) << ',' << fmt_fraction(r.precision_mean) << ','
        << fmt_fraction(r.recall_mean) << ',' << r.n_pairs << '\n';
  }
}

void write_report_table(std::ostream& out, std::span<const ReportLine> lines) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %-10s %9s %9s %8s %9s %9s %9s\n", "view", "segment",
                "accuracy", "f_mean", "f_std", "precision", "recall", "n_pairs");
  out << buf;
  for (const auto& l : lines) {
    const auto& r = l.report;
    if (r.empty()) {
      std::snprintf(buf, sizeof(buf), "%-10s %-10s %9s %9s %8s %9s %9s %9d\n", l.view.c_str(),
                    l.segment.c_str(), "-", "-", "-", "-", "-", 0);
    } else {
      std::snprintf(buf, sizeof(buf), "%-10s %-10s %8.2f%% %8.2f%% %8.4f %8.2f%% %8.2f%% %9zu\n",
                    l.view.c_str(), l.segment.c_str(), 100 * r.accuracy_no_neg,
                    100 * r.fscore_mean, r.fscore_std, 100 * r.precision_mean,
                    100 * r.recall_mean, r.n_pairs);
    }
    out << buf;
  }
}

}  // namespace trustnet

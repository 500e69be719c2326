#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trustnet/graph.hpp"
#include "trustnet/model.hpp"

namespace trustnet {

/// Binary decision "r trusts s". Must be safe to call concurrently.
using TrustPredictor = std::function<bool(UserId, UserId)>;

TrustPredictor predictor_for(const TrainedModel& model, float threshold = kDefaultThreshold);

/// Confusion counts with trust as the positive class.
struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double fscore() const {
    // 2PR/(P+R) written over the counts: 2tp / (2tp + fp + fn).
    const auto denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
  }
};

struct MetricReport {
  std::size_t n_pairs = 0;  // positive pairs evaluated
  double accuracy_no_neg = 0.0;
  double fscore_mean = 0.0;
  double fscore_std = 0.0;  // population standard deviation over runs
  double precision_mean = 0.0;
  double recall_mean = 0.0;
  std::size_t runs = 0;
  std::vector<Confusion> per_run;

  bool empty() const { return n_pairs == 0; }
};

/// Number of pairs the predictor labels as trust. Work is split over `threads` workers.
std::uint64_t count_trusted(const TrustPredictor& predict, std::span<const TrustEdge> pairs,
                            unsigned threads = 1);

/// Fraction of held-out positives predicted as trust (recall on positives only).
double accuracy_without_negatives(const TrustPredictor& predict,
                                  std::span<const TrustEdge> positives, unsigned threads = 1);

/// Per run, pairs the positives with as many freshly sampled non-edges and scores the
/// balanced set. Also fills accuracy_no_neg.
MetricReport fscore_with_negatives(const TrustPredictor& predict,
                                   std::span<const TrustEdge> positives, const TrustGraph& graph,
                                   std::size_t runs, Rng& rng, unsigned threads = 1);

enum class DegreeView { InDegree, OutDegree };

const char* to_string(DegreeView view) noexcept;

struct SegmentKey {
  DegreeView view;
  DegreeClass trustor;
  DegreeClass trustee;

  std::string name() const;  // e.g. "High-Low"
  friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
};

/// The four segments of a view, in report order: High-High, High-Low, Low-High, Low-Low.
std::vector<SegmentKey> segment_keys(DegreeView view);

std::size_t view_degree(const TrustGraph& graph, UserId u, DegreeView view);

/// Each pair lands in exactly one segment; degrees come from the full graph. Every key of
/// the view is present, possibly with no pairs.
std::map<SegmentKey, std::vector<TrustEdge>> segment_test_pairs(
    std::span<const TrustEdge> test_pairs, const TrustGraph& graph, DegreeView view,
    std::size_t threshold = kDefaultDegreeThreshold);

struct SegmentRow {
  SegmentKey key;
  MetricReport report;
};

/// Per-segment metrics. Negatives for a segment are non-edges whose endpoints have the
/// segment's degree classes.
std::vector<SegmentRow> segment_report(const TrustPredictor& predict,
                                       std::span<const TrustEdge> test_positives,
                                       const TrustGraph& graph, DegreeView view,
                                       std::size_t runs, Rng& rng,
                                       std::size_t threshold = kDefaultDegreeThreshold,
                                       unsigned threads = 1);

/// Directed two-block SBM on 2 * n_per_block users; users [0, n) form block 0 and
/// [n, 2n) block 1. Raw ids equal dense ids. Isolated users are kept.
TrustGraph make_synthetic_two_community_graph(std::size_t n_per_block, double p_in,
                                              double p_out, std::uint64_t seed);

struct ReportLine {
  std::string view;
  std::string segment;
  MetricReport report;
};

/// Columns: view, segment, accuracy, f_mean, f_std, precision, recall, n_pairs.
void write_report_csv(std::ostream& out, std::span<const ReportLine> lines);
void write_report_table(std::ostream& out, std::span<const ReportLine> lines);

}  // namespace trustnet

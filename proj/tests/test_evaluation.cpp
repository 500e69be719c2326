#include <doctest.h>

#include <mutex>
#include <sstream>

#include "trustnet/evaluation.hpp"

using namespace trustnet;

namespace {

/// Wraps a predictor and records every query in call order (single-threaded use).
struct Recorder {
  TrustPredictor inner;
  std::vector<std::pair<TrustEdge, bool>> calls;

  TrustPredictor predictor() {
    return [this](UserId r, UserId s) {
      const bool out = inner(r, s);
      calls.push_back({{r, s}, out});
      return out;
    };
  }
};

TrustPredictor always(bool value) {
  return [value](UserId, UserId) { return value; };
}

// Deterministic pseudo-random predictor independent of the graph.
TrustPredictor hashed() {
  return [](UserId r, UserId s) { return ((index(r) * 2654435761U) ^ (index(s) * 40503U)) % 7 < 4; };
}

const TrustGraph& test_graph() {
  static const TrustGraph g = make_synthetic_two_community_graph(60, 0.12, 0.01, 3);
  return g;
}

}  // namespace

TEST_CASE("Confusion arithmetic") {
  Confusion c{30, 10, 50, 20};
  CHECK(c.precision() == 0.75);
  CHECK(c.recall() == 0.6);
  CHECK(c.fscore() == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-15));
  CHECK(Confusion{}.fscore() == 0.0);
  CHECK(Confusion{0, 0, 5, 5}.precision() == 0.0);
}

TEST_CASE("accuracy_without_negatives") {
  const auto& g = test_graph();
  const auto split = split_edges(g, 0.8, 1);
  CHECK(accuracy_without_negatives(always(true), split.test) == 1.0);
  CHECK(accuracy_without_negatives(always(false), split.test) == 0.0);
  CHECK_THROWS_AS(accuracy_without_negatives(always(true), {}), std::invalid_argument);
  // The threaded path agrees with the serial one.
  CHECK(count_trusted(hashed(), g.edges(), 4) == count_trusted(hashed(), g.edges(), 1));
}

TEST_CASE("fscore_with_negatives") {
  const auto& g = test_graph();
  const auto split = split_edges(g, 0.8, 1);

  SUBCASE("all-positive predictor on a balanced set") {
    Rng rng(1);
    const auto r = fscore_with_negatives(always(true), split.test, g, 10, rng);
    CHECK(r.precision_mean == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.recall_mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.fscore_mean == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.fscore_std == doctest::Approx(0.0));
    CHECK(r.runs == 10);
  }
  SUBCASE("perfect predictor") {
    Rng rng(2);
    const TrustPredictor oracle = [&](UserId a, UserId b) { return g.has_edge(a, b); };
    const auto r = fscore_with_negatives(oracle, split.test, g, 3, rng);
    CHECK(r.fscore_mean == 1.0);
    CHECK(r.accuracy_no_neg == 1.0);
  }
  SUBCASE("single run has zero spread") {
    Rng rng(3);
    CHECK(fscore_with_negatives(hashed(), split.test, g, 1, rng).fscore_std == 0.0);
  }
  SUBCASE("balanced sets, non-edge negatives, exact F per run") {
    Recorder rec{hashed(), {}};
    Rng rng(4);
    const std::size_t runs = 5;
    const auto r = fscore_with_negatives(rec.predictor(), split.test, g, runs, rng);
    const std::size_t n = split.test.size();
    REQUIRE(rec.calls.size() == n * (runs + 1));
    std::uint64_t trusted_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(rec.calls[i].first == split.test[i]);
      trusted_pos += rec.calls[i].second;
    }
    for (std::size_t run = 0; run < runs; ++run) {
      std::uint64_t fp = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& [pair, trusted] = rec.calls[n * (run + 1) + i];
        REQUIRE(pair.trustor != pair.trustee);
        REQUIRE_FALSE(g.has_edge(pair.trustor, pair.trustee));
        fp += trusted;
      }
      const auto& c = r.per_run[run];
      CHECK(c.tp + c.fn == n);
      CHECK(c.fp + c.tn == n);
      CHECK(c.tp == trusted_pos);
      CHECK(c.fp == fp);
      const double p = double(c.tp) / double(c.tp + c.fp);
      const double rc = double(c.tp) / double(n);
      CHECK(c.fscore() == doctest::Approx(2 * p * rc / (p + rc)).epsilon(1e-14));
      // Exact rational form over integers.
      CHECK(c.fscore() == double(2 * c.tp) / double(2 * c.tp + c.fp + c.fn));
    }
    CHECK(r.accuracy_no_neg == doctest::Approx(r.recall_mean).epsilon(1e-15));
    CHECK(r.accuracy_no_neg == accuracy_without_negatives(hashed(), split.test));
  }
  SUBCASE("deterministic given the seed") {
    Rng a(5), b(5);
    const auto x = fscore_with_negatives(hashed(), split.test, g, 4, a);
    const auto y = fscore_with_negatives(hashed(), split.test, g, 4, b, 3);
    CHECK(x.fscore_mean == y.fscore_mean);
    CHECK(x.fscore_std == y.fscore_std);
  }
  SUBCASE("errors") {
    Rng rng(6);
    CHECK_THROWS_AS(fscore_with_negatives(hashed(), {}, g, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(fscore_with_negatives(hashed(), split.test, g, 0, rng), std::invalid_argument);
    const auto full = build_graph(std::vector<RawPair>{{0, 1}, {1, 0}});
    CHECK_THROWS_AS(fscore_with_negatives(hashed(), full.edges(), full, 1, rng),
                    InfeasibleSampling);
  }
}

TEST_CASE("segment_test_pairs") {
  SUBCASE("threshold rule") {
    // Trustor 0 has in-degree 7, trustee 1 has in-degree 2.
    std::vector<RawPair> pairs{{0, 1}, {2, 1}};
    for (int i = 10; i < 17; ++i) pairs.emplace_back(i, 0);
    const auto g = build_graph(pairs);
    const std::vector<TrustEdge> test{{*g.find(0), *g.find(1)}};
    const auto seg = segment_test_pairs(test, g, DegreeView::InDegree);
    REQUIRE(seg.size() == 4);
    const SegmentKey high_low{DegreeView::InDegree, DegreeClass::High, DegreeClass::Low};
    CHECK(seg.at(high_low).size() == 1);
    CHECK(high_low.name() == "High-Low");
    // By out-degree both endpoints are Low (1 and 0).
    const auto by_out = segment_test_pairs(test, g, DegreeView::OutDegree);
    CHECK(by_out.at({DegreeView::OutDegree, DegreeClass::Low, DegreeClass::Low}).size() == 1);
  }
  SUBCASE("segments partition the test set, property") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = make_synthetic_two_community_graph(40, 0.1, 0.02, seed);
      const auto split = split_edges(g, 0.8, seed);
      for (const auto view : {DegreeView::InDegree, DegreeView::OutDegree}) {
        for (const std::size_t threshold : {1, 3, 5, 8}) {
          const auto seg = segment_test_pairs(split.test, g, view, threshold);
          std::size_t total = 0;
          for (const auto& [key, pairs] : seg) {
            total += pairs.size();
            for (const auto& e : pairs) {
              REQUIRE(degree_class(view_degree(g, e.trustor, view), threshold) == key.trustor);
              REQUIRE(degree_class(view_degree(g, e.trustee, view), threshold) == key.trustee);
            }
          }
          CHECK(total == split.test.size());
        }
      }
    }
  }
}

TEST_CASE("segment_report") {
  const auto& g = test_graph();
  const auto split = split_edges(g, 0.8, 2);

  SUBCASE("perfect predictor scores 1 everywhere") {
    const TrustPredictor oracle = [&](UserId a, UserId b) { return g.has_edge(a, b); };
    Rng rng(1);
    for (const auto& row : segment_report(oracle, split.test, g, DegreeView::OutDegree, 3, rng)) {
      if (row.report.empty()) continue;
      CHECK(row.report.accuracy_no_neg == 1.0);
      CHECK(row.report.fscore_mean == 1.0);
    }
  }
  SUBCASE("brute-force confusion counts agree, negatives class-matched") {
    Recorder rec{hashed(), {}};
    Rng rng(2);
    const std::size_t runs = 3;
    const auto view = DegreeView::InDegree;
    const auto rows = segment_report(rec.predictor(), split.test, g, view, runs, rng);
    const auto seg = segment_test_pairs(split.test, g, view);
    std::size_t cursor = 0;
    for (const auto& row : rows) {
      const auto& pairs = seg.at(row.key);
      CHECK(row.report.n_pairs == pairs.size());
      if (pairs.empty()) continue;
      const std::size_t n = pairs.size();
      std::uint64_t tp = 0;
      for (std::size_t i = 0; i < n; ++i) tp += rec.calls[cursor++].second;
      double f_sum = 0.0;
      for (std::size_t run = 0; run < runs; ++run) {
        std::uint64_t fp = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const auto& [pair, trusted] = rec.calls[cursor++];
          REQUIRE_FALSE(g.has_edge(pair.trustor, pair.trustee));
          REQUIRE(degree_class(view_degree(g, pair.trustor, view)) == row.key.trustor);
          REQUIRE(degree_class(view_degree(g, pair.trustee, view)) == row.key.trustee);
          fp += trusted;
        }
        const double p = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double r = double(tp) / double(n);
        f_sum += p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
      }
      CHECK(row.report.fscore_mean == doctest::Approx(f_sum / runs).epsilon(1e-12));
      CHECK(row.report.accuracy_no_neg == double(tp) / double(n));
    }
    CHECK(cursor == rec.calls.size());
  }
  SUBCASE("empty segments are reported, not errors") {
    // Every user has in-degree < 100, so only Low-Low is populated.
    Rng rng(3);
    const auto rows =
        segment_report(hashed(), split.test, g, DegreeView::InDegree, 2, rng, 100);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].report.empty());
    CHECK(rows[3].key.name() == "Low-Low");
    CHECK(rows[3].report.n_pairs == split.test.size());
  }
}

TEST_CASE("make_synthetic_two_community_graph") {
  SUBCASE("no cross edges when p_out = 0") {
    const auto g = make_synthetic_two_community_graph(30, 0.2, 0.0, 1);
    CHECK(g.num_users() == 60);
    for (const auto& e : g.edges()) CHECK((index(e.trustor) < 30) == (index(e.trustee) < 30));
  }
  SUBCASE("edge count matches the binomial expectation") {
    const double n = 100, p_in = 0.1, p_out = 0.005;
    const double mean = 2 * n * (n - 1) * p_in + 2 * n * n * p_out;
    const double sd =
        std::sqrt(2 * n * (n - 1) * p_in * (1 - p_in) + 2 * n * n * p_out * (1 - p_out));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = make_synthetic_two_community_graph(100, p_in, p_out, seed);
      CHECK(std::abs(double(g.num_edges()) - mean) < 3 * sd);
    }
  }
  SUBCASE("degenerate parameters") {
    CHECK_THROWS_AS(make_synthetic_two_community_graph(10, 0.1, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic_two_community_graph(10, 1.5, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic_two_community_graph(0, 0.5, 0.1, 1), std::invalid_argument);
  }
}

TEST_CASE("report output") {
  MetricReport r;
  r.n_pairs = 12;
  r.accuracy_no_neg = 0.75;
  r.fscore_mean = 2.0 / 3.0;
  r.precision_mean = 0.5;
  r.recall_mean = 1.0;
  r.runs = 1;
  const std::vector<ReportLine> lines{{"all", "all", r}, {"indegree", "Low-Low", {}}};
  std::ostringstream csv;
  write_report_csv(csv, lines);
  CHECK(csv.str() ==
        "view,segment,accuracy,f_mean,f_std,precision,recall,n_pairs\n"
        "all,all,0.750000,0.666667,0.000000,0.500000,1.000000,12\n"
        "indegree,Low-Low,,,,,,0\n");
  std::ostringstream table;
  write_report_table(table, lines);
  CHECK(table.str().find("66.67%") != std::string::npos);
}

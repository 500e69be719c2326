#include "trustnet/pretrain.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace trustnet {

namespace {

constexpr std::uint64_t kWalkStream = 11;
constexpr std::uint64_t kSkipGramStream = 12;

float sigmoid(float x) {
  if (x > 30.0F) return 1.0F;
  if (x < -30.0F) return 0.0F;
  return 1.0F / (1.0F + std::exp(-x));
}

class NoiseDistribution {
 public:
  NoiseDistribution(const WalkCorpus& corpus, std::size_t n) : cumulative_(n) {
    std::vector<double> counts(n, 0.0);
    for (const auto& walk : corpus) {
      for (const auto u : walk) counts[index(u)] += 1.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::pow(counts[i], 0.75);
      cumulative_[i] = total;
    }
  }

  UserId sample(Rng& rng) const {
    const double x = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    return user(std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                      cumulative_.size() - 1));
  }

 private:
  std::vector<double> cumulative_;
};

bool parse_float(std::string_view token, float& out) {
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> tokens_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto b = line.find_first_not_of(" \t\r", pos);
    if (b == std::string_view::npos) break;
    auto e = line.find_first_of(" \t\r", b);
    if (e == std::string_view::npos) e = line.size();
    out.push_back(line.substr(b, e - b));
    pos = e;
  }
  return out;
}

}  // namespace

void WalkConfig::validate() const {
  if (walks_per_node == 0 || walk_length == 0 || window == 0 || negatives == 0 ||
      sg_epochs == 0) {
    throw std::invalid_argument("walk configuration counts must be at least 1");
  }
  if (window >= walk_length) throw std::invalid_argument("window must be shorter than walks");
  if (!(sg_lr > 0.0) || !(sg_min_lr > 0.0)) {
    throw std::invalid_argument("skip-gram learning rates must be positive");
  }
}

std::vector<std::vector<UserId>> undirected_adjacency(const TrustGraph& graph) {
  std::vector<std::vector<UserId>> adj(graph.num_users());
  for (const auto& e : graph.edges()) {
    adj[index(e.trustor)].push_back(e.trustee);
    adj[index(e.trustee)].push_back(e.trustor);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

WalkCorpus generate_walks(const TrustGraph& graph, const WalkConfig& config, Rng& rng) {
  config.validate();
  const auto adj = undirected_adjacency(graph);
  std::vector<UserId> order(graph.num_users());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = user(i);

  WalkCorpus corpus;
  corpus.reserve(config.walks_per_node * order.size());
  for (std::size_t round = 0; round < config.walks_per_node; ++round) {
    rng.shuffle(std::span(order));
    for (const auto start : order) {
      Walk walk{start};
      walk.reserve(config.walk_length);
      while (walk.size() < config.walk_length) {
        const auto& nbrs = adj[index(walk.back())];
        if (nbrs.empty()) break;
        walk.push_back(nbrs[rng.uniform_index(nbrs.size())]);
      }
      corpus.push_back(std::move(walk));
    }
  }
  return corpus;
}

SkipGramTables skipgram_train(const WalkCorpus& corpus, std::size_t n, std::size_t d,
                              const WalkConfig& config, Rng& rng,
                              const SkipGramObserver& observer) {
  config.validate();
  std::size_t tokens = 0;
  for (const auto& walk : corpus) {
    for (const auto u : walk) {
      if (index(u) >= n) throw std::out_of_range("walk contains unknown user");
    }
    tokens += walk.size();
  }
  if (tokens == 0) throw std::invalid_argument("skip-gram corpus is empty");

  SkipGramTables t{init_uniform_embedding(n, d, rng),
                   MatrixF::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))};
  const NoiseDistribution noise(corpus, n);
  const double total_steps = static_cast<double>(tokens * config.sg_epochs);
  double step = 0.0;
  VectorF center_grad(static_cast<Eigen::Index>(d));

  for (std::size_t epoch = 1; epoch <= config.sg_epochs; ++epoch) {
    for (const auto& walk : corpus) {
      const auto len = static_cast<std::ptrdiff_t>(walk.size());
      for (std::ptrdiff_t i = 0; i < len; ++i, step += 1.0) {
        const auto lr = static_cast<float>(
            std::max(config.sg_min_lr, config.sg_lr - (config.sg_lr - config.sg_min_lr) *
                                                          (step / total_steps)));
        const auto w = static_cast<std::ptrdiff_t>(config.window);
        const auto lo = std::max<std::ptrdiff_t>(0, i - w);
        const auto hi = std::min<std::ptrdiff_t>(len - 1, i + w);
        const auto center = static_cast<Eigen::Index>(index(walk[static_cast<std::size_t>(i)]));
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const UserId context = walk[static_cast<std::size_t>(j)];
          center_grad.setZero();
          for (std::size_t k = 0; k <= config.negatives; ++k) {
            UserId target = context;
            float label = 1.0F;
            if (k > 0) {
              target = noise.sample(rng);
              if (target == context) continue;
              label = 0.0F;
            }
            auto out_row = t.output.row(index(target));
            const float g = (label - sigmoid(t.input.row(center).dot(out_row))) * lr;
            center_grad += g * out_row.transpose();
            out_row += g * t.input.row(center);
          }
          t.input.row(center) += center_grad.transpose();
        }
      }
    }
    if (!t.input.allFinite() || !t.output.allFinite()) {
      throw NumericError("skip-gram produced non-finite embeddings");
    }
    if (observer) observer(epoch, t);
  }
  return t;
}

MatrixF pretrain_deepwalk(const TrustGraph& graph, std::size_t d, const WalkConfig& config) {
  Rng walk_rng(derive_seed(config.seed, kWalkStream));
  const auto corpus = generate_walks(graph, config, walk_rng);
  Rng sg_rng(derive_seed(config.seed, kSkipGramStream));
  return skipgram_train(corpus, graph.num_users(), d, config, sg_rng).input;
}

void export_embeddings(const MatrixF& embeddings, std::span<const RawId> raw_ids,
                       std::ostream& out) {
  if (static_cast<std::size_t>(embeddings.rows()) != raw_ids.size()) {
    throw std::invalid_argument("export_embeddings: id table size mismatch");
  }
  out << embeddings.rows() << ' ' << embeddings.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    out << raw_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), embeddings(i, j));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

void export_embeddings(const MatrixF& embeddings, std::span<const RawId> raw_ids,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embeddings '" + path + "'");
  export_embeddings(embeddings, raw_ids, out);
}

MatrixF import_embeddings(std::istream& in, const TrustGraph& graph) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokens_of(line);
    if (tok.empty()) continue;
    RawId a = 0;
    RawId b = 0;
    if (tok.size() != 2 || std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), a).ec != std::errc{} ||
        std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), b).ec != std::errc{} ||
        a <= 0 || b <= 0) {
      throw ParseError(line_no, "expected embedding header 'n d'");
    }
    rows = static_cast<std::size_t>(a);
    dim = static_cast<std::size_t>(b);
    break;
  }
  if (dim == 0) throw DataError("embedding file is empty");

  MatrixF out(static_cast<Eigen::Index>(graph.num_users()), static_cast<Eigen::Index>(dim));
  std::vector<bool> seen(graph.num_users(), false);
  std::size_t read = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokens_of(line);
    if (tok.empty()) continue;
    if (tok.size() != dim + 1) {
      throw ParseError(line_no, "expected " + std::to_string(dim) + " values, found " +
                                    std::to_string(tok.size() - 1));
    }
    RawId raw = 0;
    if (std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), raw).ec != std::errc{}) {
      throw ParseError(line_no, "bad user id");
    }
    ++read;
    const auto u = graph.find(raw);
    for (std::size_t j = 0; j < dim; ++j) {
      float v = 0.0F;
      if (!parse_float(tok[j + 1], v) || !std::isfinite(v)) {
        throw ParseError(line_no, "bad embedding value");
      }
      if (u) out(index(*u), static_cast<Eigen::Index>(j)) = v;
    }
    if (u) seen[index(*u)] = true;
  }
  if (read != rows) {
    throw DataError("embedding header declares " + std::to_string(rows) + " rows, file has " +
                    std::to_string(read));
  }
  const auto missing = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  if (missing > 0) {
    throw DataError(std::to_string(missing) + " graph users have no embedding");
  }
  return out;
}

MatrixF import_embeddings(const std::string& path, const TrustGraph& graph) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  return import_embeddings(in, graph);
}

}  // namespace trustnet

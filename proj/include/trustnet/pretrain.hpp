#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trustnet/graph.hpp"
#include "trustnet/numerics.hpp"

namespace trustnet {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::size_t window = 5;
  std::size_t negatives = 5;
  double sg_lr = 0.025;
  double sg_min_lr = 1e-4;
  std::size_t sg_epochs = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

using Walk = std::vector<UserId>;
using WalkCorpus = std::vector<Walk>;

/// Neighbours of every user with edge direction dropped, deduplicated and sorted.
std::vector<std::vector<UserId>> undirected_adjacency(const TrustGraph& graph);

/// `walks_per_node` rounds; each round starts one walk of up to `walk_length` users from
/// every user, in a freshly shuffled order. Steps are uniform over undirected neighbours.
WalkCorpus generate_walks(const TrustGraph& graph, const WalkConfig& config, Rng& rng);

struct SkipGramTables {
  MatrixF input;   // exported embeddings
  MatrixF output;  // context vectors
};

/// Called after each skip-gram epoch (1-based).
using SkipGramObserver = std::function<void(std::size_t epoch, const SkipGramTables&)>;

/// Skip-gram with negative sampling over every (center, context) pair at distance
/// <= window. Noise distribution is token frequency^0.75; the learning rate decays
/// linearly from sg_lr to sg_min_lr over the whole run.
SkipGramTables skipgram_train(const WalkCorpus& corpus, std::size_t n, std::size_t d,
                              const WalkConfig& config, Rng& rng,
                              const SkipGramObserver& observer = {});

/// Walks plus skip-gram; returns the input table, n x d.
MatrixF pretrain_deepwalk(const TrustGraph& graph, std::size_t d, const WalkConfig& config);

/// Text format: a header "n d", then per user a raw id followed by d floats.
void export_embeddings(const MatrixF& embeddings, std::span<const RawId> raw_ids,
                       const std::string& path);
void export_embeddings(const MatrixF& embeddings, std::span<const RawId> raw_ids,
                       std::ostream& out);

/// Rows are remapped onto the graph's dense ids. Every graph user must be present; users
/// the graph does not know are ignored.
MatrixF import_embeddings(std::istream& in, const TrustGraph& graph);
MatrixF import_embeddings(const std::string& path, const TrustGraph& graph);

}  // namespace trustnet

#include "trustnet/model.hpp"

namespace trustnet {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;

}  // namespace

ModelParams<float> init_model_params(std::size_t d, std::size_t n_h, Rng& rng) {
  ModelParams<float> params;
  params.w_star = init_glorot(n_h, d, rng);
  params.w_plus = init_glorot(n_h, d, rng);
  params.b1 = VectorF::Zero(static_cast<Eigen::Index>(n_h));
  params.u_out = init_glorot(2, n_h, rng);
  params.b2 = VectorF::Zero(2);
  return params;
}

EpochBatches make_epoch_batches(std::span<const TrustEdge> train_edges, const TrustGraph& graph,
                                Rng& rng, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<TrainingExample> examples;
  examples.reserve(2 * train_edges.size());
  for (const auto& e : train_edges) examples.push_back({e.trustor, e.trustee, Label::Trust});
  for (std::size_t i = 0; i < train_edges.size(); ++i) {
    const auto neg = sample_negative_pair(graph, rng);
    examples.push_back({neg.trustor, neg.trustee, Label::NoTrust});
  }
  rng.shuffle(std::span(examples));
  return {std::move(examples), batch_size};
}

void TrainConfig::validate() const {
  if (!(lr > 0.0F) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  if (arch == Architecture::Joint && hidden == 0) {
    throw std::invalid_argument("hidden size must be positive");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

TrainedModel init_model(const TrustGraph& graph, const TrainConfig& config,
                        const std::optional<MatrixF>& initial_embeddings) {
  config.validate();
  Rng rng(derive_seed(config.seed, kInitStream));
  TrainedModel model;
  model.arch = config.arch;
  model.raw_ids.assign(graph.raw_ids().begin(), graph.raw_ids().end());
  if (initial_embeddings) {
    if (static_cast<std::size_t>(initial_embeddings->rows()) != graph.num_users()) {
      throw DataError("initial embeddings have " + std::to_string(initial_embeddings->rows()) +
                      " rows, graph has " + std::to_string(graph.num_users()) + " users");
    }
    if (static_cast<std::size_t>(initial_embeddings->cols()) != config.dim) {
      throw DataError("initial embeddings have dimension " +
                      std::to_string(initial_embeddings->cols()) + ", model expects " +
                      std::to_string(config.dim));
    }
    model.embeddings = *initial_embeddings;
  } else {
    model.embeddings = init_uniform_embedding(graph.num_users(), config.dim, rng);
  }
  if (config.arch == Architecture::Joint) {
    model.params = init_model_params(config.dim, config.hidden, rng);
  } else {
    model.params = ModelParams<float>::zeros(static_cast<Eigen::Index>(config.dim), 0);
  }
  return model;
}

TrainResult train(const TrustGraph& graph, const EdgeSplit& split, const TrainConfig& config,
                  const std::optional<MatrixF>& initial_embeddings) {
  TrainResult result{init_model(graph, config, initial_embeddings), {}};
  auto& model = result.model;
  Rng rng(derive_seed(config.seed, kBatchStream));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_epoch_batches(split.train, graph, rng, config.batch_size);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto batch = batches[b];
      if (model.arch == Architecture::Joint) {
        const auto fw = forward_batch(batch, model.params, model.embeddings);
        loss_sum += static_cast<double>(batch_loss(batch, fw)) * static_cast<double>(batch.size());
        const auto grad = backward(batch, model.params, fw);
        sgd_step(model.params, model.embeddings, grad, config.lr);
      } else {
        loss_sum += static_cast<double>(simple_nn_batch_loss(batch, model.embeddings)) *
                    static_cast<double>(batch.size());
        sgd_step(model.embeddings, simple_nn_backward(batch, model.embeddings), config.lr);
      }
    }
    const auto n_examples = batches.examples().size();
    result.loss_trace.push_back(n_examples == 0 ? 0.0
                                                : loss_sum / static_cast<double>(n_examples));
  }
  return result;
}

float trust_probability(const TrainedModel& model, UserId r, UserId s) {
  if (model.arch == Architecture::SimpleNN) return simple_nn_forward(r, s, model.embeddings)[1];
  return forward(r, s, model.params, model.embeddings).p[1];
}

Prediction predict(const TrainedModel& model, UserId r, UserId s, float threshold) {
  const float p = trust_probability(model, r, s);
  return {p >= threshold, p};
}

}  // namespace trustnet

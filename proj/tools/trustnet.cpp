#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "trustnet/evaluation.hpp"
#include "trustnet/model_io.hpp"
#include "trustnet/pretrain.hpp"

using namespace trustnet;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size()))) {
    throw DataError("cannot write '" + path + "'");
  }
}

// Same digest as `git hash-object`.
std::string blob_digest(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::string file_digest(const std::string& path) { return blob_digest(read_file(path)); }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string manifest_path(const std::string& artifact) { return artifact + ".manifest.json"; }

void write_manifest(const std::string& artifact, json manifest) {
  manifest["outputs"][artifact] = file_digest(artifact);
  write_file(manifest_path(artifact), manifest.dump(2) + "\n");
}

TrustGraph load_graph(const std::string& path) {
  return build_graph(parse_edge_list_file(path).pairs);
}

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("TRUSTNET_THREADS")) {
    unsigned v = 0;
    const auto* end = env + std::strlen(env);
    if (std::from_chars(env, end, v).ptr == end && v > 0) return v;
    std::cerr << "warning: ignoring TRUSTNET_THREADS='" << env << "'\n";
  }
  return 1;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct IngestArgs {
  std::string edges, out;
};

int cmd_ingest(const IngestArgs& a) {
  const auto parsed = parse_edge_list_file(a.edges);
  const auto graph = build_graph(parsed.pairs);
  std::ofstream out(a.out);
  if (!out) throw DataError("cannot write '" + a.out + "'");
  out << "# trustnet graph users=" << graph.num_users() << " edges=" << graph.num_edges() << "\n";
  write_edge_list(out, graph);
  out.close();
  if (!out) throw DataError("failed writing '" + a.out + "'");

  std::size_t max_out = 0, max_in = 0;
  for (std::size_t u = 0; u < graph.num_users(); ++u) {
    max_out = std::max(max_out, graph.out_degree(user(u)));
    max_in = std::max(max_in, graph.in_degree(user(u)));
  }
  const double mean = double(graph.num_edges()) / double(graph.num_users());
  std::cout << "users=" << graph.num_users() << " edges=" << graph.num_edges()
            << " mean_degree=" << fmt("%.2f", mean) << " max_out=" << max_out
            << " max_in=" << max_in << " self_loops=" << parsed.self_loops
            << " duplicates=" << graph.duplicates_dropped() << "\n";
  return 0;
}

struct SynthArgs {
  std::size_t n = 100;
  double p_in = 0.1, p_out = 0.005;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  const auto graph = make_synthetic_two_community_graph(a.n, a.p_in, a.p_out, a.seed);
  std::ofstream out(a.out);
  if (!out) throw DataError("cannot write '" + a.out + "'");
  out << "# two-community graph n_per_block=" << a.n << " seed=" << a.seed << "\n";
  write_edge_list(out, graph);
  std::cout << "users=" << graph.num_users() << " edges=" << graph.num_edges() << "\n";
  return 0;
}

struct PretrainArgs {
  std::string graph, out;
  std::size_t dim = 64;
  WalkConfig walk;
};

int cmd_pretrain(const PretrainArgs& a) {
  Stopwatch clock;
  const auto graph = load_graph(a.graph);
  const auto emb = pretrain_deepwalk(graph, a.dim, a.walk);
  export_embeddings(emb, graph.raw_ids(), a.out);
  const auto& w = a.walk;
  json m;
  m["command"] = "pretrain";
  m["config"] = {{"dim", a.dim},       {"walks", w.walks_per_node}, {"walk_length", w.walk_length},
                 {"window", w.window}, {"neg", w.negatives},        {"epochs", w.sg_epochs},
                 {"lr", w.sg_lr},      {"min_lr", w.sg_min_lr}};
  m["seed"] = w.seed;
  m["inputs"] = {{a.graph, file_digest(a.graph)}};
  m["seconds"] = clock.seconds();
  write_manifest(a.out, m);
  std::cout << "embeddings users=" << graph.num_users() << " dim=" << a.dim << " -> " << a.out
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string graph, out, init = "random", arch = "joint", export_split;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
  TrainConfig cfg;
};

int cmd_train(TrainArgs a) {
  Stopwatch clock;
  a.cfg.arch = a.arch == "simple" ? Architecture::SimpleNN : Architecture::Joint;
  a.cfg.validate();
  const auto graph = load_graph(a.graph);
  const auto split = split_edges(graph, a.split_ratio, a.split_seed);
  std::optional<MatrixF> init;
  if (a.init != "random") init = import_embeddings(a.init, graph);
  const auto result = train(graph, split, a.cfg, init);
  save_model(result.model, a.out);

  const std::string trace_path = a.out + ".loss.csv";
  std::ostringstream trace;
  trace << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
    trace << e + 1 << "," << fmt("%.9g", result.loss_trace[e]) << "\n";
  }
  write_file(trace_path, trace.str());

  if (!a.export_split.empty()) {
    std::filesystem::create_directories(a.export_split);
    for (const auto& [name, edges] : {std::pair{"train.txt", &split.train},
                                      std::pair{"test.txt", &split.test}}) {
      std::ofstream out(std::filesystem::path(a.export_split) / name);
      write_edge_list(out, graph, *edges);
    }
  }

  json m;
  m["command"] = "train";
  m["config"] = {{"arch", a.arch},       {"lr", a.cfg.lr},          {"dim", a.cfg.dim},
                 {"hidden", a.cfg.hidden}, {"batch", a.cfg.batch_size}, {"epochs", a.cfg.epochs},
                 {"init", a.init}};
  m["seed"] = a.cfg.seed;
  m["split"] = {{"ratio", a.split_ratio}, {"seed", a.split_seed},
                {"train", split.train.size()}, {"test", split.test.size()}};
  m["inputs"] = {{a.graph, file_digest(a.graph)}};
  if (init) m["inputs"][a.init] = file_digest(a.init);
  m["outputs"][trace_path] = blob_digest(trace.str());
  m["loss"] = result.loss_trace;
  m["seconds"] = clock.seconds();
  write_manifest(a.out, m);

  if (!result.loss_trace.empty()) {
    std::cout << "final loss " << fmt("%.6f", result.loss_trace.back()) << " after "
              << result.loss_trace.size() << " epochs\n";
  }
  std::cout << "model -> " << a.out << " (" << fmt("%.1f", clock.seconds()) << " s)\n";
  return 0;
}

struct EvalArgs {
  std::string model, graph, segment = "indegree", out;
  std::optional<std::uint64_t> split_seed;
  std::optional<double> split_ratio;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  float threshold = kDefaultThreshold;
  unsigned threads = 0;
};

void check_model_matches(const TrainedModel& model, const TrustGraph& graph) {
  const auto ids = graph.raw_ids();
  if (!std::equal(ids.begin(), ids.end(), model.raw_ids.begin(), model.raw_ids.end())) {
    throw DataError("model users do not match the graph");
  }
}

int cmd_eval(const EvalArgs& a) {
  Stopwatch clock;
  const auto model = load_model(a.model);
  const auto graph = load_graph(a.graph);
  check_model_matches(model, graph);

  json trained;
  if (std::filesystem::exists(manifest_path(a.model))) {
    trained = json::parse(read_file(manifest_path(a.model)), nullptr, false);
  }
  const auto recorded = [&](const char* key) -> const json* {
    if (trained.is_discarded() || !trained.contains("split")) return nullptr;
    const auto& split = trained["split"];
    return split.contains(key) ? &split[key] : nullptr;
  };
  std::uint64_t split_seed = 0;
  if (a.split_seed) {
    split_seed = *a.split_seed;
    if (const auto* s = recorded("seed"); s && s->get<std::uint64_t>() != split_seed) {
      std::cerr << "warning: --split-seed " << split_seed << " differs from the training split seed "
                << s->get<std::uint64_t>() << "; test pairs may overlap training pairs\n";
    }
  } else if (const auto* s = recorded("seed")) {
    split_seed = s->get<std::uint64_t>();
  }
  double ratio = 0.8;
  if (a.split_ratio) ratio = *a.split_ratio;
  else if (const auto* r = recorded("ratio")) ratio = r->get<double>();

  const auto split = split_edges(graph, ratio, split_seed);
  const auto predict = predictor_for(model, a.threshold);
  const unsigned threads = resolve_threads(a.threads);
  Rng rng(a.seed);
  std::vector<ReportLine> lines;
  lines.push_back({"all", "all", fscore_with_negatives(predict, split.test, graph, a.runs, rng, threads)});
  if (a.segment != "none") {
    const auto view = a.segment == "outdegree" ? DegreeView::OutDegree : DegreeView::InDegree;
    for (auto& row : segment_report(predict, split.test, graph, view, a.runs, rng,
                                    kDefaultDegreeThreshold, threads)) {
      lines.push_back({to_string(view), row.key.name(), std::move(row.report)});
    }
  }

  std::ostringstream csv;
  write_report_csv(csv, lines);
  write_file(a.out, csv.str());
  write_report_table(std::cout, lines);

  json m;
  m["command"] = "eval";
  m["config"] = {{"runs", a.runs}, {"segment", a.segment}, {"threshold", a.threshold},
                 {"split_ratio", ratio}, {"split_seed", split_seed}};
  m["seed"] = a.seed;
  m["inputs"] = {{a.model, file_digest(a.model)}, {a.graph, file_digest(a.graph)}};
  m["seconds"] = clock.seconds();
  write_manifest(a.out, m);
  return 0;
}

struct PredictArgs {
  std::string model, pairs;
  std::vector<std::string> pair;
  float threshold = kDefaultThreshold;
};

std::optional<RawId> parse_raw(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  RawId v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

int cmd_predict(const PredictArgs& a) {
  const auto model = load_model(a.model);
  std::unordered_map<RawId, UserId> dense;
  for (std::size_t u = 0; u < model.raw_ids.size(); ++u) dense.emplace(model.raw_ids[u], user(u));

  std::size_t ok = 0, failed = 0;
  std::cout << "trustor,trustee,label,p_trust\n";
  const auto emit = [&](std::string_view r_text, std::string_view s_text) {
    const auto r = parse_raw(r_text), s = parse_raw(s_text);
    if (!r || !s) {
      std::cout << r_text << "," << s_text << ",error,malformed\n";
      ++failed;
      return;
    }
    const auto ri = dense.find(*r), si = dense.find(*s);
    if (ri == dense.end() || si == dense.end()) {
      std::cout << *r << "," << *s << ",error,unknown user\n";
      ++failed;
      return;
    }
    const auto p = predict(model, ri->second, si->second, a.threshold);
    std::cout << *r << "," << *s << "," << (p.trust ? "trust" : "no_trust") << ","
              << fmt("%.6f", p.p_trust) << "\n";
    ++ok;
  };

  if (!a.pair.empty()) {
    emit(a.pair[0], a.pair[1]);
  } else {
    std::ifstream in(a.pairs);
    if (!in) throw DataError("cannot open pairs '" + a.pairs + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      for (auto& c : line) {
        if (c == ',' || c == '\t') c = ' ';
      }
      std::istringstream tokens(line);
      std::vector<std::string> t;
      for (std::string x; tokens >> x;) t.push_back(x);
      if (t.empty() || t[0].front() == '#') continue;
      if (t.size() != 2) {
        std::cout << line << ",,error,malformed\n";
        ++failed;
        continue;
      }
      emit(t[0], t[1]);
    }
  }
  if (ok == 0 && failed > 0) {
    std::cerr << "error: no pair could be scored\n";
    return kExitData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust inference from sparse positive trust edges"};
  app.set_config("--config", "", "TOML/INI file with default option values");
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Evaluation worker threads (fallback: TRUSTNET_THREADS)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse an edge list and write the normalized graph");
  c_ingest->add_option("--edges", ingest.edges, "Raw edge list")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "Normalized graph file")->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic two-community trust graph");
  c_synth->add_option("--n", synth.n, "Users per community")->capture_default_str();
  c_synth->add_option("--p-in", synth.p_in, "Within-community edge probability")->capture_default_str();
  c_synth->add_option("--p-out", synth.p_out, "Cross-community edge probability")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out)->required();

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "Learn DeepWalk embeddings");
  c_pre->add_option("--graph", pre.graph)->required()->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "Embedding text file")->required();
  c_pre->add_option("--dim", pre.dim)->capture_default_str();
  c_pre->add_option("--walks", pre.walk.walks_per_node, "Walks per user")->capture_default_str();
  c_pre->add_option("--walk-length", pre.walk.walk_length)->capture_default_str();
  c_pre->add_option("--window", pre.walk.window)->capture_default_str();
  c_pre->add_option("--neg", pre.walk.negatives, "Negative samples per pair")->capture_default_str();
  c_pre->add_option("--epochs", pre.walk.sg_epochs, "Skip-gram epochs")->capture_default_str();
  c_pre->add_option("--lr", pre.walk.sg_lr, "Initial skip-gram learning rate")->capture_default_str();
  c_pre->add_option("--seed", pre.walk.seed)->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the trust model");
  c_train->add_option("--graph", tr.graph)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "Model file")->required();
  c_train->add_option("--split-ratio", tr.split_ratio, "Training share of edges")->capture_default_str();
  c_train->add_option("--split-seed", tr.split_seed)->capture_default_str();
  c_train->add_option("--init", tr.init, "'random' or an embedding file")->capture_default_str();
  c_train->add_option("--arch", tr.arch)->check(CLI::IsMember({"joint", "simple"}))->capture_default_str();
  c_train->add_option("--lr", tr.cfg.lr)->capture_default_str();
  c_train->add_option("--dim", tr.cfg.dim)->capture_default_str();
  c_train->add_option("--hidden", tr.cfg.hidden)->capture_default_str();
  c_train->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  c_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_train->add_option("--seed", tr.cfg.seed)->capture_default_str();
  c_train->add_option("--export-split", tr.export_split, "Directory for train.txt and test.txt");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a model on its held-out split");
  c_eval->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--graph", ev.graph)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", ev.out, "Report CSV")->required();
  c_eval->add_option("--split-seed", ev.split_seed, "Defaults to the seed in the model manifest");
  c_eval->add_option("--split-ratio", ev.split_ratio, "Defaults to the ratio in the model manifest");
  c_eval->add_option("--runs", ev.runs)->capture_default_str();
  c_eval->add_option("--segment", ev.segment)
      ->check(CLI::IsMember({"indegree", "outdegree", "none"}))
      ->capture_default_str();
  c_eval->add_option("--seed", ev.seed, "Negative sampling seed")->capture_default_str();
  c_eval->add_option("--threshold", ev.threshold)->capture_default_str();

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Score user pairs");
  c_pred->add_option("--model", pr.model)->required()->check(CLI::ExistingFile);
  auto* pairs_opt = c_pred->add_option("--pairs", pr.pairs, "File of 'trustor trustee' rows");
  auto* pair_opt = c_pred->add_option("--pair", pr.pair, "One pair: TRUSTOR TRUSTEE")->expected(2);
  pairs_opt->excludes(pair_opt);
  c_pred->add_option("--threshold", pr.threshold)->capture_default_str();

  try {
    app.parse(argc, argv);
    if (c_pred->parsed() && pr.pairs.empty() && pr.pair.empty()) {
      throw CLI::RequiredError("--pairs or --pair");
    }
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    ev.threads = threads;
    if (c_ingest->parsed()) return cmd_ingest(ingest);
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_pre->parsed()) return cmd_pretrain(pre);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_pred->parsed()) return cmd_predict(pr);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

// Command-line front end: training runs, depth/strategy sweeps, failure-mode
// diagnostics, the bound-verification suites, the random-graph experiment,
// and synthetic bundle generation. Every run echoes its effective
// configuration to <out>/config.json and is reproducible from that file.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcnlab/bundle.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/train.hpp"
#include "gcnlab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gcnlab;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void ensure_out_dir(const std::string& out) { fs::create_directories(out); }

// config-file value wins over the default, CLI flag wins over both
template <class T>
void overlay(const json& cfg, CLI::Option* opt, const char* key, T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

struct CommonArgs {
  std::string config_path;
  std::string out = "out";
  std::uint64_t seed = 0;
};

json common_json(const CommonArgs& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

int run_train(const CommonArgs& common, const json& cfg, CLI::Option* o_bundle,
              CLI::Option* o_depth, CLI::Option* o_hidden, CLI::Option* o_strategy,
              CLI::Option* o_rate, CLI::Option* o_dropout, CLI::Option* o_lr,
              CLI::Option* o_wd, CLI::Option* o_epochs, std::string bundle,
              std::size_t depth, std::size_t hidden, std::string strategy, double rate,
              double dropout, double lr, double weight_decay, std::size_t epochs,
              std::string output_csv) {
  overlay(cfg, o_bundle, "dataset_path", bundle);
  overlay(cfg, o_depth, "depth", depth);
  overlay(cfg, o_hidden, "hidden", hidden);
  overlay(cfg, o_strategy, "strategy", strategy);
  overlay(cfg, o_rate, "rate", rate);
  overlay(cfg, o_dropout, "dropout", dropout);
  overlay(cfg, o_lr, "lr", lr);
  overlay(cfg, o_wd, "weight_decay", weight_decay);
  overlay(cfg, o_epochs, "epochs", epochs);
  overlay(cfg, nullptr, "output_csv", output_csv);
  if (bundle.empty()) throw std::invalid_argument("train: no dataset (use --bundle or config)");

  TrainConfig tc;
  tc.dataset_path = bundle;
  tc.depth = depth;
  tc.hidden = hidden;
  tc.strategy = strategy_from_string(strategy);
  tc.rate = rate;
  tc.dropout = dropout;
  tc.lr = lr;
  tc.weight_decay = weight_decay;
  tc.epochs = epochs;
  tc.seed = common.seed;
  tc.output_csv = output_csv;

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "train";
  echo["dataset_path"] = tc.dataset_path;
  echo["depth"] = tc.depth;
  echo["hidden"] = tc.hidden;
  echo["strategy"] = to_string(tc.strategy);
  echo["rate"] = tc.rate;
  echo["dropout"] = tc.dropout;
  echo["lr"] = tc.lr;
  echo["weight_decay"] = tc.weight_decay;
  echo["epochs"] = tc.epochs;
  echo["output_csv"] = tc.output_csv;
  write_json_file(echo, common.out + "/config.json");

  Dataset ds = load_bundle(tc.dataset_path);
  TrainResult r = train(ds, tc);
  write_trace_csv(r.trace, common.out + "/" + tc.output_csv);
  std::printf("train: %s depth=%zu strategy=%s best_epoch=%zu val=%.4f test=%.4f\n",
              ds.name.c_str(), tc.depth, to_string(tc.strategy).c_str(), r.trace.best_epoch,
              r.trace.best_val_acc, r.trace.test_acc_at_best);
  return 0;
}

int run_sweep(const CommonArgs& common, const json& cfg, std::string bundle,
              CLI::Option* o_bundle, CLI::Option* o_epochs, std::size_t epochs,
              std::size_t threads) {
  overlay(cfg, o_bundle, "dataset_path", bundle);
  overlay(cfg, o_epochs, "epochs", epochs);
  if (bundle.empty()) throw std::invalid_argument("sweep: no dataset (use --bundle or config)");
  std::vector<std::size_t> depths = cfg.value("depths", std::vector<std::size_t>{4, 8, 16});
  std::vector<std::string> strategies =
      cfg.value("strategies", std::vector<std::string>{"none", "skipnode_uniform",
                                                       "skipnode_biased"});
  std::vector<double> rates = cfg.value("rates", std::vector<double>{0.5});
  std::vector<std::uint64_t> seeds = cfg.value("seeds", std::vector<std::uint64_t>{0, 1, 2});
  std::size_t hidden = cfg.value("hidden", 64);
  double dropout = cfg.value("dropout", 0.5);
  double lr = cfg.value("lr", 0.01);
  double weight_decay = cfg.value("weight_decay", 5e-4);

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "sweep";
  echo["dataset_path"] = bundle;
  echo["depths"] = depths;
  echo["strategies"] = strategies;
  echo["rates"] = rates;
  echo["seeds"] = seeds;
  echo["hidden"] = hidden;
  echo["dropout"] = dropout;
  echo["lr"] = lr;
  echo["weight_decay"] = weight_decay;
  echo["epochs"] = epochs;
  echo["threads"] = threads;
  write_json_file(echo, common.out + "/config.json");

  Dataset ds = load_bundle(bundle);

  struct Cell {
    std::size_t depth;
    Strategy strategy;
    double rate;
    std::uint64_t seed;
    TrainTrace trace;
  };
  std::vector<Cell> cells;
  for (std::size_t d : depths)
    for (const std::string& s : strategies) {
      Strategy st = strategy_from_string(s);
      bool uses_rate = st == Strategy::skipnode_uniform || st == Strategy::skipnode_biased ||
                       st == Strategy::dropedge || st == Strategy::pairnorm;
      std::vector<double> cell_rates = uses_rate ? rates : std::vector<double>{0.0};
      for (double r : cell_rates)
        for (std::uint64_t seed : seeds) cells.push_back({d, st, r, seed, {}});
    }

  std::size_t workers = threads ? threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= cells.size()) return;
      Cell& cell = cells[c];
      TrainConfig tc;
      tc.dataset_path = bundle;
      tc.depth = cell.depth;
      tc.hidden = hidden;
      tc.strategy = cell.strategy;
      tc.rate = cell.strategy == Strategy::pairnorm && cell.rate == 0.0 ? 1.0 : cell.rate;
      tc.dropout = dropout;
      tc.lr = lr;
      tc.weight_decay = weight_decay;
      tc.epochs = epochs;
      tc.seed = mix_seed(common.seed, cell.seed);
      cell.trace = train(ds, tc).trace;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  std::ofstream out(common.out + "/sweep.csv");
  out << "depth,strategy,rate,seed,best_epoch,best_val_acc,test_acc_at_best,final_mad,"
         "final_weight_norm\n";
  char buf[256];
  for (const Cell& c : cells) {
    const EpochStats& last = c.trace.epochs.back();
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.10g,%llu,%zu,%.10g,%.10g,%.10g,%.10g\n", c.depth,
                  to_string(c.strategy).c_str(), c.rate,
                  static_cast<unsigned long long>(c.seed), c.trace.best_epoch,
                  c.trace.best_val_acc, c.trace.test_acc_at_best, last.mad,
                  last.weight_norm_sum);
    out << buf;
  }
  std::printf("sweep: %zu cells written to %s/sweep.csv\n", cells.size(), common.out.c_str());
  return 0;
}

int run_fig2(const CommonArgs& common, const json& cfg, std::string bundle,
             CLI::Option* o_bundle, std::size_t depth, CLI::Option* o_depth,
             std::size_t epochs, CLI::Option* o_epochs) {
  overlay(cfg, o_bundle, "dataset_path", bundle);
  overlay(cfg, o_depth, "depth", depth);
  overlay(cfg, o_epochs, "epochs", epochs);
  if (bundle.empty()) throw std::invalid_argument("fig2: no dataset (use --bundle or config)");
  std::size_t hidden = cfg.value("hidden", 64);
  double dropout = cfg.value("dropout", 0.5);
  double lr = cfg.value("lr", 0.01);
  double weight_decay = cfg.value("weight_decay", 5e-4);
  json runs = cfg.value("runs", json::array());
  if (runs.empty())
    runs = json::array({{{"strategy", "none"}, {"rate", 0.0}},
                        {{"strategy", "skipnode_uniform"}, {"rate", 0.7}},
                        {{"strategy", "skipnode_biased"}, {"rate", 0.7}},
                        {{"strategy", "dropedge"}, {"rate", 0.5}},
                        {{"strategy", "pairnorm"}, {"rate", 1.0}},
                        {{"strategy", "residual"}, {"rate", 0.0}}});

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "fig2";
  echo["dataset_path"] = bundle;
  echo["depth"] = depth;
  echo["hidden"] = hidden;
  echo["dropout"] = dropout;
  echo["lr"] = lr;
  echo["weight_decay"] = weight_decay;
  echo["epochs"] = epochs;
  echo["runs"] = runs;
  write_json_file(echo, common.out + "/config.json");

  Dataset ds = load_bundle(bundle);
  for (const json& r : runs) {
    TrainConfig tc;
    tc.dataset_path = bundle;
    tc.depth = depth;
    tc.hidden = hidden;
    tc.strategy = strategy_from_string(r.at("strategy").get<std::string>());
    tc.rate = r.value("rate", 0.0);
    tc.dropout = dropout;
    tc.lr = lr;
    tc.weight_decay = weight_decay;
    tc.epochs = epochs;
    tc.seed = common.seed;
    TrainResult res = train(ds, tc);
    std::string name = "fig2_" + to_string(tc.strategy) + ".csv";
    write_trace_csv(res.trace, common.out + "/" + name);
    std::printf("fig2: %s final mad=%.4f grad_norm=%.3e weight_norm=%.3f\n",
                to_string(tc.strategy).c_str(), res.trace.epochs.back().mad,
                res.trace.epochs.back().grad_norm_cls,
                res.trace.epochs.back().weight_norm_sum);
  }
  return 0;
}

int run_fig4(const CommonArgs& common, const json& cfg) {
  Fig4Config fc;
  fc.n = cfg.value("n", fc.n);
  fc.p = cfg.value("p", fc.p);
  fc.depth = cfg.value("depth", fc.depth);
  fc.rho_grid = cfg.value("rho_grid", fc.rho_grid);
  fc.s_grid = cfg.value("s_grid", fc.s_grid);
  fc.runs = cfg.value("runs", fc.runs);
  fc.feat_dim = cfg.value("feat_dim", fc.feat_dim);
  fc.threads = cfg.value("threads", fc.threads);
  fc.seed = common.seed;

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "fig4";
  echo["n"] = fc.n;
  echo["p"] = fc.p;
  echo["depth"] = fc.depth;
  echo["rho_grid"] = fc.rho_grid;
  echo["s_grid"] = fc.s_grid;
  echo["runs"] = fc.runs;
  echo["feat_dim"] = fc.feat_dim;
  echo["threads"] = fc.threads;
  write_json_file(echo, common.out + "/config.json");

  Fig4Result r = fig4_experiment(fc);
  write_fig4_csvs(r, common.out);
  double grand = 0.0;
  std::size_t cells = 0;
  for (const Fig4Cell& c : r.cells)
    if (c.has_one_layer) {
      grand += c.mean_one_layer_log_ratio;
      ++cells;
    }
  std::printf("fig4: %zu cells, one-layer grand mean log ratio %.3f\n", r.cells.size(),
              cells ? grand / static_cast<double>(cells) : 0.0);
  return 0;
}

int run_verify(const CommonArgs& common, const json& cfg, std::string suite,
               CLI::Option* o_suite, std::size_t instances, CLI::Option* o_instances) {
  overlay(cfg, o_suite, "suite", suite);
  overlay(cfg, o_instances, "instances", instances);
  SweepConfig sc;
  sc.instances = instances;
  sc.feat_dim = cfg.value("feat_dim", sc.feat_dim);
  sc.seed = common.seed;

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "verify";
  echo["suite"] = suite;
  echo["instances"] = sc.instances;
  echo["feat_dim"] = sc.feat_dim;
  write_json_file(echo, common.out + "/config.json");

  std::vector<BoundReport> reports;
  auto append = [&](std::vector<BoundReport> r) {
    reports.insert(reports.end(), r.begin(), r.end());
  };
  if (suite == "all" || suite == "triangle") append(triangle_sweep(sc));
  if (suite == "all" || suite == "upper") append(upper_bound_sweep(sc));
  if (suite == "all" || suite == "lower") append(lower_bound_sweep(sc));
  if (suite == "all" || suite == "gradient") append(balanced_gradient_suite());
  if (reports.empty()) throw std::invalid_argument("verify: unknown suite " + suite);

  write_bounds_csv(reports, common.out + "/bounds.csv");
  std::size_t violations = 0, skipped = 0;
  for (const BoundReport& r : reports) {
    violations += r.satisfied ? 0 : 1;
    skipped += r.skipped ? 1 : 0;
  }
  std::printf("verify: %zu checks, %zu violations, %zu skipped\n", reports.size(), violations,
              skipped);
  return 0;
}

int run_diagnose(const CommonArgs& common, const json& cfg, std::string bundle,
                 CLI::Option* o_bundle, std::size_t depth, CLI::Option* o_depth) {
  overlay(cfg, o_bundle, "dataset_path", bundle);
  overlay(cfg, o_depth, "depth", depth);
  if (bundle.empty()) throw std::invalid_argument("diagnose: no dataset (use --bundle)");
  std::size_t hidden = cfg.value("hidden", 64);
  double tol = cfg.value("tol", 1e-8);

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "diagnose";
  echo["dataset_path"] = bundle;
  echo["depth"] = depth;
  echo["hidden"] = hidden;
  echo["tol"] = tol;
  write_json_file(echo, common.out + "/config.json");

  Dataset ds = load_bundle(bundle);
  NormAdj adj = normalize_adjacency(ds.graph);
  SubspaceBasis basis = subspace_basis(ds.graph);
  GcnModel model = make_model(ds.features.cols, hidden, ds.num_classes, depth,
                              Strategy::none, 0.0, 0.0, common.seed);
  SpectralReport sr = spectral_report(adj, basis, model.weights, tol);
  std::printf("diagnose: %s n=%zu edges=%zu components=%zu\n", ds.name.c_str(), ds.graph.n,
              ds.graph.num_edges(), ds.graph.num_components);
  std::printf("lambda = %.6f\n", sr.lambda);
  std::printf("s_sup = %.6f (fresh weights, per layer:", sr.s_sup);
  for (double s : sr.s_per_layer) std::printf(" %.4f", s);
  std::printf(")\n");

  LayerCache cache = forward(model, adj, ds.features, SamplePlan::zeros(ds.graph.n, depth),
                             Mode::eval);
  std::ofstream out(common.out + "/diagnose.csv");
  out << "layer,d_M,log_ratio,mad\n";
  double d0 = subspace_distance(ds.features, basis);
  char buf[160];
  auto emit = [&](std::size_t layer, const Dense& x) {
    double d = subspace_distance(x, basis);
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g\n", layer, d,
                  d0 > 0 ? std::log(d / d0) : 0.0, mad(x, ds.graph));
    out << buf;
  };
  emit(0, ds.features);
  for (std::size_t l = 1; l < depth; ++l) emit(l, cache.layers[l].input);
  emit(depth, cache.logits);
  return 0;
}

int run_gen(const CommonArgs& common, const json& cfg, std::string kind, CLI::Option* o_kind,
            std::size_t n, CLI::Option* o_n, double p, CLI::Option* o_p) {
  overlay(cfg, o_kind, "kind", kind);
  overlay(cfg, o_n, "n", n);
  overlay(cfg, o_p, "p", p);
  double p_in = cfg.value("p_in", 0.02);
  double p_out = cfg.value("p_out", 0.002);
  std::size_t classes = cfg.value("classes", 2);
  std::size_t feat_dim = cfg.value("feat_dim", 32);
  std::size_t train_per_class = cfg.value("train_per_class", 20);
  std::size_t val_count = cfg.value("val_count", n / 4);
  std::size_t test_count = cfg.value("test_count", n / 4);
  double mean_scale = cfg.value("mean_scale", 1.0);
  double noise = cfg.value("noise", 1.0);
  std::string feature_kind = cfg.value("feature_kind", std::string("gaussian"));
  std::size_t active_per_node = cfg.value("active_per_node", 20);
  double class_bias = cfg.value("class_bias", 0.75);
  double feature_scale = cfg.value("feature_scale", 1.0);
  std::string name = cfg.value("name", kind);

  ensure_out_dir(common.out);
  json echo = common_json(common);
  echo["subcommand"] = "gen";
  echo["kind"] = kind;
  echo["n"] = n;
  echo["p"] = p;
  echo["p_in"] = p_in;
  echo["p_out"] = p_out;
  echo["classes"] = classes;
  echo["feat_dim"] = feat_dim;
  echo["train_per_class"] = train_per_class;
  echo["val_count"] = val_count;
  echo["test_count"] = test_count;
  echo["mean_scale"] = mean_scale;
  echo["noise"] = noise;
  echo["feature_kind"] = feature_kind;
  echo["active_per_node"] = active_per_node;
  echo["class_bias"] = class_bias;
  echo["feature_scale"] = feature_scale;
  echo["name"] = name;
  write_json_file(echo, common.out + "/config.json");

  Dataset ds;
  ds.name = name;
  ds.num_classes = classes;
  Rng feat_rng = Rng::stream(common.seed, Stream::init);
  if (kind == "er") {
    ds.graph = erdos_renyi(n, p, common.seed);
    ds.labels.resize(n);
    Rng label_rng = Rng::stream(common.seed, Stream::sampling);
    for (auto& y : ds.labels) y = static_cast<int>(label_rng.next_u64() % classes);
  } else if (kind == "planted") {
    classes = 2;
    ds.num_classes = 2;
    ds.graph = planted_partition(n, p_in, p_out, common.seed);
    ds.labels.resize(n);
    std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = i < half ? 0 : 1;
  } else {
    throw std::invalid_argument("gen: unknown kind " + kind);
  }

  ds.features = Dense(n, feat_dim);
  if (feature_kind == "binary") {
    // bag-of-words style rows: a few active coordinates per node, biased
    // toward the class's half of the vocabulary
    std::size_t half = feat_dim / 2;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t own = static_cast<std::size_t>(ds.labels[i]) % 2;
      for (std::size_t k = 0; k < active_per_node; ++k) {
        bool in_class_half = feat_rng.bernoulli(class_bias);
        std::size_t base = (in_class_half == (own == 0)) ? 0 : half;
        std::size_t j = base + feat_rng.next_u64() % half;
        ds.features(i, j) = static_cast<double>(static_cast<float>(feature_scale));
      }
    }
  } else if (feature_kind == "gaussian") {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t anchor = static_cast<std::size_t>(ds.labels[i]) % feat_dim;
      for (std::size_t j = 0; j < feat_dim; ++j) {
        double v = noise * feat_rng.normal() + (j == anchor ? mean_scale : 0.0);
        ds.features(i, j) = static_cast<double>(static_cast<float>(v));  // survives f32 I/O
      }
    }
  } else {
    throw std::invalid_argument("gen: unknown feature_kind " + feature_kind);
  }

  // disjoint splits drawn from a shuffled id list, train filled per class
  Rng split_rng = Rng::stream(mix_seed(common.seed, 0x73706cULL), Stream::sampling);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[split_rng.next_u64() % i]);
  std::vector<std::size_t> per_class(classes, 0);
  for (std::size_t id : order) {
    auto y = static_cast<std::size_t>(ds.labels[id]);
    if (per_class[y] < train_per_class) {
      ds.train_ids.push_back(id);
      ++per_class[y];
    } else if (ds.val_ids.size() < val_count) {
      ds.val_ids.push_back(id);
    } else if (ds.test_ids.size() < test_count) {
      ds.test_ids.push_back(id);
    }
  }
  save_bundle(ds, common.out);
  std::printf("gen: %s bundle at %s (n=%zu edges=%zu classes=%zu)\n", kind.c_str(),
              common.out.c_str(), n, ds.graph.num_edges(), classes);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep GCN training, diagnostics and verification lab"};
  app.require_subcommand(1);

  CommonArgs common;
  int rc = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file");
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--out", common.out, "output directory");
  };
  auto config_json = [&]() {
    return common.config_path.empty() ? json::object() : load_json_file(common.config_path);
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "single training run");
  add_common(train_cmd);
  std::string tr_bundle, tr_strategy = "none", tr_trace = "trace.csv";
  std::size_t tr_depth = 2, tr_hidden = 64, tr_epochs = 500;
  double tr_rate = 0.0, tr_dropout = 0.5, tr_lr = 0.01, tr_wd = 5e-4;
  auto* tr_o_bundle = train_cmd->add_option("--bundle", tr_bundle, "dataset bundle directory");
  auto* tr_o_depth = train_cmd->add_option("--depth", tr_depth, "layer count");
  auto* tr_o_hidden = train_cmd->add_option("--hidden", tr_hidden, "hidden width");
  auto* tr_o_strategy = train_cmd->add_option("--strategy", tr_strategy, "training strategy");
  auto* tr_o_rate = train_cmd->add_option("--rate", tr_rate, "strategy rate");
  auto* tr_o_dropout = train_cmd->add_option("--dropout", tr_dropout, "dropout rate");
  auto* tr_o_lr = train_cmd->add_option("--lr", tr_lr, "learning rate");
  auto* tr_o_wd = train_cmd->add_option("--weight-decay", tr_wd, "L2 coefficient");
  auto* tr_o_epochs = train_cmd->add_option("--epochs", tr_epochs, "epoch count");
  train_cmd->add_option("--trace", tr_trace, "trace csv filename");
  train_cmd->callback([&]() {
    rc = run_train(common, config_json(), tr_o_bundle, tr_o_depth, tr_o_hidden, tr_o_strategy,
                   tr_o_rate, tr_o_dropout, tr_o_lr, tr_o_wd, tr_o_epochs, tr_bundle, tr_depth,
                   tr_hidden, tr_strategy, tr_rate, tr_dropout, tr_lr, tr_wd, tr_epochs,
                   tr_trace);
  });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "depth x strategy grid");
  add_common(sweep_cmd);
  std::string sw_bundle;
  std::size_t sw_epochs = 500, sw_threads = 0;
  auto* sw_o_bundle = sweep_cmd->add_option("--bundle", sw_bundle, "dataset bundle directory");
  auto* sw_o_epochs = sweep_cmd->add_option("--epochs", sw_epochs, "epoch count");
  sweep_cmd->add_option("--threads", sw_threads, "worker threads (0 = auto)");
  sweep_cmd->callback([&]() {
    rc = run_sweep(common, config_json(), sw_bundle, sw_o_bundle, sw_o_epochs, sw_epochs,
                   sw_threads);
  });

  // fig2
  auto* fig2_cmd = app.add_subcommand("fig2", "failure-mode diagnostics over epochs");
  add_common(fig2_cmd);
  std::string f2_bundle;
  std::size_t f2_depth = 9, f2_epochs = 500;
  auto* f2_o_bundle = fig2_cmd->add_option("--bundle", f2_bundle, "dataset bundle directory");
  auto* f2_o_depth = fig2_cmd->add_option("--depth", f2_depth, "layer count");
  auto* f2_o_epochs = fig2_cmd->add_option("--epochs", f2_epochs, "epoch count");
  fig2_cmd->callback([&]() {
    rc = run_fig2(common, config_json(), f2_bundle, f2_o_bundle, f2_depth, f2_o_depth,
                  f2_epochs, f2_o_epochs);
  });

  // fig4
  auto* fig4_cmd = app.add_subcommand("fig4", "skip-rate vs contraction experiment");
  add_common(fig4_cmd);
  fig4_cmd->callback([&]() { rc = run_fig4(common, config_json()); });

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "inequality verification suites");
  add_common(verify_cmd);
  std::string vf_suite = "all";
  std::size_t vf_instances = 1000;
  auto* vf_o_suite = verify_cmd->add_option("--suite", vf_suite,
                                            "all|triangle|upper|lower|gradient");
  auto* vf_o_instances = verify_cmd->add_option("--instances", vf_instances,
                                                "instances per sweep");
  verify_cmd->callback([&]() {
    rc = run_verify(common, config_json(), vf_suite, vf_o_suite, vf_instances, vf_o_instances);
  });

  // diagnose
  auto* diag_cmd = app.add_subcommand("diagnose", "static graph and spectral report");
  add_common(diag_cmd);
  std::string dg_bundle;
  std::size_t dg_depth = 9;
  auto* dg_o_bundle = diag_cmd->add_option("--bundle", dg_bundle, "dataset bundle directory");
  auto* dg_o_depth = diag_cmd->add_option("--depth", dg_depth, "probe model depth");
  diag_cmd->callback([&]() {
    rc = run_diagnose(common, config_json(), dg_bundle, dg_o_bundle, dg_depth, dg_o_depth);
  });

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic bundle");
  add_common(gen_cmd);
  std::string gn_kind = "er";
  std::size_t gn_n = 500;
  double gn_p = 0.5;
  auto* gn_o_kind = gen_cmd->add_option("--kind", gn_kind, "er|planted");
  auto* gn_o_n = gen_cmd->add_option("--n", gn_n, "node count");
  auto* gn_o_p = gen_cmd->add_option("--p", gn_p, "edge probability (er)");
  gen_cmd->callback([&]() {
    rc = run_gen(common, config_json(), gn_kind, gn_o_kind, gn_n, gn_o_n, gn_p, gn_o_p);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const BundleError& e) {
    std::fprintf(stderr, "bundle error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "convergence error: %s (last estimate %g)\n", e.what(),
                 e.last_estimate);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return rc;
}

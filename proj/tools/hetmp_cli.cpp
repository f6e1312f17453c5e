// hetmp: heterophily-informed message passing laboratory.
//
// Subcommands: metrics, train, benchmark, synth, flow-train, flow-generate,
// plotdata. Every run writes a resolved-config JSON next to its outputs;
// `hetmp --config FILE` reruns from such a file. Exit codes: 0 success,
// 2 usage error, 1 runtime error (one-line reason on stderr).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "hetmp/classify.hpp"
#include "hetmp/flow.hpp"
#include "hetmp/graph.hpp"
#include "hetmp/homophily.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hetmp;

namespace {

uint64_t default_seed() {
  const char* env = std::getenv("HETMP_SEED");
  if (!env || !*env) return 0;
  return std::strtoull(env, nullptr, 10);
}

void atomic_write(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
  }
  fs::rename(tmp, path);
}

/// Resolved config goes next to the main output so `--config` can rerun.
void write_config(const std::string& command, const json& params,
                  const std::string& out_path) {
  json cfg = {{"command", command}, {"params", params}};
  atomic_write(out_path + ".config.json", cfg.dump(2) + "\n");
}

std::vector<Graph> load_pool(const std::string& path) {
  std::vector<Graph> pool;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      std::string name = e.path().filename().string();
      if (e.path().extension() == ".json" && !name.ends_with(".config.json"))
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) pool.push_back(load_graph_auto(f.string()));
    if (!pool.empty()) return pool;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in);
  if (j.is_array()) {
    for (const auto& g : j) pool.push_back(graph_from_json(g.dump()));
  } else {
    pool.push_back(graph_from_json(j.dump()));
  }
  return pool;
}

json report_to_json(const RunReport& r) {
  return {{"family", r.family},
          {"mode", r.mode},
          {"per_seed", r.per_seed},
          {"mean", r.mean},
          {"std", r.stddev}};
}

// ---------------------------------------------------------------- metrics

int run_metrics(const json& p) {
  Graph g = load_graph_auto(p.at("data"));
  HomophilyReport r = homophily_report(g);
  json out = {{"h_node", r.h_node},
              {"h_edge", r.h_edge},
              {"h_ei", r.h_edge_insensitive},
              {"num_classes", r.num_classes}};
  std::string text = out.dump(2) + "\n";
  std::cout << text;
  std::string out_path = p.value("out", "");
  if (!out_path.empty()) {
    atomic_write(out_path, text);
    write_config("metrics", p, out_path);
  }
  return 0;
}

// ------------------------------------------------------------------ synth

int run_synth(const json& p) {
  SyntheticSpec spec;
  spec.num_nodes = p.at("n");
  spec.num_classes = p.at("classes");
  spec.p_in = p.at("p_in");
  spec.p_out = p.at("p_out");
  spec.seed = p.at("seed").get<uint64_t>();
  std::string fm = p.value("feature_mode", "onehot");
  if (fm == "onehot") {
    spec.feature_mode = FeatureMode::one_hot_label;
  } else if (fm == "gaussian") {
    spec.feature_mode = FeatureMode::gaussian_per_class;
  } else {
    throw std::runtime_error("unknown feature mode: " + fm);
  }
  spec.sigma = p.value("sigma", 0.5);
  Graph g = planted_partition(spec);
  std::string out_path = p.at("out");
  atomic_write(out_path, graph_to_json(g));
  write_config("synth", p, out_path);
  return 0;
}

// ------------------------------------------------------------ train/bench

ModelSpec model_spec_from(const json& p, const Graph& g) {
  ModelSpec spec;
  spec.family = family_from_string(p.value("family", "gcn"));
  spec.in_dim = g.features.shape[1];
  spec.hidden_dim = p.value("hidden", 128);
  spec.num_classes = g.num_classes;
  spec.depth = p.value("depth", 2);
  spec.dropout = p.value("dropout", 0.2);
  spec.share_channel_params = p.value("share_params", false);
  return spec;
}

TrainConfig train_config_from(const json& p) {
  TrainConfig cfg;
  cfg.lr = p.value("lr", 0.001);
  cfg.weight_decay = p.value("weight_decay", 0.0);
  cfg.max_epochs = p.value("epochs", 1000);
  cfg.patience = p.value("patience", 100);
  cfg.eval_metric = metric_from_string(p.value("metric", "acc"));
  return cfg;
}

std::vector<uint64_t> seed_list(const json& p) {
  uint64_t base = p.at("seed").get<uint64_t>();
  int n = p.value("seeds", 1);
  std::vector<uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = base + i;
  return seeds;
}

int run_train(const json& p) {
  Graph g = load_graph_auto(p.at("data"));
  ModelSpec spec = model_spec_from(p, g);
  spec.gamma = gamma_from_string(p.at("mode"));
  TrainConfig cfg = train_config_from(p);
  BenchmarkResult res =
      benchmark(g, spec, {spec.gamma}, seed_list(p), cfg);
  json out = report_to_json(res.reports[0]);
  std::string out_path = p.at("out");
  atomic_write(out_path, out.dump(2) + "\n");
  write_config("train", p, out_path);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_benchmark(const json& p) {
  Graph g = load_graph_auto(p.at("data"));
  TrainConfig cfg = train_config_from(p);
  std::vector<uint64_t> seeds = seed_list(p);
  std::vector<GammaMode> modes;
  for (const auto& m : p.at("modes")) modes.push_back(gamma_from_string(m));
  HomophilyReport hom = homophily_report(g);
  json reports = json::array(), deltas = json::array();
  for (const auto& fam : p.at("families")) {
    ModelSpec spec = model_spec_from(p, g);
    spec.family = family_from_string(fam);
    BenchmarkResult res = benchmark(g, spec, modes, seeds, cfg);
    const RunReport* orig = nullptr;
    for (const auto& r : res.reports) {
      reports.push_back(report_to_json(r));
      if (r.mode == "orig") orig = &r;
    }
    for (const auto& [mode, d] : res.deltas_vs_orig) {
      const RunReport* moded = nullptr;
      for (const auto& r : res.reports)
        if (r.mode == mode) moded = &r;
      json row = {{"family", fam},
                  {"mode", mode},
                  {"delta_per_seed", d},
                  {"delta_mean", mean_of(d)},
                  {"delta_std", stddev_of(d)}};
      if (orig && moded)
        row["p_value"] = paired_t_test(moded->per_seed, orig->per_seed);
      deltas.push_back(row);
    }
  }
  std::string name = p.value("name", "");
  if (name.empty()) name = fs::path(p.at("data").get<std::string>()).stem();
  json out = {{"dataset", name},
              {"h_ei", hom.h_edge_insensitive},
              {"h_node", hom.h_node},
              {"h_edge", hom.h_edge},
              {"metric", p.value("metric", "acc")},
              {"reports", reports},
              {"deltas", deltas}};
  std::string out_path = p.at("out");
  atomic_write(out_path, out.dump(2) + "\n");
  write_config("benchmark", p, out_path);
  return 0;
}

// ------------------------------------------------------------------- flow

int run_flow_train(const json& p) {
  std::vector<Graph> pool = load_pool(p.at("data"));
  if (pool.empty()) throw std::runtime_error("empty training pool");
  FlowConfig fc;
  fc.num_nodes = pool[0].num_nodes;
  fc.num_node_types = pool[0].num_classes;
  for (const auto& g : pool)
    fc.num_edge_types = std::max(fc.num_edge_types, g.num_edge_types);
  fc.layers_atom = p.value("layers_atom", 8);
  fc.layers_bond = p.value("layers_bond", 4);
  fc.sharing_mode = p.value("sharing", 1);
  fc.share_channel_params = p.value("share_params", false);
  FlowTrainConfig tc;
  tc.steps = p.value("steps", 300);
  tc.batch_size = p.value("batch", 8);
  tc.lr = p.value("lr", 0.001);
  tc.seed = p.at("seed").get<uint64_t>();
  Rng rng(tc.seed);
  FlowModel model = make_flow_model(fc, rng);
  FlowTrainResult res = flow_train(model, pool, tc);
  std::string out_path = p.at("out");
  save_flow_model(model, out_path);
  write_config("flow-train", p, out_path);
  std::string hist = p.value("history", "");
  if (!hist.empty()) {
    std::ostringstream os;
    os << std::setprecision(17) << "step,nll\n";
    for (size_t i = 0; i < res.nll_history.size(); ++i)
      os << (i + 1) << "," << res.nll_history[i] << "\n";
    atomic_write(hist, os.str());
  }
  return 0;
}

int run_flow_generate(const json& p) {
  FlowModel model = load_flow_model(p.at("model"));
  std::vector<Graph> pool;
  GenMode mode = gen_mode_from_string(p.value("mode", "full"));
  if (mode == GenMode::true_adj) pool = load_pool(p.at("data"));
  Rng rng(p.at("seed").get<uint64_t>());
  std::vector<Graph> graphs = generate(model, p.at("n"), mode, pool, rng);
  json arr = json::array();
  for (const auto& g : graphs) arr.push_back(json::parse(graph_to_json(g)));
  std::string out_path = p.at("out");
  atomic_write(out_path, arr.dump(2) + "\n");
  write_config("flow-generate", p, out_path);
  std::string hist = p.value("hist", "");
  if (!hist.empty())
    atomic_write(hist, histogram_csv(homophily_histogram(graphs)));
  return 0;
}

// --------------------------------------------------------------- plotdata

int run_plotdata(const json& p) {
  std::ostringstream os;
  os << std::setprecision(17)
     << "dataset,h_ei,family,mode,delta_mean,delta_std\n";
  for (const auto& file : p.at("reports")) {
    std::ifstream in(file.get<std::string>());
    if (!in)
      throw std::runtime_error("cannot open report " + file.get<std::string>());
    json r = json::parse(in);
    if (!r.contains("dataset") || !r.contains("h_ei") || !r.contains("deltas"))
      throw std::runtime_error("report schema mismatch in " +
                               file.get<std::string>());
    for (const auto& d : r.at("deltas")) {
      os << r.at("dataset").get<std::string>() << ","
         << r.at("h_ei").get<double>() << ","
         << d.at("family").get<std::string>() << ","
         << d.at("mode").get<std::string>() << ","
         << d.at("delta_mean").get<double>() << ","
         << d.at("delta_std").get<double>() << "\n";
    }
  }
  std::string out_path = p.at("out");
  atomic_write(out_path, os.str());
  write_config("plotdata", p, out_path);
  return 0;
}

int dispatch(const std::string& command, const json& p) {
  if (command == "metrics") return run_metrics(p);
  if (command == "synth") return run_synth(p);
  if (command == "train") return run_train(p);
  if (command == "benchmark") return run_benchmark(p);
  if (command == "flow-train") return run_flow_train(p);
  if (command == "flow-generate") return run_flow_generate(p);
  if (command == "plotdata") return run_plotdata(p);
  throw std::runtime_error("unknown command in config: " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterophily-informed message passing laboratory"};
  app.require_subcommand(0, 1);
  std::string config_file;
  app.add_option("--config", config_file,
                 "rerun from a resolved-config JSON file");

  uint64_t seed = default_seed();
  json p;  // resolved parameters of the chosen subcommand

  auto* metrics = app.add_subcommand("metrics", "homophily statistics");
  std::string m_data, m_out;
  metrics->add_option("--data", m_data, "graph file or dataset dir")
      ->required();
  metrics->add_option("--out", m_out, "also write the JSON here");

  auto* synth = app.add_subcommand("synth", "planted-partition generator");
  int s_n = 0, s_classes = 2;
  double s_pin = 0.5, s_pout = 0.0, s_sigma = 0.5;
  std::string s_fm = "onehot", s_out;
  synth->add_option("--n", s_n, "number of nodes")->required();
  synth->add_option("--classes", s_classes, "number of classes");
  synth->add_option("--p-in", s_pin, "intra-class edge probability");
  synth->add_option("--p-out", s_pout, "inter-class edge probability");
  synth->add_option("--feature-mode", s_fm, "onehot|gaussian");
  synth->add_option("--sigma", s_sigma, "gaussian feature stddev");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", s_out, "output graph-json path")->required();

  auto* train = app.add_subcommand("train", "train one family/mode");
  auto* bench = app.add_subcommand("benchmark", "families x modes sweep");
  std::string t_data, t_family = "gcn", t_mode = "orig", t_metric = "acc",
              t_out;
  std::vector<std::string> b_families{"gcn"}, b_modes{"orig", "mix"};
  std::string b_name;
  int t_seeds = 1, t_hidden = 128, t_depth = 2, t_epochs = 1000,
      t_patience = 100;
  double t_lr = 0.001, t_dropout = 0.2, t_wd = 0.0;
  bool t_share = false;
  for (CLI::App* c : {train, bench}) {
    c->add_option("--data", t_data, "graph file or dataset dir")->required();
    c->add_option("--seeds", t_seeds, "number of seeds");
    c->add_option("--seed", seed, "base seed");
    c->add_option("--hidden", t_hidden, "hidden width");
    c->add_option("--depth", t_depth, "number of layers");
    c->add_option("--lr", t_lr, "learning rate");
    c->add_option("--dropout", t_dropout, "dropout ratio");
    c->add_option("--weight-decay", t_wd, "AdamW weight decay");
    c->add_option("--epochs", t_epochs, "max epochs");
    c->add_option("--patience", t_patience, "early-stopping patience");
    c->add_option("--metric", t_metric, "acc|auc");
    c->add_flag("--share-params", t_share, "share channel parameters");
    c->add_option("--out", t_out, "report JSON path")->required();
  }
  train->add_option("--family", t_family, "gcn|gat|gin|sage");
  train->add_option("--mode", t_mode, "orig|hom|het|mix");
  bench->add_option("--families", b_families, "families to sweep");
  bench->add_option("--modes", b_modes, "modes to sweep");
  bench->add_option("--name", b_name, "dataset name in the report");

  auto* ftrain = app.add_subcommand("flow-train", "train the coupling flow");
  std::string f_data, f_out, f_history;
  int f_la = 8, f_lb = 4, f_steps = 300, f_batch = 8, f_sharing = 1;
  double f_lr = 0.001;
  bool f_share = false;
  ftrain->add_option("--data", f_data, "pool: dir of graph-json files")
      ->required();
  ftrain->add_option("--layers-atom", f_la, "atom coupling layers");
  ftrain->add_option("--layers-bond", f_lb, "bond coupling layers");
  ftrain->add_option("--steps", f_steps, "optimizer steps");
  ftrain->add_option("--batch", f_batch, "batch size");
  ftrain->add_option("--lr", f_lr, "learning rate");
  ftrain->add_option("--sharing", f_sharing, "latent variance mode 0|1|2");
  ftrain->add_flag("--share-params", f_share, "share channel parameters");
  ftrain->add_option("--seed", seed, "training seed");
  ftrain->add_option("--out", f_out, "model JSON path")->required();
  ftrain->add_option("--history", f_history, "NLL-per-step CSV path");

  auto* fgen = app.add_subcommand("flow-generate", "sample graphs");
  std::string g_model, g_mode = "full", g_data, g_out, g_hist;
  int g_n = 0;
  fgen->add_option("--model", g_model, "model JSON path")->required();
  fgen->add_option("--n", g_n, "number of graphs")->required();
  fgen->add_option("--mode", g_mode, "full|true_adj");
  fgen->add_option("--data", g_data, "pool for true_adj mode");
  fgen->add_option("--seed", seed, "sampling seed");
  fgen->add_option("--out", g_out, "output graphs JSON path")->required();
  fgen->add_option("--hist", g_hist, "node-homophily histogram CSV path");

  auto* plot = app.add_subcommand("plotdata", "tidy CSV from reports");
  std::vector<std::string> p_reports;
  std::string p_out;
  plot->add_option("--reports", p_reports, "benchmark report files")
      ->required();
  plot->add_option("--out", p_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot open config " + config_file);
      json cfg = json::parse(in);
      return dispatch(cfg.at("command"), cfg.at("params"));
    }
    if (metrics->parsed()) {
      p = {{"data", m_data}};
      if (!m_out.empty()) p["out"] = m_out;
      return run_metrics(p);
    }
    if (synth->parsed()) {
      p = {{"n", s_n},           {"classes", s_classes},
           {"p_in", s_pin},      {"p_out", s_pout},
           {"feature_mode", s_fm}, {"sigma", s_sigma},
           {"seed", seed},       {"out", s_out}};
      return run_synth(p);
    }
    if (train->parsed() || bench->parsed()) {
      p = {{"data", t_data},       {"seeds", t_seeds},
           {"seed", seed},         {"hidden", t_hidden},
           {"depth", t_depth},     {"lr", t_lr},
           {"dropout", t_dropout}, {"weight_decay", t_wd},
           {"epochs", t_epochs},   {"patience", t_patience},
           {"metric", t_metric},   {"share_params", t_share},
           {"out", t_out}};
      if (train->parsed()) {
        p["family"] = t_family;
        p["mode"] = t_mode;
        return run_train(p);
      }
      p["families"] = b_families;
      p["modes"] = b_modes;
      if (!b_name.empty()) p["name"] = b_name;
      return run_benchmark(p);
    }
    if (ftrain->parsed()) {
      p = {{"data", f_data},        {"layers_atom", f_la},
           {"layers_bond", f_lb},   {"steps", f_steps},
           {"batch", f_batch},      {"lr", f_lr},
           {"sharing", f_sharing},  {"share_params", f_share},
           {"seed", seed},          {"out", f_out}};
      if (!f_history.empty()) p["history"] = f_history;
      return run_flow_train(p);
    }
    if (fgen->parsed()) {
      p = {{"model", g_model}, {"n", g_n},     {"mode", g_mode},
           {"seed", seed},     {"out", g_out}};
      if (!g_data.empty()) p["data"] = g_data;
      if (!g_hist.empty()) p["hist"] = g_hist;
      return run_flow_generate(p);
    }
    if (plot->parsed()) {
      p = {{"reports", p_reports}, {"out", p_out}};
      return run_plotdata(p);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::cerr << app.help();
  return 2;
}

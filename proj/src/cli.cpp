#include "cadence/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "binary_io.hpp"
#include "cadence/checkpoint.hpp"
#include "cadence/error.hpp"
#include "cadence/features.hpp"
#include "cadence/graph.hpp"
#include "cadence/kern.hpp"
#include "cadence/metrics.hpp"
#include "cadence/score.hpp"
#include "cadence/splits.hpp"
#include "cadence/synthetic.hpp"
#include "cadence/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cadence::cli {

namespace {

/// Raised for bad flag combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string stem_of(const fs::path& p) {
  std::string name = p.filename().string();
  for (std::string_view ext : {".meta.json", ".krn", ".tsv", ".json", ".sggr"})
    if (ends_with(name, ext)) return name.substr(0, name.size() - ext.size());
  return p.stem().string();
}

std::vector<fs::path> files_with(const fs::path& dir, std::string_view ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && ends_with(e.path().filename().string(), ext)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json read_json(const fs::path& p) {
  try {
    return json::parse(io::read_file(p.string()));
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) { io::write_file(p.string(), text); }

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

/// Reads one score from a .krn, a TSV note table (with <stem>.meta.json) or
/// a single-document JSON note table.
Score load_score(const fs::path& p, std::vector<std::string>& warnings) {
  const std::string name = p.filename().string();
  const std::string stem = stem_of(p);
  const fs::path sidecar = p.parent_path() / (stem + ".meta.json");
  if (ends_with(name, ".krn")) {
    Score s = parse_kern(io::read_file(p.string()), stem, &warnings);
    if (fs::exists(sidecar)) s = with_annotations(s, parse_cadence_list(read_json(sidecar)));
    return s;
  }
  if (ends_with(name, ".tsv")) {
    if (!fs::exists(sidecar)) throw DataError("missing sidecar " + sidecar.string());
    json meta = read_json(sidecar);
    return parse_note_table(io::read_file(p.string()), meta, meta.value("piece_id", stem));
  }
  if (ends_with(name, ".json")) return parse_note_table_json(read_json(p), stem);
  throw DataError("unsupported input type: " + p.string());
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const std::string n = e.path().filename().string();
        if (!e.is_regular_file() || ends_with(n, ".meta.json")) continue;
        if (ends_with(n, ".krn") || ends_with(n, ".tsv") || ends_with(n, ".json")) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      if (!fs::exists(p)) throw DataError("no such file: " + in);
      out.push_back(p);
    }
  }
  return out;
}

struct GraphSet {
  std::vector<ScoreGraph> graphs;  // sorted by piece id
  std::vector<std::string> ids;
};

GraphSet load_graphs(const fs::path& dir) {
  GraphSet gs;
  for (const auto& p : files_with(dir, ".sggr")) {
    try {
      gs.graphs.push_back(load_graph(p.string()));
    } catch (const DataError& e) {
      throw DataError(p.string() + ": " + e.what());
    }
    gs.ids.push_back(gs.graphs.back().piece_id());
  }
  if (gs.graphs.empty()) throw DataError("no .sggr graph files in " + dir.string());
  return gs;
}

ScoreGraph union_of(const GraphSet& gs, const std::vector<std::string>& ids) {
  std::vector<ScoreGraph> chosen;
  for (const auto& id : ids) {
    auto it = std::find(gs.ids.begin(), gs.ids.end(), id);
    if (it == gs.ids.end()) throw DataError("piece '" + id + "' not found among the graphs");
    chosen.push_back(gs.graphs[static_cast<std::size_t>(it - gs.ids.begin())]);
  }
  return disjoint_union(chosen);
}

void write_run_config(const fs::path& dir, const std::string& command, const json& inputs, const json& options,
                      const TrainConfig* train) {
  json cfg{{"command", command}, {"inputs", inputs}, {"options", options}};
  if (train) cfg["train"] = train->to_json();
  write_json(dir / "config.json", cfg);
}

/// Train-config flags. Values land in `overrides` only when given.
struct TrainFlags {
  json overrides = json::object();
  int hidden_dim = 0, layers = 0, batch_size = 0, smote_k = 0, epochs = 0;
  std::vector<int> fanouts;
  double lr = 0, weight_decay = 0, gamma = 0, tau = 0;
  std::uint64_t seed = 0;
  std::string scheme, feature_set;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  void attach(CLI::App* app, bool model_flags) {
    opts.push_back({"seed", app->add_option("--seed", seed, "Random seed")});
    opts.push_back({"scheme", app->add_option("--scheme", scheme, "Cadence classes, e.g. PAC or PAC,rIAC,HC")});
    opts.push_back({"feature_set", app->add_option("--feature-set", feature_set, "all or general")});
    if (!model_flags) return;
    opts.push_back({"hidden_dim", app->add_option("--hidden", hidden_dim, "Hidden dimension")});
    opts.push_back({"layers", app->add_option("--layers", layers, "Encoder depth (0 = no convolution)")});
    opts.push_back({"fanouts", app->add_option("--fanouts", fanouts, "Neighbor fanouts, outermost hop first")->delimiter(',')});
    opts.push_back({"lr", app->add_option("--lr", lr, "Learning rate")});
    opts.push_back({"weight_decay", app->add_option("--weight-decay", weight_decay, "Decoupled weight decay")});
    opts.push_back({"batch_size", app->add_option("--batch-size", batch_size, "Seed nodes per batch")});
    opts.push_back({"smote_k", app->add_option("--smote-k", smote_k, "SMOTE neighbors")});
    opts.push_back({"gamma", app->add_option("--gamma", gamma, "Decoder loss weight")});
    opts.push_back({"tau", app->add_option("--tau", tau, "Adjacency threshold")});
    opts.push_back({"epochs", app->add_option("--epochs", epochs, "Training epochs")});
  }

  /// Config file values first, then flags.
  TrainConfig resolve(const std::string& config_path) {
    TrainConfig cfg;
    if (!config_path.empty()) {
      json j = read_json(config_path);
      cfg = TrainConfig::from_json(j.contains("train") ? j.at("train") : j, cfg);
    }
    json o = json::object();
    for (auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      if (key == "seed") o[key] = seed;
      else if (key == "scheme") o[key] = scheme;
      else if (key == "feature_set") o[key] = feature_set;
      else if (key == "hidden_dim") o[key] = hidden_dim;
      else if (key == "layers") o[key] = layers;
      else if (key == "fanouts") o[key] = fanouts;
      else if (key == "lr") o[key] = lr;
      else if (key == "weight_decay") o[key] = weight_decay;
      else if (key == "batch_size") o[key] = batch_size;
      else if (key == "smote_k") o[key] = smote_k;
      else if (key == "gamma") o[key] = gamma;
      else if (key == "tau") o[key] = tau;
      else if (key == "epochs") o[key] = epochs;
    }
    // Changing the depth alone keeps the default fanout pattern consistent.
    if (o.contains("layers") && !o.contains("fanouts")) {
      const int l = o["layers"].get<int>();
      std::vector<int> f = cfg.fanouts;
      f.resize(static_cast<std::size_t>(std::max(l, 0)), f.empty() ? 10 : f.front());
      if (l == 2 && cfg.fanouts.size() != 2) f = {10, 25};
      o["fanouts"] = f;
    }
    cfg = TrainConfig::from_json(o, cfg);
    cfg.validate();
    return cfg;
  }
};

/// Options from a resolved run config, used as defaults for unset flags.
json config_options(const std::string& config_path) {
  if (config_path.empty()) return json::object();
  json j = read_json(config_path);
  return j.value("options", json::object());
}

template <typename T>
void default_from(CLI::Option* opt, T& target, const json& options, const char* key) {
  if (opt->count() == 0 && options.contains(key)) target = options.at(key).get<T>();
}

// --- commands ---------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& out_dir, const std::string& scheme_text,
               std::ostream& out, std::ostream& err) {
  const LabelScheme scheme = LabelScheme::parse(scheme_text);
  auto files = expand_inputs(inputs);
  if (files.empty()) throw DataError("no input files");
  ensure_dir(out_dir);
  std::size_t pieces = 0, notes = 0, positive = 0;
  std::vector<std::string> failed;
  std::map<std::string, fs::path> seen;
  for (const auto& f : files) {
    try {
      std::vector<std::string> warnings;
      Score s = load_score(f, warnings);
      if (auto [it, fresh] = seen.emplace(s.piece_id(), f); !fresh)
        throw DataError("piece id '" + s.piece_id() + "' also produced by " + it->second.string());
      Labeling lab = assign_labels(s, scheme);
      warnings.insert(warnings.end(), lab.warnings.begin(), lab.warnings.end());
      for (const auto& w : warnings) err << f.string() << ": warning: " << w << "\n";
      write_text(fs::path(out_dir) / (s.piece_id() + ".tsv"), write_note_table_tsv(s));
      write_json(fs::path(out_dir) / (s.piece_id() + ".meta.json"), write_note_table_meta(s));
      ++pieces;
      notes += s.size();
      for (int l : lab.labels) positive += l != 0 ? 1 : 0;
    } catch (const DataError& e) {
      err << f.string() << ": error: " << e.what() << "\n";
      failed.push_back(f.string());
    }
  }
  const double rate = notes ? static_cast<double>(positive) / static_cast<double>(notes) : 0.0;
  out << "pieces " << pieces << ", nodes " << notes << ", label rate " << std::fixed << std::setprecision(2)
      << 100.0 * rate << "% (" << scheme.to_string() << ")\n";
  if (rate >= 0.02) out << "warning: label rate is not below 2% of nodes; check the annotations\n";
  write_run_config(out_dir, "ingest", inputs, {{"scheme", scheme.to_string()}}, nullptr);
  if (!failed.empty()) {
    err << failed.size() << " file(s) failed\n";
    return kData;
  }
  return kOk;
}

int cmd_build(const std::string& score_dir, const std::string& out_dir, const std::string& scheme_text,
              const std::string& set_text, std::ostream& out, std::ostream& err) {
  const LabelScheme scheme = LabelScheme::parse(scheme_text);
  const FeatureSet set = parse_feature_set(set_text);
  auto files = files_with(score_dir, ".tsv");
  if (files.empty()) throw DataError("no .tsv note tables in " + score_dir);
  ensure_dir(out_dir);
  std::size_t nodes = 0, edges = 0;
  std::string manifest_hash;
  json manifest;
  for (const auto& f : files) {
    std::vector<std::string> warnings;
    Score s = load_score(f, warnings);
    ScoreGraph g = build_score_graph(s, scheme, set, &warnings);
    for (const auto& w : warnings) err << f.string() << ": warning: " << w << "\n";
    save_graph(g, (fs::path(out_dir) / (s.piece_id() + ".sggr")).string());
    nodes += g.n;
    edges += g.num_edges();
    manifest_hash = g.manifest.hash();
    manifest = g.manifest.to_json();
  }
  write_json(fs::path(out_dir) / "feature_manifest.json", manifest);
  json options{{"scheme", scheme.to_string()}, {"feature_set", std::string(to_string(set))},
               {"feature_width", manifest.size()}, {"manifest_hash", manifest_hash}};
  write_run_config(out_dir, "build", json::array({score_dir}), options, nullptr);
  out << "graphs " << files.size() << ", nodes " << nodes << ", edges " << edges << ", features " << manifest.size()
      << " (" << to_string(set) << ")\n";
  return kOk;
}

/// Reads the build options of a graph directory, if recorded.
json build_options(const fs::path& graph_dir) {
  const fs::path p = graph_dir / "config.json";
  if (!fs::exists(p)) return json::object();
  json j = read_json(p);
  return j.value("command", "") == "build" ? j.value("options", json::object()) : json::object();
}

std::vector<Split> splits_for(const std::string& mode, const std::vector<std::string>& ids, std::uint64_t seed) {
  if (mode == "all") return {Split{ids, {}, {}}};
  return make_splits(ids, parse_split_mode(mode), seed);
}

int cmd_train(const std::string& graph_dir, const std::string& out_dir, TrainFlags& flags,
              const std::string& config_path, std::string split_mode, int fold, std::string pretrained,
              CLI::Option* split_opt, CLI::Option* fold_opt, CLI::Option* pre_opt, std::ostream& out, std::ostream&) {
  TrainConfig cfg = flags.resolve(config_path);
  const json file_options = config_options(config_path);
  default_from(split_opt, split_mode, file_options, "split");
  default_from(fold_opt, fold, file_options, "fold");
  default_from(pre_opt, pretrained, file_options, "pretrained");

  const json built = build_options(graph_dir);
  if (built.contains("scheme") && built["scheme"].get<std::string>() != cfg.scheme.to_string())
    throw UsageError("graphs were built for scheme " + built["scheme"].get<std::string>() + ", config says " +
                     cfg.scheme.to_string());
  if (built.contains("feature_set") && built["feature_set"].get<std::string>() != to_string(cfg.feature_set))
    throw UsageError("graphs were built with feature set " + built["feature_set"].get<std::string>() +
                     ", config says " + std::string(to_string(cfg.feature_set)));

  GraphSet gs = load_graphs(graph_dir);
  auto splits = splits_for(split_mode, gs.ids, cfg.seed);
  if (fold < 0 || static_cast<std::size_t>(fold) >= splits.size())
    throw UsageError("fold " + std::to_string(fold) + " out of range (0.." + std::to_string(splits.size() - 1) + ")");
  const Split& split = splits[static_cast<std::size_t>(fold)];
  ScoreGraph train_graph = union_of(gs, split.train);
  std::optional<ScoreGraph> val_graph;
  if (!split.val.empty()) val_graph = union_of(gs, split.val);

  std::optional<ModelParams> init;
  if (!pretrained.empty()) {
    if (!fs::exists(pretrained)) throw DataError("no such checkpoint: " + pretrained);
    init = load_checkpoint(pretrained).params;
    if (init->config.manifest_hash != train_graph.manifest.hash())
      throw DataError("pretrained checkpoint was trained on a different feature manifest");
  }

  ensure_dir(out_dir);
  json options{{"split", split_mode}, {"fold", fold}, {"pretrained", pretrained}};
  write_run_config(out_dir, "train", json::array({graph_dir}), options, &cfg);
  write_json(fs::path(out_dir) / "split.json", {{"train", split.train}, {"val", split.val}, {"test", split.test}});

  std::ofstream log((fs::path(out_dir) / "train_log.jsonl").string(), std::ios::binary);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) {
    log << e.to_json().dump() << "\n";
    log.flush();
    out << "epoch " << e.epoch << " loss " << e.loss_total;
    if (e.val_macro_f1) out << " val_macro_f1 " << *e.val_macro_f1;
    out << "\n";
  };
  TrainResult result = train(train_graph, val_graph ? &*val_graph : nullptr, cfg, init ? &*init : nullptr, hooks);
  json extra{{"train", cfg.to_json()}, {"best_epoch", result.best_epoch}, {"scheme", cfg.scheme.to_string()}};
  save_checkpoint(result.params, (fs::path(out_dir) / "model.sgsm").string(), extra);
  out << "best epoch " << result.best_epoch << ", checkpoint " << (fs::path(out_dir) / "model.sgsm").string() << "\n";
  return kOk;
}

std::vector<std::string> pieces_for_eval(const GraphSet& gs, const std::string& split_file, const std::string& subset) {
  if (split_file.empty()) return gs.ids;
  json j = read_json(split_file);
  if (!j.contains(subset)) throw UsageError("split file has no '" + subset + "' list");
  auto ids = j.at(subset).get<std::vector<std::string>>();
  if (ids.empty()) throw UsageError("split subset '" + subset + "' is empty");
  return ids;
}

json evaluate(const ModelParams& params, const ScoreGraph& g, const std::vector<Level>& levels, int classes) {
  PredictOptions po;
  po.threads = worker_threads();
  Tensor2 probs = predict(params, g, po);
  std::vector<int> preds = argmax_rows(probs);
  std::vector<int> labels(g.labels.begin(), g.labels.end());
  json report = json::object();
  for (Level l : levels) {
    auto groups = groups_for(g, l);
    GroupOutcome o = aggregate(preds, probs, labels, groups);
    report[std::string(to_string(l))] = f1_report(o.preds, o.labels, classes).to_json();
  }
  return report;
}

int cmd_eval(const std::string& ckpt, const std::string& graph_dir, const std::string& out_path,
             const std::string& split_file, const std::string& subset, const std::string& levels_text,
             std::ostream& out) {
  const auto levels = parse_levels(levels_text);
  if (!fs::exists(ckpt)) throw DataError("no such checkpoint: " + ckpt);
  Checkpoint ck = load_checkpoint(ckpt);
  GraphSet gs = load_graphs(graph_dir);
  auto ids = pieces_for_eval(gs, split_file, subset);
  ScoreGraph g = union_of(gs, ids);
  json metrics{{"pieces", ids},
               {"scheme", ck.header.value("scheme", std::string())},
               {"num_classes", ck.params.config.num_classes},
               {"nodes", g.n},
               {"levels", evaluate(ck.params, g, levels, ck.params.config.num_classes)}};
  fs::path dest(out_path);
  if (dest.has_parent_path()) ensure_dir(dest.parent_path());
  write_json(dest, metrics);
  json options{{"checkpoint", ckpt}, {"split_file", split_file}, {"subset", subset}, {"levels", levels_text}};
  write_run_config(dest.has_parent_path() ? dest.parent_path() : fs::path("."), "eval", json::array({graph_dir}),
                   options, nullptr);
  for (Level l : levels)
    out << to_string(l) << " f1 " << metrics["levels"][std::string(to_string(l))]["f1"].get<double>() << "\n";
  return kOk;
}

int cmd_predict(const std::string& ckpt, const std::vector<std::string>& graph_paths, const std::string& out_path,
                std::ostream& out) {
  if (!fs::exists(ckpt)) throw DataError("no such checkpoint: " + ckpt);
  Checkpoint ck = load_checkpoint(ckpt);
  std::vector<fs::path> files;
  for (const auto& p : graph_paths) {
    if (fs::is_directory(p)) {
      auto f = files_with(p, ".sggr");
      files.insert(files.end(), f.begin(), f.end());
    } else {
      if (!fs::exists(p)) throw DataError("no such graph file: " + p);
      files.emplace_back(p);
    }
  }
  if (files.empty()) throw DataError("no graphs to predict");
  std::ostringstream tsv;
  tsv << "node_id\tpiece\tonset\tclass\tprobability\n";
  tsv << std::setprecision(17);
  std::size_t total = 0;
  PredictOptions po;
  po.threads = worker_threads();
  for (const auto& f : files) {
    ScoreGraph g = load_graph(f.string());
    Tensor2 probs = predict(ck.params, g, po);
    auto preds = argmax_rows(probs);
    for (std::uint32_t v = 0; v < g.n; ++v) {
      const auto& piece = g.pieces[g.piece_of(v)];
      tsv << (v - piece.first) << '\t' << piece.piece_id << '\t' << g.onsets[v] << '\t' << preds[v] << '\t'
          << probs(v, preds[v]) << '\n';
    }
    total += g.n;
  }
  fs::path dest(out_path);
  if (dest.has_parent_path()) ensure_dir(dest.parent_path());
  write_text(dest, tsv.str());
  out << "predicted " << total << " nodes in " << files.size() << " graph(s)\n";
  return kOk;
}

int cmd_synth(const std::string& out_dir, int pieces, const std::string& mode, int measures, std::uint64_t seed,
              std::ostream& out) {
  if (pieces < 1) throw UsageError("--pieces must be positive");
  SynthOptions so;
  so.mode = parse_synth_mode(mode);
  so.measures = measures;
  ensure_dir(out_dir);
  std::size_t nodes = 0;
  for (const auto& s : synthetic_corpus(pieces, so, seed)) {
    write_text(fs::path(out_dir) / (s.piece_id() + ".tsv"), write_note_table_tsv(s));
    write_json(fs::path(out_dir) / (s.piece_id() + ".meta.json"), write_note_table_meta(s));
    nodes += s.size();
  }
  write_run_config(out_dir, "synth", json::array(),
                   {{"pieces", pieces}, {"mode", mode}, {"measures", measures}, {"seed", seed}}, nullptr);
  out << "wrote " << pieces << " synthetic pieces (" << nodes << " nodes) to " << out_dir << "\n";
  return kOk;
}

}  // namespace

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("SGSM_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(cap, &end, 10);
    if (end != cap && v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cadence detection on symbolic scores with stochastic graph SMOTE", "cadence"};
  app.require_subcommand(1);

  std::vector<std::string> inputs;
  std::string out_dir, scheme = "PAC", feature_set = "all", config_path, split_mode = "all", pretrained;
  std::string ckpt, graph_dir, split_file, subset = "test", levels = "note,onset,beat", synth_mode = "local";
  int fold = 0, pieces = 20, measures = 48;
  std::uint64_t synth_seed = 0;

  auto* ingest = app.add_subcommand("ingest", "Parse .krn / note tables into canonical note tables");
  ingest->add_option("inputs", inputs, "Files or directories")->required();
  ingest->add_option("--out", out_dir, "Output directory")->required();
  ingest->add_option("--scheme", scheme, "Cadence classes used for the label-rate summary");

  auto* build = app.add_subcommand("build", "Build graph files from note tables");
  build->add_option("scores", graph_dir, "Directory of note tables")->required();
  build->add_option("--out", out_dir, "Output directory")->required();
  build->add_option("--scheme", scheme, "Cadence classes, e.g. PAC or PAC,rIAC,HC");
  build->add_option("--feature-set", feature_set, "all or general");

  TrainFlags flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a graph directory");
  train_cmd->add_option("graphs", graph_dir, "Directory of .sggr graphs")->required();
  train_cmd->add_option("--out", out_dir, "Run directory")->required();
  train_cmd->add_option("--config", config_path, "JSON config (flags override it)");
  auto* split_opt = train_cmd->add_option("--split", split_mode, "all, fixed-list, random-half or kfold");
  auto* fold_opt = train_cmd->add_option("--fold", fold, "Split index for kfold");
  auto* pre_opt = train_cmd->add_option("--pretrained", pretrained, "Checkpoint to fine-tune");
  flags.attach(train_cmd, true);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint at note/onset/beat level");
  eval_cmd->add_option("checkpoint", ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("graphs", graph_dir, "Directory of .sggr graphs")->required();
  eval_cmd->add_option("--out", out_dir, "Metrics JSON path")->required();
  eval_cmd->add_option("--split-file", split_file, "split.json written by train");
  eval_cmd->add_option("--subset", subset, "train, val or test (with --split-file)");
  eval_cmd->add_option("--levels", levels, "Comma-separated: note,onset,beat");

  auto* predict_cmd = app.add_subcommand("predict", "Dump per-node predictions as TSV");
  predict_cmd->add_option("checkpoint", ckpt, "Model checkpoint")->required();
  predict_cmd->add_option("graphs", inputs, "Graph files or directories")->required();
  predict_cmd->add_option("--out", out_dir, "Output TSV path")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted cadences");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--pieces", pieces, "Number of pieces");
  synth->add_option("--mode", synth_mode, "local or context");
  synth->add_option("--measures", measures, "Measures per piece");
  synth->add_option("--seed", synth_seed, "Random seed");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'cadence --help' for usage\n";
    return kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(inputs, out_dir, scheme, out, err);
    if (*build) return cmd_build(graph_dir, out_dir, scheme, feature_set, out, err);
    if (*train_cmd)
      return cmd_train(graph_dir, out_dir, flags, config_path, split_mode, fold, pretrained, split_opt, fold_opt,
                       pre_opt, out, err);
    if (*eval_cmd) return cmd_eval(ckpt, graph_dir, out_dir, split_file, subset, levels, out);
    if (*predict_cmd) return cmd_predict(ckpt, inputs, out_dir, out);
    if (*synth) return cmd_synth(out_dir, pieces, synth_mode, measures, synth_seed, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace cadence::cli

// Copyright 2026 The lowres Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowres/checkpoint.hpp"
#include "lowres/clip_io.hpp"
#include "lowres/config.hpp"
#include "lowres/coupler.hpp"
#include "lowres/gradcheck.hpp"
#include "lowres/pipeline.hpp"
#include "lowres/report.hpp"
#include "lowres/synthact.hpp"
#include "lowres/workspace.hpp"

namespace lowres::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config_path;
  std::string workdir = "work";
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> overrides;
  bool seed_given = false;
  bool threads_given = false;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

/// Defaults, then the config file (--config, else <workdir>/config.ini), then --set, --seed, --threads.
RunConfig resolve_config(const Globals& g, const Workspace& ws) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path)) throw std::invalid_argument("--config: file not found: " + g.config_path);
    cfg = load_run_config(g.config_path);
  } else if (fs::exists(ws.config_file())) {
    cfg = load_run_config(ws.config_file().string());
  }
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects section.key=value, got '" + o + "'");
    set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (g.seed_given) {
    cfg.data.seed = g.seed;
    cfg.split_seed = g.seed;
    cfg.train.seed = g.seed;
  }
  if (g.threads_given) cfg.train.threads = g.threads;
  cfg.validate();
  return cfg;
}

bool needs(StreamSet streams, Stream s) {
  return s == Stream::Spatial ? streams != StreamSet::Temporal : streams != StreamSet::Spatial;
}

bool clip_complete(const fs::path& dir, int frames) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.ppm", frames);
  return fs::exists(dir / name);
}

/// Entries used by training (HIGH too when coupled) and testing (LOW only).
std::vector<ManifestEntry> working_entries(const DatasetManifest& m, bool coupled, bool train, bool test) {
  std::vector<ManifestEntry> out;
  for (const auto& e : m.entries) {
    const bool is_train = e.split == "train";
    const bool is_test = e.split == "test";
    if (is_train && train && (e.resolution == Resolution::Low || coupled)) out.push_back(e);
    if (is_test && test && e.resolution == Resolution::Low) out.push_back(e);
  }
  return out;
}

DatasetManifest require_split_manifest(const Workspace& ws) {
  if (!fs::exists(ws.manifest_file())) {
    throw std::invalid_argument("no dataset at " + ws.manifest_file().string() + "; run `lowres synth` first");
  }
  DatasetManifest m = ws.manifest();
  for (const auto& e : m.entries) {
    if (e.split == "none") throw std::invalid_argument("manifest has unsplit clips; rerun `lowres synth`");
  }
  return m;
}

int cmd_synth(const RunConfig& cfg, const Workspace& ws, std::ostream& out) {
  const DatasetManifest all = generate_dataset(cfg.data, ws.data_dir(), cfg.train.threads);
  const auto [train, test] = split(all, cfg.train_fraction, cfg.split_seed);
  write_manifest(ws.manifest_file(), merge_split(train, test));
  write_text(ws.config_file(), serialize_run_config(cfg));
  out << "synth: " << all.entries.size() / 2 << " clips x {HIGH, LOW}, " << train.entries.size() / 2 << " train / "
      << test.entries.size() / 2 << " test, manifest " << ws.manifest_file().string() << "\n";
  return 0;
}

int cmd_preprocess(const RunConfig& cfg, const Workspace& ws, bool force, std::ostream& out) {
  const DatasetManifest m = require_split_manifest(ws);
  std::map<std::string, const ManifestEntry*> lows;
  for (const auto& e : m.entries) {
    if (e.resolution == Resolution::Low) lows[clip_stem(e.clip_id)] = &e;
  }
  std::size_t written = 0, current = 0;
  for (const auto& e : m.entries) {
    if (e.resolution != Resolution::High) continue;
    auto it = lows.find(clip_stem(e.clip_id));
    if (it == lows.end()) throw std::invalid_argument("manifest lacks a LOW entry for " + e.clip_id);
    const fs::path dir = ws.clip_dir(*it->second);
    if (!force && clip_complete(dir, cfg.data.frames_per_clip)) {
      ++current;
      continue;
    }
    save_clip(dir, make_lr_clip(load_clip(ws.clip_dir(e), e.label, Resolution::High, e.clip_id)));
    ++written;
  }
  out << "preprocess: " << written << " LOW clips written, " << current << " up to date\n";
  return 0;
}

int cmd_flow(const RunConfig& cfg, const Workspace& ws, bool force, std::ostream& out) {
  const DatasetManifest m = require_split_manifest(ws);
  const auto entries = working_entries(m, true, true, true);
  std::vector<const ManifestEntry*> todo;
  for (const auto& e : entries) {
    if (force || !clip_complete(ws.flow_dir(e.clip_id), cfg.data.frames_per_clip)) todo.push_back(&e);
  }
  parallel_for(todo.size(), cfg.train.threads, [&](std::size_t i) {
    const ManifestEntry& e = *todo[i];
    VideoClip clip = load_clip(ws.clip_dir(e), e.label, e.resolution, e.clip_id);
    if (e.resolution == Resolution::High) clip = resize_clip_to_network(clip);
    save_clip(ws.flow_dir(e.clip_id), flow_clip(clip, cfg.flow));
  });
  out << "flow: " << todo.size() << " clips computed, " << entries.size() - todo.size() << " up to date\n";
  return 0;
}

int cmd_train_c3d(const RunConfig& cfg, const Workspace& ws, Stream stream, std::ostream& out) {
  const DatasetManifest m = require_split_manifest(ws);
  std::map<std::string, std::vector<Tensor<float>>> low, high;
  std::map<std::string, int> labels;
  for (const auto& e : working_entries(m, cfg.train.coupled, true, false)) {
    const std::string stem = clip_stem(e.clip_id);
    labels[stem] = e.label;
    (e.resolution == Resolution::High ? high : low)[stem] = load_clip_units(ws, e, stream, cfg.data.unit_length);
  }
  UnitDataset data;
  data.num_classes = m.class_names.size();
  for (const auto& [stem, units] : low) {
    ClipUnits c;
    c.clip_id = stem;
    c.label = labels.at(stem);
    c.low = units;
    if (cfg.train.coupled) {
      auto it = high.find(stem);
      if (it == high.end()) throw std::invalid_argument("coupled training: no HIGH clip for " + stem);
      c.high = it->second;
    }
    data.clips.push_back(c);
  }
  StageOneHooks hooks;
  hooks.on_epoch = [&](const EpochStats& s) {
    char line[128];
    std::snprintf(line, sizeof line, "train-c3d %s epoch %3d  loss %.5f  acc %.4f\n", stream_name(stream), s.epoch,
                  s.loss, s.accuracy);
    out << line << std::flush;
    return true;
  };
  const StageOneResult r = train_c3d_stage(data, stream, cfg.train, hooks);
  save_bundle(ws.c3d_checkpoint(stream), c3d_to_bundle(r.params));
  write_text(ws.c3d_log(stream), epoch_log_csv(r.log));
  out << "train-c3d: " << r.steps << " steps";
  if (cfg.train.coupled) out << ", coupling verified at " << r.coupling_checks << " steps";
  out << ", saved " << ws.c3d_checkpoint(stream).string() << "\n";
  return 0;
}

struct StreamFeatures {
  std::map<std::string, FeatureSeq<float>> features;
  std::size_t feature_dim = 0;
};

StreamFeatures stream_features(const RunConfig& cfg, const Workspace& ws, const std::vector<ManifestEntry>& entries,
                               Stream stream, std::ostream& out) {
  const fs::path ckpt = ws.c3d_checkpoint(stream);
  if (!fs::exists(ckpt)) {
    throw std::invalid_argument("no " + std::string(stream_name(stream)) + " extractor at " + ckpt.string() +
                                "; run `lowres train-c3d --stream " + stream_name(stream) + "`");
  }
  const C3dParams<float> params = c3d_from_bundle(load_bundle(ckpt));
  FeatureCache cache(ws.feature_root(stream));
  std::map<std::string, const ManifestEntry*> by_id;
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    by_id[e.clip_id] = &e;
    ids.push_back(e.clip_id);
  }
  StreamFeatures sf;
  sf.feature_dim = params.spec.feature_dim();
  sf.features = extract_features(
      ids, [&](const std::string& id) { return load_clip_units(ws, *by_id.at(id), stream, cfg.data.unit_length); },
      params, &cache, cfg.train.threads);
  out << "features " << stream_name(stream) << ": " << ids.size() << " clips, " << cache.hits() << " cached, "
      << cache.misses() << " computed\n";
  return sf;
}

std::vector<FeatureKey> keys_of(const std::vector<ManifestEntry>& entries) {
  std::vector<FeatureKey> keys;
  for (const auto& e : entries) keys.push_back({e.clip_id, clip_stem(e.clip_id), e.label, e.resolution});
  return keys;
}

struct LoadedFeatures {
  FeatureSet set;
  std::size_t feature_dim = 0;
};

LoadedFeatures load_features(const RunConfig& cfg, const Workspace& ws, const std::vector<ManifestEntry>& entries,
                             StreamSet streams, std::ostream& out) {
  std::optional<StreamFeatures> s, t;
  if (needs(streams, Stream::Spatial)) s = stream_features(cfg, ws, entries, Stream::Spatial, out);
  if (needs(streams, Stream::Temporal)) t = stream_features(cfg, ws, entries, Stream::Temporal, out);
  if (s && t && s->feature_dim != t->feature_dim) {
    throw std::invalid_argument("spatial and temporal extractors have different feature widths");
  }
  LoadedFeatures lf;
  lf.feature_dim = s ? s->feature_dim : t->feature_dim;
  lf.set = build_feature_set(keys_of(entries), s ? &s->features : nullptr, t ? &t->features : nullptr, streams);
  return lf;
}

int cmd_extract(const RunConfig& cfg, const Workspace& ws, std::ostream& out) {
  const DatasetManifest m = require_split_manifest(ws);
  const auto entries = working_entries(m, cfg.train.coupled, true, true);
  for (Stream s : {Stream::Spatial, Stream::Temporal}) {
    if (needs(cfg.train.streams, s)) stream_features(cfg, ws, entries, s, out);
  }
  return 0;
}

int cmd_train_fusion(const RunConfig& cfg, const Workspace& ws, std::ostream& out) {
  const DatasetManifest m = require_split_manifest(ws);
  const auto entries = working_entries(m, cfg.train.coupled, true, false);
  const LoadedFeatures lf = load_features(cfg, ws, entries, cfg.train.streams, out);
  StageTwoHooks hooks;
  hooks.on_epoch = [&](const EpochStats& s) {
    char line[128];
    std::snprintf(line, sizeof line, "train-fusion epoch %3d  loss %.5f  acc %.4f\n", s.epoch, s.loss, s.accuracy);
    out << line << std::flush;
    return true;
  };
  const StageTwoResult r = train_twostream_stage(lf.set, cfg.train, lf.feature_dim, m.class_names, nullptr, hooks);
  save_bundle(ws.model_checkpoint(), twostream_to_bundle(r.params));
  write_text(ws.reports_dir() / "train_report.json", report_to_json(r.report));
  write_text(ws.reports_dir() / "train_log.csv", epoch_log_csv(r.report.epochs));
  out << "train-fusion: saved " << ws.model_checkpoint().string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const Workspace& ws, const std::string& checkpoint, std::ostream& out) {
  const fs::path ckpt = checkpoint.empty() ? ws.model_checkpoint() : fs::path(checkpoint);
  if (!fs::exists(ckpt)) {
    throw std::invalid_argument("--checkpoint: no model checkpoint at " + ckpt.string() +
                                (checkpoint.empty() ? " (run `lowres train-fusion` or pass --checkpoint)" : ""));
  }
  const TwoStreamParams<float> model = twostream_from_bundle(load_bundle(ckpt));
  const DatasetManifest m = require_split_manifest(ws);
  if (model.config.num_classes != m.class_names.size()) {
    throw std::invalid_argument("--checkpoint: model has " + std::to_string(model.config.num_classes) +
                                " classes, dataset has " + std::to_string(m.class_names.size()));
  }
  const auto entries = working_entries(m, false, false, true);
  const LoadedFeatures lf = load_features(cfg, ws, entries, model.config.streams, out);
  instrumentation::reset_high_resolution_reads();
  RunReport report = evaluate(model, lf.set, m.class_names);
  const std::size_t high_reads = instrumentation::high_resolution_reads();
  const fs::path train_report = ws.reports_dir() / "train_report.json";
  if (fs::exists(train_report)) report.epochs = report_from_json(read_text(train_report)).epochs;

  write_text(ws.reports_dir() / "report.json", report_to_json(report));
  write_text(ws.reports_dir() / "confusion.csv", confusion_csv(report));
  const std::string text = render_report_text(report);
  write_text(ws.reports_dir() / "eval.txt", text);
  char line[128];
  std::snprintf(line, sizeof line, "accuracy: %.4f (%zu/%zu)\n", report.test_accuracy, report.confusion.trace(),
                report.confusion.total());
  out << line << "high-resolution reads during evaluation: " << high_reads << "\n" << text;
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  const auto checks = run_gradcheck(opt);
  out << render_gradcheck(checks);
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.worst_rel_err);
  char line[96];
  std::snprintf(line, sizeof line, "worst relative error %.3e (tolerance %.0e)\n", worst, kGradcheckTolerance);
  out << line;
  return worst < kGradcheckTolerance ? 0 : 2;
}

struct Grid {
  std::vector<AblationCell> cells;
  std::vector<std::uint64_t> seeds;
};

Grid parse_grid(const std::string& text) {
  Grid g;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto where = "--grid line " + std::to_string(n) + ": ";
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      std::string key = line.substr(0, eq);
      key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
      if (key != "seeds") throw std::invalid_argument(where + "unknown setting '" + key + "'");
      std::string list = line.substr(eq + 1);
      std::replace(list.begin(), list.end(), ',', ' ');
      std::istringstream ls(list);
      std::string tok;
      while (ls >> tok) {
        try {
          std::size_t used = 0;
          g.seeds.push_back(std::stoull(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw std::invalid_argument(where + "bad seed '" + tok + "'");
        }
      }
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 3) throw std::invalid_argument(where + "expected `<streams> <gru> <fusion>`");
    try {
      g.cells.push_back({parse_streams(tok[0]), parse_gru_mode(tok[1]), parse_fusion(tok[2])});
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  if (g.cells.empty()) throw std::invalid_argument("--grid: no cells");
  return g;
}

int cmd_ablate(const RunConfig& cfg, const Workspace& ws, const std::string& grid_path, std::ostream& out) {
  if (!fs::exists(grid_path)) throw std::invalid_argument("--grid: file not found: " + grid_path);
  Grid grid = parse_grid(read_text(grid_path));
  if (grid.seeds.empty()) grid.seeds.push_back(cfg.train.seed);
  require_split_manifest(ws);
  const PreparedDataset data = load_prepared_dataset(ws, cfg.data.unit_length, cfg.train.threads);
  const auto rows = ablation_run(grid.cells, data, cfg.train, grid.seeds,
                                 [&](const std::string& msg) { out << "ablate: " << msg << "\n" << std::flush; });
  const std::string csv = ablation_csv(rows);
  write_text(ws.reports_dir() / "ablation.csv", csv);
  out << csv;
  return 0;
}

int cmd_report(const Workspace& ws, const std::string& input, std::ostream& out) {
  const fs::path path = input.empty() ? ws.reports_dir() / "report.json" : fs::path(input);
  if (!fs::exists(path)) {
    throw std::invalid_argument("--input: no report at " + path.string() + " (run `lowres eval` first)");
  }
  const RunReport report = report_from_json(read_text(path));
  const std::string text = render_report_text(report);
  write_text(ws.reports_dir() / "report.txt", text);
  write_text(ws.reports_dir() / "confusion.csv", confusion_csv(report));
  out << text;
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-resolution action recognition pipeline", "lowres"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "Run configuration file (default: <workdir>/config.ini if present)");
  app.add_option("--workdir", g.workdir, "Artifact root")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for data, split and training");
  auto* threads_opt = app.add_option("--threads", g.threads, "Worker threads (1 = deterministic reference)")
                          ->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "Override a config value: section.key=value (repeatable)");

  bool force = false;
  std::string stream_arg, checkpoint, grid_path, report_input, preset_arg = "tiny";
  GradcheckOptions gopt;

  auto* synth = app.add_subcommand("synth", "Render the synthetic dataset and split it");
  auto* preprocess = app.add_subcommand("preprocess", "Write LOW clips (12x16 -> 112x112) for every HIGH clip");
  preprocess->add_flag("--force", force, "Recompute existing clips");
  auto* flow = app.add_subcommand("flow", "Compute HSL optical-flow clips");
  flow->add_flag("--force", force, "Recompute existing clips");
  auto* train_c3d = app.add_subcommand("train-c3d", "Stage 1: train one stream's C3D extractor");
  train_c3d->add_option("--stream", stream_arg, "spatial or temporal")
      ->required()
      ->check(CLI::IsMember({"spatial", "temporal"}));
  auto* extract = app.add_subcommand("extract", "Cache per-unit C3D features");
  auto* train_fusion = app.add_subcommand("train-fusion", "Stage 2: train GRU, fusion and head on cached features");
  auto* eval = app.add_subcommand("eval", "Evaluate on LOW-resolution test clips");
  eval->add_option("--checkpoint", checkpoint, "Stage-2 checkpoint (default: <workdir>/models/twostream.ckpt)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gradcheck->add_option("--preset", preset_arg, "C3D preset for the network check")
      ->check(CLI::IsMember({"tiny", "full"}))
      ->capture_default_str();
  gradcheck->add_option("--draws", gopt.seeds, "Random draws per op")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--fraction", gopt.network_fraction, "Share of C3D parameters probed per draw")
      ->capture_default_str();
  auto* ablate = app.add_subcommand("ablate", "Stream / GRU / fusion ablation grid");
  ablate->add_option("--grid", grid_path, "Grid file: `<streams> <gru> <fusion>` per line, optional `seeds = ...`")
      ->required();
  auto* report = app.add_subcommand("report", "Render a saved report as text and CSV");
  report->add_option("--input", report_input, "Report JSON (default: <workdir>/reports/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  g.seed_given = seed_opt->count() > 0;
  g.threads_given = threads_opt->count() > 0;

  try {
    const Workspace ws(g.workdir);
    if (gradcheck->parsed()) {
      gopt.preset = parse_preset(preset_arg);
      if (g.seed_given) gopt.seed = g.seed;
      return cmd_gradcheck(gopt, out);
    }
    if (report->parsed()) return cmd_report(ws, report_input, out);
    const RunConfig cfg = resolve_config(g, ws);
    if (synth->parsed()) return cmd_synth(cfg, ws, out);
    if (preprocess->parsed()) return cmd_preprocess(cfg, ws, force, out);
    if (flow->parsed()) return cmd_flow(cfg, ws, force, out);
    if (train_c3d->parsed()) return cmd_train_c3d(cfg, ws, parse_stream(stream_arg), out);
    if (extract->parsed()) return cmd_extract(cfg, ws, out);
    if (train_fusion->parsed()) return cmd_train_fusion(cfg, ws, out);
    if (eval->parsed()) return cmd_eval(cfg, ws, checkpoint, out);
    if (ablate->parsed()) return cmd_ablate(cfg, ws, grid_path, out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lowres::cli

#ifndef SMATTACK_CLI_HPP
#define SMATTACK_CLI_HPP

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smattack/attack.hpp"
#include "smattack/def_io.hpp"
#include "smattack/feature_cache.hpp"
#include "smattack/native_io.hpp"
#include "smattack/synth.hpp"

namespace smattack::cli {

// Exit codes: 0 success, 2 input error, 3 internal invariant violation.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

namespace cli_detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

inline CellLibrary load_library(const std::string& path) {
  if (path.empty()) throw InputError("--lib is required for this input");
  return library_from_json(parse_json_file(path));
}

struct SplitInput {
  SplitLayout layout;
  FragmentSet fragments;
  std::optional<GroundTruth> truth;
};

/// Accepts a split-layout JSON, a full-layout JSON, or a DEF file. Full
/// layouts (and DEF) are split at --layer and yield ground truth; bare
/// split JSON needs --truth for labeled work.
inline SplitInput load_split_input(const std::string& layout_path,
                                   const std::string& lib_path, int layer,
                                   const std::string& truth_path) {
  SplitInput in;
  if (ends_with(layout_path, ".def")) {
    const CellLibrary lib = load_library(lib_path);
    SplitResult r = split_layout(parse_def_subset(read_file(layout_path), lib), layer);
    in.layout = std::move(r.layout);
    in.fragments = std::move(r.fragments);
    in.truth = std::move(r.truth);
  } else {
    json j = parse_json_file(layout_path);
    if (json_is_split_layout(j)) {
      in.layout = split_layout_from_json(j);
      in.fragments = build_fragments(in.layout);
      for (const Fragment& f : in.fragments.fragments)
        for (int q : f.vpins) in.layout.virtual_pins[q].owning_fragment = f.id;
    } else {
      SplitResult r = split_layout(full_layout_from_json(j), layer);
      in.layout = std::move(r.layout);
      in.fragments = std::move(r.fragments);
      in.truth = std::move(r.truth);
    }
  }
  if (!truth_path.empty()) in.truth = truth_from_json(parse_json_file(truth_path));
  return in;
}

inline NetworkConfig preset_config(const std::string& name) {
  if (name == "full") return NetworkConfig::full();
  if (name == "small") return NetworkConfig::small_preset();
  if (name == "reduced") return NetworkConfig::reduced();
  throw InputError("unknown preset " + name + " (full|small|reduced)");
}

inline json predictions_json(const AttackReport& rep) {
  json preds = json::array();
  for (const auto& [sink, src] : rep.selected)
    preds.push_back(
        json{{"sink", sink}, {"source", src}, {"score", rep.scores.at(sink)}});
  return preds;
}

inline double percent(double frac) { return 100.0 * frac; }

inline std::string history_csv(const std::vector<EpochStats>& history) {
  std::string csv = "epoch,loss,val_ccr,lr\n";
  char line[128];
  for (const EpochStats& e : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.mean_loss,
                  e.val_ccr, e.lr);
    csv += line;
  }
  return csv;
}

struct TrainArtifacts {
  double val_ccr = -1.0;
  std::vector<EpochStats> history;
};

/// Shared by `train` and `ablate`: fits normalization on the training cache,
/// trains one model, optionally evaluates/keeps-best on the validation cache.
inline TrainArtifacts train_from_caches(Network<float>& net, FeatureCache& train_cache,
                                        FeatureCache* val_cache,
                                        const GroundTruth* val_truth,
                                        const TrainConfig& tcfg, ModelBundle& bundle) {
  bundle.stats = fit_normalization(train_cache.groups);
  for (GroupFeatures& g : train_cache.groups) apply_normalization(g, bundle.stats);
  std::vector<GroupFeatures> val;
  if (val_cache) {
    for (GroupFeatures& g : val_cache->groups) apply_normalization(g, bundle.stats);
    val = val_cache->groups;
  }
  net.init_params(tcfg.seed);
  TrainResult<float> res =
      train_network(net, train_cache.groups, val, val_truth, tcfg);
  TrainArtifacts art;
  art.history = std::move(res.history);
  art.val_ccr = res.best_val_ccr;
  return art;
}

}  // namespace cli_detail

inline int run(std::vector<std::string> args) {
  CLI::App app{"deep-learning proximity attack on split-manufactured layouts"};
  app.require_subcommand(1);

  // shared option storage
  std::string layout_path, lib_path, truth_path, out_path, model_path;
  int layer = 3, candidates = 31, threads = 1;
  std::uint64_t seed = 1;
  std::vector<double> scales = {0.05, 0.1, 0.2};
  int image_px = 99;

  auto add_common = [&](CLI::App* sub, bool with_layout) {
    if (with_layout) {
      sub->add_option("--layout", layout_path, "layout file (.json or .def)")->required();
      sub->add_option("--lib", lib_path, "cell library JSON");
      sub->add_option("--layer", layer, "split layer m");
      sub->add_option("--truth", truth_path, "ground-truth JSON (for split JSON inputs)");
    }
    sub->add_option("--threads", threads, "worker threads (1 = bit-reproducible)");
  };

  // gen
  SynthSpec spec;
  auto* gen = app.add_subcommand("gen", "generate a synthetic full layout");
  gen->add_option("--nets", spec.num_nets, "net count");
  gen->add_option("--fanout-min", spec.fanout_min);
  gen->add_option("--fanout-max", spec.fanout_max);
  gen->add_option("--grid", spec.grid_um, "driver grid pitch, um");
  gen->add_option("--bias", spec.bias, "proximity bias in [0,1]; 1 = nearest wins");
  gen->add_option("--cap-signal", spec.cap_signal, "load-class consistency fraction");
  gen->add_option("--noise", spec.noise, "fraction of row-misaligned sinks");
  gen->add_option("--seed", seed);
  bool emit_def_too = false;
  gen->add_flag("--emit-def", emit_def_too, "also write a DEF view");
  gen->add_option("--out", out_path, "output prefix")->required();

  // split
  auto* split = app.add_subcommand("split", "strip BEOL and emit split layout + truth");
  split->add_option("--layout", layout_path, "full layout (.json or .def)")->required();
  split->add_option("--lib", lib_path, "cell library JSON (needed for DEF)");
  split->add_option("--layer", layer, "split layer m");
  split->add_option("--out", out_path, "output prefix")->required();

  // extract
  auto* extract = app.add_subcommand("extract", "candidate selection + feature cache");
  add_common(extract, true);
  extract->add_option("--candidates", candidates, "candidates per sink (n)");
  extract->add_option("--scales", scales, "raster scales, um/pixel")->delimiter(',');
  extract->add_option("--image-px", image_px, "raster size in pixels");
  extract->add_option("--out", out_path, "feature cache file")->required();

  // train
  std::string features_path, val_features_path, val_truth_path, history_path;
  std::string preset = "small", optimizer = "adam", loss = "softmax";
  TrainConfig tcfg;
  auto* train = app.add_subcommand("train", "train a model from feature caches");
  train->add_option("--features", features_path, "training feature cache")->required();
  train->add_option("--val-features", val_features_path, "validation feature cache");
  train->add_option("--val-truth", val_truth_path, "validation ground-truth JSON");
  train->add_option("--model", model_path, "output model file")->required();
  train->add_option("--history", history_path, "training history CSV");
  train->add_option("--preset", preset, "network size: full|small|reduced");
  train->add_option("--optimizer", optimizer, "adam|sgd");
  train->add_option("--loss", loss, "softmax|two-class");
  train->add_option("--epochs", tcfg.epochs);
  train->add_option("--lr", tcfg.learning_rate);
  train->add_option("--seed", seed);
  train->add_option("--threads", threads);

  // attack
  auto* attack = app.add_subcommand("attack", "run a trained model on a split layout");
  add_common(attack, true);
  attack->add_option("--model", model_path, "model file")->required();
  attack->add_option("--out", out_path, "report prefix")->required();

  // eval
  std::string pred_path;
  auto* eval = app.add_subcommand("eval", "CCR of stored predictions against truth");
  eval->add_option("--pred", pred_path, "attack report JSON")->required();
  eval->add_option("--truth", truth_path, "ground-truth JSON")->required();

  // baseline
  auto* baseline = app.add_subcommand("baseline", "nearest-vpin proximity attack");
  add_common(baseline, true);
  baseline->add_option("--candidates", candidates, "candidates per sink (n)");
  baseline->add_option("--out", out_path, "report JSON (optional)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train both losses, compare CCR");
  ablate->add_option("--features", features_path, "training feature cache")->required();
  ablate->add_option("--val-features", val_features_path, "validation feature cache")
      ->required();
  ablate->add_option("--val-truth", val_truth_path, "validation ground-truth JSON")
      ->required();
  ablate->add_option("--preset", preset, "network size: full|small|reduced");
  ablate->add_option("--epochs", tcfg.epochs);
  ablate->add_option("--seed", seed);
  ablate->add_option("--out", out_path, "comparison JSON (optional)");

  args.insert(args.begin(), "smattack");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*gen) {
      spec.seed = seed;
      SynthResult r = generate_layout(spec);
      write_text_file(out_path + ".layout.json", serialize(full_layout_to_json(r.layout)));
      write_text_file(out_path + ".lib.json", serialize(library_to_json(r.lib)));
      if (emit_def_too)
        write_text_file(out_path + ".layout.def",
                        emit_def(r.layout, cli_detail::file_stem(out_path)));
      std::cout << "generated " << r.layout.nets.size() << " nets, "
                << r.layout.cells.size() << " cells -> " << out_path << ".layout.json\n";
    } else if (*split) {
      FullLayout full;
      if (cli_detail::ends_with(layout_path, ".def"))
        full = parse_def_subset(cli_detail::read_file(layout_path),
                                cli_detail::load_library(lib_path));
      else
        full = full_layout_from_json(parse_json_file(layout_path));
      SplitResult r = split_layout(full, layer);
      write_text_file(out_path + ".split.json", serialize(split_layout_to_json(r.layout)));
      write_text_file(out_path + ".truth.json", serialize(truth_to_json(r.truth)));
      std::cout << "split at M" << layer << ": " << r.layout.virtual_pins.size()
                << " virtual pins, " << r.truth.pairs.size() << " truth pairs -> "
                << out_path << ".split.json\n";
    } else if (*extract) {
      cli_detail::SplitInput in =
          cli_detail::load_split_input(layout_path, lib_path, layer, truth_path);
      const CellLibrary lib = cli_detail::load_library(lib_path);
      RasterConfig raster{image_px, scales};
      std::vector<CandidateGroup> groups = select_all_candidates(
          in.fragments, in.layout, candidates, in.truth ? &*in.truth : nullptr);
      FeatureCache cache;
      cache.feature_len = feature_count(in.layout.split_layer);
      cache.m = in.layout.split_layer;
      cache.image_px = image_px;
      cache.scales_um = scales;
      cache.candidates_n = candidates;
      cache.groups =
          extract_all_features(groups, in.fragments, in.layout, lib, raster, threads);
      save_cache(out_path, cache);
      std::cout << "extracted " << cache.groups.size() << " sink groups -> " << out_path
                << "\n";
    } else if (*train) {
      FeatureCache train_cache = load_cache(features_path);
      std::optional<FeatureCache> val_cache;
      std::optional<GroundTruth> val_truth;
      if (!val_features_path.empty()) val_cache = load_cache(val_features_path);
      if (!val_truth_path.empty())
        val_truth = truth_from_json(parse_json_file(val_truth_path));
      if (val_cache.has_value() != val_truth.has_value())
        throw InputError("--val-features and --val-truth must be given together");

      NetworkConfig ncfg = cli_detail::preset_config(preset);
      ncfg.m = train_cache.m;
      ncfg.feature_len = train_cache.feature_len;
      ncfg.num_scales = static_cast<int>(train_cache.scales_um.size());
      ncfg.image_px = train_cache.image_px;
      if (loss == "two-class") ncfg.two_class = true;
      else if (loss != "softmax") throw InputError("--loss must be softmax|two-class");
      if (optimizer == "sgd") tcfg.optimizer = TrainConfig::Optimizer::sgd;
      else if (optimizer != "adam") throw InputError("--optimizer must be adam|sgd");
      tcfg.seed = seed;

      Network<float> net(ncfg);
      ModelBundle bundle;
      bundle.config = ncfg;
      bundle.scales_um = train_cache.scales_um;
      bundle.candidates_n = train_cache.candidates_n;
      bundle.ledger = feature_ledger(train_cache.m);
      cli_detail::TrainArtifacts art = cli_detail::train_from_caches(
          net, train_cache, val_cache ? &*val_cache : nullptr,
          val_truth ? &*val_truth : nullptr, tcfg, bundle);
      save_model(model_path, net, bundle);
      if (!history_path.empty())
        write_text_file(history_path, cli_detail::history_csv(art.history));
      std::cout << "trained " << tcfg.epochs << " epochs";
      if (art.val_ccr >= 0)
        std::cout << ", best val CCR " << cli_detail::percent(art.val_ccr) << "%";
      std::cout << " -> " << model_path << "\n";
    } else if (*attack) {
      cli_detail::SplitInput in =
          cli_detail::load_split_input(layout_path, lib_path, layer, truth_path);
      const CellLibrary lib = cli_detail::load_library(lib_path);
      LoadedModel model = load_model(model_path);
      AttackReport rep = run_attack(model, in.layout, in.fragments, lib,
                                    in.truth ? &*in.truth : nullptr, threads);
      json report{{"design", cli_detail::file_stem(layout_path)},
                  {"num_sinks", rep.num_sinks},
                  {"num_sources", rep.num_sources},
                  {"unpredictable_sinks", rep.unpredictable_sinks},
                  {"predictions", cli_detail::predictions_json(rep)}};
      if (rep.ccr >= 0) {
        report["ccr_percent"] = cli_detail::percent(rep.ccr);
        report["baseline_ccr_percent"] = cli_detail::percent(rep.baseline_ccr);
      }
      write_text_file(out_path + ".report.json", serialize(report));
      char csv[256];
      std::snprintf(csv, sizeof csv, "design,num_sinks,num_sources,ccr_percent,runtime_s\n%s,%d,%d,%.2f,%.3f\n",
                    cli_detail::file_stem(layout_path).c_str(), rep.num_sinks,
                    rep.num_sources, rep.ccr >= 0 ? cli_detail::percent(rep.ccr) : -1.0,
                    rep.extraction_s + rep.inference_s);
      write_text_file(out_path + ".summary.csv", csv);
      std::cout << "attack: " << rep.selected.size() << "/" << rep.num_sinks
                << " sinks predicted";
      if (rep.ccr >= 0) std::cout << ", CCR " << cli_detail::percent(rep.ccr) << "%";
      std::cout << " (extraction " << rep.extraction_s << "s, inference "
                << rep.inference_s << "s)\n";
    } else if (*eval) {
      const json report = parse_json_file(pred_path);
      const GroundTruth truth = truth_from_json(parse_json_file(truth_path));
      std::map<int, int> selected;
      for (const json& p : detail::field(report, "predictions", ""))
        selected[detail::field(p, "sink", "predictions").get<int>()] =
            detail::field(p, "source", "predictions").get<int>();
      char line[64];
      std::snprintf(line, sizeof line, "CCR %.2f%%\n",
                    cli_detail::percent(compute_ccr(selected, truth)));
      std::cout << line;
    } else if (*baseline) {
      cli_detail::SplitInput in =
          cli_detail::load_split_input(layout_path, lib_path, layer, truth_path);
      std::vector<CandidateGroup> groups =
          select_all_candidates(in.fragments, in.layout, candidates);
      std::map<int, int> selected = baseline_proximity(groups);
      json preds = json::array();
      for (const auto& [sink, src] : selected)
        preds.push_back(json{{"sink", sink}, {"source", src}});
      json report{{"design", cli_detail::file_stem(layout_path)},
                  {"predictions", preds}};
      if (in.truth) {
        const double ccr = compute_ccr(selected, *in.truth);
        report["ccr_percent"] = cli_detail::percent(ccr);
        char line[64];
        std::snprintf(line, sizeof line, "baseline CCR %.2f%%\n",
                      cli_detail::percent(ccr));
        std::cout << line;
      } else {
        std::cout << "baseline: " << selected.size() << " sinks predicted\n";
      }
      if (!out_path.empty()) write_text_file(out_path, serialize(report));
    } else if (*ablate) {
      FeatureCache base_train = load_cache(features_path);
      FeatureCache base_val = load_cache(val_features_path);
      const GroundTruth val_truth = truth_from_json(parse_json_file(val_truth_path));
      tcfg.seed = seed;

      double ccr_of[2];  // [0] softmax, [1] two-class
      for (int mode = 0; mode < 2; ++mode) {
        NetworkConfig ncfg = cli_detail::preset_config(preset);
        ncfg.m = base_train.m;
        ncfg.feature_len = base_train.feature_len;
        ncfg.num_scales = static_cast<int>(base_train.scales_um.size());
        ncfg.image_px = base_train.image_px;
        ncfg.two_class = mode == 1;
        Network<float> net(ncfg);
        ModelBundle bundle;
        bundle.config = ncfg;
        FeatureCache train_cache = base_train;  // normalization mutates
        FeatureCache val_cache = base_val;
        cli_detail::TrainArtifacts art = cli_detail::train_from_caches(
            net, train_cache, &val_cache, &val_truth, tcfg, bundle);
        ccr_of[mode] = art.val_ccr;
      }
      const double ratio = ccr_of[1] > 0 ? ccr_of[0] / ccr_of[1] : -1.0;
      json report{{"softmax_ccr_percent", cli_detail::percent(ccr_of[0])},
                  {"two_class_ccr_percent", cli_detail::percent(ccr_of[1])},
                  {"ratio", ratio}};
      if (!out_path.empty()) write_text_file(out_path, serialize(report));
      char line[160];
      std::snprintf(line, sizeof line,
                    "softmax CCR %.2f%%, two-class CCR %.2f%%, ratio %.3f\n",
                    cli_detail::percent(ccr_of[0]), cli_detail::percent(ccr_of[1]), ratio);
      std::cout << line;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace smattack::cli

#endif

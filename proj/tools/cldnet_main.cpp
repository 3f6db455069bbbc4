// Command-line front end: dataset synthesis, band statistics, training,
// prediction, evaluation, cross-resolution comparison, and quick-look
// rendering.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "cldnet/checkpoint.hpp"
#include "cldnet/evaluation.hpp"
#include "cldnet/inference.hpp"
#include "cldnet/render.hpp"
#include "cldnet/stats.hpp"
#include "cldnet/synth.hpp"
#include "cldnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cldnet;

namespace {

struct LoadedDataset {
  std::vector<SceneGrid> scenes;
  std::vector<CloudLabelGrid> labels;
  std::vector<std::string> splits;
};

LoadedDataset load_dataset(const fs::path& manifest_path) {
  const fs::path dir = manifest_path.parent_path();
  auto manifest = load_manifest(manifest_path);
  LoadedDataset ds;
  for (const auto& e : manifest.entries) {
    ds.scenes.push_back(load_scene(dir / e.scene_path));
    ds.labels.push_back(load_labels(dir / e.label_path));
    ds.splits.push_back(e.split);
  }
  return ds;
}

std::vector<TrainSample> make_samples(const LoadedDataset& ds,
                                      const std::vector<std::size_t>& idx,
                                      InputMode mode, double mask_ratio) {
  std::vector<TrainSample> out;
  for (auto i : idx)
    out.push_back({build_model_input(ds.scenes[i], mode, mask_ratio),
                   ds.labels[i].labels});
  return out;
}

void print_metrics(const MetricsReport& r) {
  std::printf("accuracy      %.6f\n", r.accuracy);
  std::printf("f1_macro      %.6f\n", r.f1_macro);
  std::printf("f1_weighted   %.6f\n", r.f1_weighted);
  std::printf("binary (Cl)   %.6f\n", r.binary_accuracy);
  std::printf("%-6s %10s %10s %10s %12s\n", "class", "precision", "recall",
              "f1", "support");
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    std::printf("%-6s %10.6f %10.6f %10.6f %12llu\n", class_name(c),
                m.precision, m.recall, m.f1,
                static_cast<unsigned long long>(m.support));
  }
}

CloudLabelGrid prediction_grid(const ScenePrediction& pred,
                               const GridGeometry& geometry) {
  return CloudLabelGrid{geometry, pred.labels};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CldNet cloud-type segmentation toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  fs::path synth_out;
  SynthConfig scfg;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--rows", scfg.rows, "scene rows");
  synth->add_option("--cols", scfg.cols, "scene columns");
  synth->add_option("--train-scenes", scfg.train_scenes, "training scenes");
  synth->add_option("--test-scenes", scfg.test_scenes, "held-out scenes");
  synth->add_option("--night-fraction", scfg.night_fraction,
                    "fraction of columns left unlabeled");

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "derive per-band value ranges");
  fs::path stats_manifest;
  int stats_bins = 512;
  fs::path stats_json;
  stats->add_option("--data", stats_manifest, "manifest.csv path")->required();
  stats->add_option("--bins", stats_bins, "histogram bins");
  stats->add_option("--json", stats_json, "write full histograms as JSON");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train a model");
  fs::path train_manifest, train_ckpt;
  std::string train_mode = "base", arch = "cldnet";
  std::uint64_t train_seed = 0;
  int epochs = 40, patience = 10, tile = 96, workers = 1;
  int folds = 0, val_fold = 0;
  double mask_ratio = 1.0;
  bool small = false, resume = false;
  std::vector<double> lr_rates;
  std::vector<int> lr_breaks;
  train->add_option("--data", train_manifest, "manifest.csv path")->required();
  train->add_option("--checkpoint", train_ckpt, "checkpoint path")->required();
  train->add_option("--mode", train_mode, "base|cldnet-w|cldnet-o");
  train->add_option("--arch", arch, "architecture name");
  train->add_option("--seed", train_seed, "init/shuffle seed");
  train->add_option("--epochs", epochs, "max epochs");
  train->add_option("--patience", patience, "early-stopping patience");
  train->add_option("--tile", tile, "training tile size");
  train->add_option("--workers", workers, "parallel tile workers");
  train->add_option("--folds", folds, "k-fold count (0 = use manifest splits)");
  train->add_option("--val-fold", val_fold, "fold held out for validation");
  train->add_option("--mask-ratio", mask_ratio, "cldnet-o attenuation ratio");
  train->add_flag("--small", small, "use the reduced desk-scale architecture");
  train->add_flag("--resume", resume, "resume from --checkpoint");
  train->add_option("--lr-rates", lr_rates, "override schedule rates");
  train->add_option("--lr-breakpoints", lr_breaks, "override schedule breakpoints");

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "predict one scene");
  fs::path pr_ckpt, pr_scene, pr_out, pr_conf;
  int pr_tile = 0, pr_halo = kExactHaloMargin;
  double pr_mask_ratio = 1.0;
  predict->add_option("--checkpoint", pr_ckpt, "checkpoint path")->required();
  predict->add_option("--scene", pr_scene, "scene grid path")->required();
  predict->add_option("--out", pr_out, "output label grid path")->required();
  predict->add_option("--tile", pr_tile, "tile size (0 = one pass)");
  predict->add_option("--halo", pr_halo, "context halo in pixels");
  predict->add_option("--mask-ratio", pr_mask_ratio, "cldnet-o attenuation ratio");
  predict->add_option("--confidence", pr_conf, "also write clear-sky confidence plane");

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a dataset");
  fs::path ev_ckpt, ev_manifest, ev_density;
  std::string ev_split = "test";
  int ev_tile = 0, ev_halo = kExactHaloMargin;
  double ev_mask_ratio = 1.0;
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  evaluate->add_option("--data", ev_manifest, "manifest.csv path")->required();
  evaluate->add_option("--split", ev_split, "manifest split to score");
  evaluate->add_option("--tile", ev_tile, "tile size (0 = one pass)");
  evaluate->add_option("--halo", ev_halo, "context halo in pixels");
  evaluate->add_option("--mask-ratio", ev_mask_ratio, "cldnet-o attenuation ratio");
  evaluate->add_option("--density-out", ev_density,
                       "write the error-density plane (requires one shared grid)");

  // ---- compare-resolution ----
  auto* cmp = app.add_subcommand(
      "compare-resolution", "score label grids living on different grids");
  fs::path cmp_truth, cmp_pred;
  cmp->add_option("--truth", cmp_truth, "truth label grid")->required();
  cmp->add_option("--pred", cmp_pred, "predicted label grid")->required();

  // ---- render ----
  auto* render = app.add_subcommand("render", "write a PPM quick-look");
  fs::path rd_labels, rd_plane, rd_out;
  float rd_lo = 0.0f, rd_hi = 1.0f;
  render->add_option("--labels", rd_labels, "label grid to render");
  render->add_option("--plane", rd_plane, "scalar plane to render");
  render->add_option("--out", rd_out, "output .ppm path")->required();
  render->add_option("--lo", rd_lo, "grayscale low endpoint");
  render->add_option("--hi", rd_hi, "grayscale high endpoint");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      auto manifest = generate_synthetic_dataset(scfg, synth_seed, synth_out);
      std::printf("wrote %zu scenes to %s\n", manifest.entries.size(),
                  synth_out.string().c_str());
      return 0;
    }

    if (*stats) {
      auto ds = load_dataset(stats_manifest);
      auto bs = compute_band_statistics(ds.scenes, stats_bins);
      std::printf("%-5s %12s %12s %12s\n", "band", "low", "high", "samples");
      for (const auto& h : bs.bands)
        std::printf("B%02d   %12.1f %12.1f %12zu\n", h.band, h.derived_low,
                    h.derived_high, h.sample_count);
      if (!stats_json.empty()) {
        json j = json::array();
        for (const auto& h : bs.bands)
          j.push_back({{"band", h.band},
                       {"derived_low", h.derived_low},
                       {"derived_high", h.derived_high},
                       {"raw_low", h.raw_low},
                       {"raw_high", h.raw_high},
                       {"sample_count", h.sample_count},
                       {"degenerate", h.degenerate},
                       {"bin_edges", h.bin_edges},
                       {"counts", h.counts},
                       {"cumulative_pct", h.cumulative_pct}});
        std::ofstream out(stats_json);
        out << j.dump(2) << "\n";
      }
      return 0;
    }

    if (*train) {
      const InputMode mode = parse_input_mode(train_mode);
      auto ds = load_dataset(train_manifest);
      std::vector<std::size_t> train_idx, val_idx;
      if (folds > 0) {
        auto assign = kfold_assignment(int(ds.scenes.size()), folds, train_seed);
        for (std::size_t i = 0; i < ds.scenes.size(); ++i)
          (assign[i] == val_fold ? val_idx : train_idx).push_back(i);
      } else {
        for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
          if (ds.splits[i] == "train") train_idx.push_back(i);
          else if (ds.splits[i] == "val" || ds.splits[i] == "test")
            val_idx.push_back(i);
        }
      }
      if (train_idx.empty() || val_idx.empty())
        throw std::runtime_error("need at least one training and one validation scene");
      auto train_set = make_samples(ds, train_idx, mode, mask_ratio);
      auto val_set = make_samples(ds, val_idx, mode, mask_ratio);

      TrainOptions opt;
      opt.tile = tile;
      opt.max_epochs = epochs;
      opt.patience = patience;
      opt.workers = workers;
      opt.seed = train_seed;
      opt.checkpoint_path = train_ckpt;
      opt.meta = {arch, std::string(input_mode_name(mode)), train_seed};
      opt.verbose = true;
      if (!lr_rates.empty()) {
        if (lr_rates.size() != lr_breaks.size() + 1)
          throw std::runtime_error("--lr-rates must have one more entry than --lr-breakpoints");
        opt.schedule = {lr_breaks, lr_rates};
      }

      TrainResult res;
      if (resume) {
        auto ck = load_checkpoint(train_ckpt);
        res = train_model(*ck.model, train_set, val_set, opt,
                          ck.optimizer ? &*ck.optimizer : nullptr,
                          ck.progress ? &*ck.progress : nullptr);
        save_checkpoint(train_ckpt, *ck.model, ck.meta);
      } else {
        nn::CldNetConfig mcfg = small ? nn::small_cldnet_config(0)
                                      : nn::CldNetConfig{};
        mcfg.in_channels = input_mode_channels(mode);
        auto model = nn::make_model<float>(arch, mcfg, train_seed);
        std::printf("parameters: %zu\n", model->parameter_count());
        res = train_model(*model, train_set, val_set, opt);
        save_checkpoint(train_ckpt, *model, opt.meta);
      }
      std::printf("best epoch %d, best val loss %.6f%s\n", res.best_epoch,
                  res.best_val_loss, res.early_stopped ? " (early stop)" : "");
      return 0;
    }

    if (*predict) {
      auto ck = load_checkpoint(pr_ckpt);
      ck.model->set_training(false);
      auto scene = load_scene(pr_scene);
      auto input = build_model_input(scene, parse_input_mode(ck.meta.mode),
                                     pr_mask_ratio);
      auto pred = predict_scene(*ck.model, input, {pr_tile, pr_halo});
      write_labels(prediction_grid(pred, scene.geometry), pr_out);
      if (!pr_conf.empty()) {
        PlaneGrid plane{scene.geometry, "clear_sky_confidence",
                        clear_sky_confidence(scene)};
        write_plane(plane, pr_conf);
      }
      std::printf("wrote %s\n", pr_out.string().c_str());
      return 0;
    }

    if (*evaluate) {
      auto ck = load_checkpoint(ev_ckpt);
      ck.model->set_training(false);
      const InputMode mode = parse_input_mode(ck.meta.mode);
      auto ds = load_dataset(ev_manifest);
      ConfusionMatrix cm;
      std::optional<ErrorDensity> density;
      std::size_t scored = 0;
      for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        if (ds.splits[i] != ev_split) continue;
        auto input = build_model_input(ds.scenes[i], mode, ev_mask_ratio);
        auto pred = predict_scene(*ck.model, input, {ev_tile, ev_halo});
        cm.accumulate(ds.labels[i].labels, pred.labels);
        if (!ev_density.empty()) {
          if (!density) density.emplace(ds.scenes[i].geometry);
          density->accumulate(ds.labels[i].labels, pred.labels);
        }
        ++scored;
      }
      if (scored == 0)
        throw std::runtime_error("no scenes in split '" + ev_split + "'");
      print_metrics(compute_metrics(cm));
      if (density) {
        PlaneGrid plane{density->geometry, "error_density", density->density()};
        write_plane(plane, ev_density);
      }
      return 0;
    }

    if (*cmp) {
      auto truth = load_labels(cmp_truth);
      auto pred = load_labels(cmp_pred);
      auto rep = cross_resolution_compare(truth, pred);
      std::printf("== truth cells sampled in prediction grid ==\n");
      print_metrics(compute_metrics(rep.truth_to_pred));
      std::printf("== prediction cells sampled in truth grid ==\n");
      print_metrics(compute_metrics(rep.pred_to_truth));
      return 0;
    }

    if (*render) {
      if (rd_labels.empty() == rd_plane.empty())
        throw std::runtime_error("pass exactly one of --labels or --plane");
      if (!rd_labels.empty())
        render_labels_ppm(load_labels(rd_labels), rd_out);
      else
        render_plane_ppm(load_plane(rd_plane), rd_out, rd_lo, rd_hi);
      std::printf("wrote %s\n", rd_out.string().c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

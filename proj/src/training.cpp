#include "cldnet/training.hpp"

#include <cstdio>
#include <numeric>
#include <thread>

namespace cldnet {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

InputMode parse_input_mode(const std::string& name) {
  if (name == "base") return InputMode::base;
  if (name == "cldnet-w") return InputMode::with_geometry;
  if (name == "cldnet-o") return InputMode::masked_optical;
  throw std::invalid_argument("unknown input mode '" + name +
                              "' (expected base, cldnet-w, or cldnet-o)");
}

const char* input_mode_name(InputMode mode) {
  switch (mode) {
    case InputMode::base: return "base";
    case InputMode::with_geometry: return "cldnet-w";
    case InputMode::masked_optical: return "cldnet-o";
  }
  return "?";
}

int input_mode_channels(InputMode mode) {
  return mode == InputMode::with_geometry ? kBaseFeatureChannels + 4
                                          : kBaseFeatureChannels;
}

FeatureStack build_model_input(const SceneGrid& scene, InputMode mode,
                               double mask_ratio, double sub_lon_deg) {
  auto norm = normalize_scene(scene, default_channel_table());
  auto stack = build_feature_stack(norm);
  if (mode == InputMode::masked_optical) {
    auto cfg = cldnet_o_mask();
    cfg.mask_ratio = mask_ratio;
    apply_mask(stack, cfg);
  } else if (mode == InputMode::with_geometry) {
    auto aux = compute_auxiliary_grid(scene.geometry, scene.timestamp, sub_lon_deg);
    concat_aux(stack, aux, AuxSelection::viewing_geometry());
  }
  return stack;
}

std::vector<TileIndex> make_tiles(int rows, int cols, int tile, int align) {
  if (tile <= 0 || align <= 0 || tile % align != 0)
    throw std::invalid_argument("tile size must be a positive multiple of " +
                                std::to_string(align));
  std::vector<TileIndex> out;
  auto starts = [&](int extent) {
    std::vector<int> s;
    if (extent <= tile) {
      s.push_back(0);
      return s;
    }
    for (int p = 0; p + tile < extent; p += tile) s.push_back(p);
    s.push_back(extent - tile);  // shifted final tile, ends at the edge
    return s;
  };
  for (int r : starts(rows))
    for (int c : starts(cols))
      out.push_back({r, c, std::min(tile, rows), std::min(tile, cols)});
  return out;
}

FeatureStack crop_features(const FeatureStack& stack, const TileIndex& t) {
  FeatureStack out;
  out.geometry = stack.geometry;
  out.geometry.rows = t.rows;
  out.geometry.cols = t.cols;
  out.geometry.origin_lat = stack.geometry.lat_at(t.r0);
  out.geometry.origin_lon = stack.geometry.lon_at(t.c0);
  out.channels = stack.channels;
  out.data.resize(out.plane_size() * stack.channels);
  for (int c = 0; c < stack.channels; ++c) {
    const float* src = stack.plane(c);
    float* dst = out.plane(c);
    for (int r = 0; r < t.rows; ++r)
      std::copy_n(src + std::size_t(t.r0 + r) * stack.geometry.cols + t.c0,
                  t.cols, dst + std::size_t(r) * t.cols);
  }
  return out;
}

std::vector<std::uint8_t> crop_labels(const std::vector<std::uint8_t>& labels,
                                      int cols, const TileIndex& t) {
  std::vector<std::uint8_t> out(std::size_t(t.rows) * t.cols);
  for (int r = 0; r < t.rows; ++r)
    std::copy_n(labels.data() + std::size_t(t.r0 + r) * cols + t.c0, t.cols,
                out.data() + std::size_t(r) * t.cols);
  return out;
}

std::vector<int> kfold_assignment(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix(seed));
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % std::uint64_t(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> fold(n);
  for (int i = 0; i < n; ++i) fold[order[i]] = i % folds;
  return fold;
}

namespace {

ag::Var<float> features_to_var(const FeatureStack& f) {
  auto x = ag::make_var<float>(
      {1, f.channels, f.geometry.rows, f.geometry.cols});
  x->value = f.data;
  return x;
}

struct BnStat {
  std::vector<float> mean, var;
  std::size_t count = 0;
};

struct TileOutcome {
  std::vector<std::vector<float>> grads;  // one per parameter, may be empty
  std::vector<BnStat> bn;
  double loss_sum = 0.0;
  std::size_t labeled = 0;
};

// One tile forward/backward on `model` (a private clone in the parallel
// case). Gradients and batch statistics are copied out so the caller can
// reduce them in tile order.
TileOutcome process_tile(nn::CldNet<float>& model, const TrainSample& sample,
                         const TileIndex& t) {
  model.set_training(true);
  model.zero_grad();
  auto x = features_to_var(crop_features(sample.features, t));
  auto labels = crop_labels(sample.labels, sample.features.geometry.cols, t);
  auto logits = model.forward(x);
  ag::MaskedLossInfo info;
  auto loss = ag::masked_log_softmax_nll(logits, labels, ag::LossReduction::sum,
                                         &info);
  TileOutcome out;
  out.loss_sum = loss->value[0];
  out.labeled = info.labeled_count;
  if (!info.all_unlabeled) {
    ag::backward(loss);
    for (const auto& p : model.parameters()) out.grads.push_back(p->grad);
  }
  for (auto* bn : model.norms())
    out.bn.push_back({bn->last_mean, bn->last_var, bn->last_count});
  return out;
}

struct Snapshot {
  std::vector<std::vector<float>> params;
  std::vector<std::vector<float>> running;
};

Snapshot take_snapshot(nn::CldNet<float>& model) {
  Snapshot s;
  for (const auto& p : model.parameters()) s.params.push_back(p->value);
  for (auto* bn : model.norms()) {
    s.running.push_back(bn->running_mean);
    s.running.push_back(bn->running_var);
  }
  return s;
}

void restore_snapshot(nn::CldNet<float>& model, const Snapshot& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.params[i];
  auto norms = model.norms();
  for (std::size_t i = 0; i < norms.size(); ++i) {
    norms[i]->running_mean = s.running[2 * i];
    norms[i]->running_var = s.running[2 * i + 1];
  }
}

}  // namespace

EvalResult evaluate_model(nn::CldNet<float>& model,
                          const std::vector<TrainSample>& samples, int tile) {
  ag::NoGradGuard guard;
  model.set_training(false);
  const int align = model.config().downsample_factor();
  EvalResult result;
  double nll = 0.0;
  std::size_t labeled = 0;
  for (const auto& s : samples) {
    const int rows = s.features.geometry.rows;
    const int cols = s.features.geometry.cols;
    // Overlapping edge tiles are resolved by overwriting, so every pixel is
    // scored exactly once.
    std::vector<std::uint8_t> pred(std::size_t(rows) * cols, kUnlabeled);
    std::vector<float> pixel_nll(pred.size(), 0.0f);
    for (const auto& t : make_tiles(rows, cols, tile, align)) {
      auto x = features_to_var(crop_features(s.features, t));
      auto logits = model.forward(x);
      auto tile_pred = ag::argmax_classes(logits);
      const auto tile_labels = crop_labels(s.labels, cols, t);
      // per-pixel NLL from the logits
      const std::size_t plane = logits->shape.plane();
      for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.cols; ++c) {
          const std::size_t ti = std::size_t(r) * t.cols + c;
          const std::size_t fi = std::size_t(t.r0 + r) * cols + t.c0 + c;
          pred[fi] = tile_pred[ti];
          if (tile_labels[ti] == kUnlabeled) {
            pixel_nll[fi] = 0.0f;
            continue;
          }
          const float* xp = logits->value.data();
          float mx = xp[ti];
          for (int k = 1; k < logits->shape.c; ++k)
            mx = std::max(mx, xp[k * plane + ti]);
          float lse = 0.0f;
          for (int k = 0; k < logits->shape.c; ++k)
            lse += std::exp(xp[k * plane + ti] - mx);
          pixel_nll[fi] = mx + std::log(lse) -
                          xp[std::size_t(tile_labels[ti]) * plane + ti];
        }
      }
    }
    result.matrix.accumulate(s.labels, pred);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (s.labels[i] == kUnlabeled) continue;
      nll += pixel_nll[i];
      ++labeled;
    }
  }
  result.loss = labeled > 0 ? nll / double(labeled) : 0.0;
  return result;
}

TrainResult train_model(nn::CldNet<float>& model,
                        const std::vector<TrainSample>& train_set,
                        const std::vector<TrainSample>& val_set,
                        const TrainOptions& opt,
                        AdamState<float>* resume_optimizer,
                        const TrainingProgress* resume_progress) {
  const int align = model.config().downsample_factor();
  if (opt.tile % align != 0)
    throw std::invalid_argument("tile size must be a multiple of " +
                                std::to_string(align));
  auto params = model.parameters();

  AdamState<float> local_opt;
  AdamState<float>& adam = resume_optimizer ? *resume_optimizer : local_opt;

  TrainingProgress prog;
  if (resume_progress) prog = *resume_progress;

  const int workers = std::max(1, opt.workers);
  std::vector<std::unique_ptr<nn::CldNet<float>>> clones;
  for (int w = 1; w < workers; ++w)
    clones.push_back(std::make_unique<nn::CldNet<float>>(model.config(), 0));

  TrainResult result;
  result.best_val_loss = prog.best_val_loss;
  Snapshot best;
  bool have_best = false;
  int stale = prog.epochs_since_improvement;

  for (int epoch = prog.next_epoch; epoch <= opt.max_epochs; ++epoch) {
    adam.lr = opt.schedule.rate_for_epoch(epoch);

    // Scene order depends only on (seed, epoch) so a resumed run replays
    // the same sequence.
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix(opt.seed) ^ mix(std::uint64_t(epoch)));
    for (int i = int(order.size()) - 1; i > 0; --i) {
      const int j = int(rng() % std::uint64_t(i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_nll = 0.0;
    std::size_t epoch_labeled = 0;
    for (int si : order) {
      const TrainSample& sample = train_set[si];
      const auto tiles = make_tiles(sample.features.geometry.rows,
                                    sample.features.geometry.cols, opt.tile,
                                    align);
      std::vector<TileOutcome> outcomes(tiles.size());
      if (workers <= 1 || tiles.size() <= 1) {
        for (std::size_t t = 0; t < tiles.size(); ++t)
          outcomes[t] = process_tile(model, sample, tiles[t]);
      } else {
        for (auto& c : clones) c->copy_params_from(model);
        const int nthreads = std::min<std::size_t>(workers, tiles.size());
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) {
          nn::CldNet<float>* m = w == 0 ? &model : clones[w - 1].get();
          pool.emplace_back([&, m, w] {
            for (std::size_t t = w; t < tiles.size(); t += nthreads)
              outcomes[t] = process_tile(*m, sample, tiles[t]);
          });
        }
        for (auto& th : pool) th.join();
      }

      // Reduce in tile-index order.
      std::size_t labeled = 0;
      double nll = 0.0;
      for (const auto& o : outcomes) {
        labeled += o.labeled;
        nll += o.loss_sum;
      }
      if (labeled > 0) {
        const float scale = 1.0f / float(labeled);
        model.zero_grad();
        for (std::size_t i = 0; i < params.size(); ++i) {
          params[i]->ensure_grad();
          auto& g = params[i]->grad;
          for (const auto& o : outcomes) {
            if (o.grads.empty()) continue;
            const auto& og = o.grads[i];
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += og[k];
          }
          for (auto& v : g) v *= scale;
        }
        adam_step(params, adam);
      }
      auto norms = model.norms();
      for (const auto& o : outcomes)
        for (std::size_t b = 0; b < norms.size(); ++b)
          norms[b]->apply_running_update(o.bn[b].mean, o.bn[b].var,
                                         o.bn[b].count);
      epoch_nll += nll;
      epoch_labeled += labeled;
    }

    auto val = evaluate_model(model, val_set, opt.tile);
    auto vm = compute_metrics(val.matrix);
    EpochStats st;
    st.epoch = epoch;
    st.lr = adam.lr;
    st.train_loss = epoch_labeled ? epoch_nll / double(epoch_labeled) : 0.0;
    st.val_loss = val.loss;
    st.val_accuracy = vm.accuracy;
    result.history.push_back(st);
    if (opt.verbose)
      std::fprintf(stderr,
                   "epoch %3d lr %.1e train %.4f val %.4f acc %.4f\n", epoch,
                   st.lr, st.train_loss, st.val_loss, st.val_accuracy);

    if (val.loss < result.best_val_loss) {
      result.best_val_loss = val.loss;
      result.best_epoch = epoch;
      stale = 0;
      best = take_snapshot(model);
      have_best = true;
      if (!opt.checkpoint_path.empty()) {
        TrainingProgress p{epoch + 1, result.best_val_loss, stale};
        save_checkpoint(opt.checkpoint_path.string() + ".best", model, opt.meta,
                        &adam, &p);
      }
    } else {
      ++stale;
    }
    if (!opt.checkpoint_path.empty()) {
      TrainingProgress p{epoch + 1, result.best_val_loss, stale};
      save_checkpoint(opt.checkpoint_path, model, opt.meta, &adam, &p);
    }
    if (stale >= opt.patience) {
      result.early_stopped = true;
      break;
    }
  }

  if (opt.restore_best && have_best) restore_snapshot(model, best);
  return result;
}

}  // namespace cldnet

#include "cldnet/inference.hpp"

#include "cldnet/training.hpp"

namespace cldnet {

namespace {

ag::Var<float> features_to_var(const FeatureStack& f) {
  auto x = ag::make_var<float>({1, f.channels, f.geometry.rows, f.geometry.cols});
  x->value = f.data;
  return x;
}

ScenePrediction from_logits(const ag::Var<float>& logits) {
  ScenePrediction out;
  out.rows = logits->shape.h;
  out.cols = logits->shape.w;
  out.classes = logits->shape.c;
  out.logits = logits->value;
  out.labels = ag::argmax_classes(logits);
  return out;
}

std::vector<std::uint8_t> argmax_planes(const std::vector<float>& logits,
                                        int classes, std::size_t plane) {
  std::vector<std::uint8_t> out(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    float best = logits[i];
    int best_c = 0;
    for (int c = 1; c < classes; ++c) {
      const float v = logits[c * plane + i];
      if (v > best) {
        best = v;
        best_c = c;
      }
    }
    out[i] = static_cast<std::uint8_t>(best_c);
  }
  return out;
}

int round_up(int v, int align) { return (v + align - 1) / align * align; }

}  // namespace

ScenePrediction predict_scene(nn::CldNet<float>& model,
                              const FeatureStack& input,
                              const InferenceOptions& opt) {
  ag::NoGradGuard guard;
  model.set_training(false);
  const int rows = input.geometry.rows;
  const int cols = input.geometry.cols;
  const int ds = model.config().downsample_factor();

  if (opt.tile <= 0 || (opt.tile >= rows && opt.tile >= cols))
    return from_logits(model.forward(features_to_var(input)));

  if (opt.tile % ds != 0)
    throw std::invalid_argument("inference tile must be a multiple of " +
                                std::to_string(ds));
  if (rows % ds != 0 || cols % ds != 0)
    throw std::invalid_argument("scene size must be a multiple of " +
                                std::to_string(ds));
  if (opt.halo < 0) throw std::invalid_argument("halo must be non-negative");
  const int halo = round_up(opt.halo, ds);

  const auto tiles = make_tiles(rows, cols, opt.tile, ds);
  const int ch = rows / ds, cw = cols / ds;
  const int bw = model.config().bottom_width;

  // Pass 1: stitch the coarse feature map from haloed tile windows, then
  // run the pyramid (with its scene-wide pooled branch) once.
  auto bottom_full = ag::make_var<float>({1, bw, ch, cw});
  auto window_of = [&](const TileIndex& t, int margin, TileIndex& w) {
    w.r0 = std::max(0, t.r0 - margin);
    w.c0 = std::max(0, t.c0 - margin);
    w.rows = std::min(rows, t.r0 + t.rows + margin) - w.r0;
    w.cols = std::min(cols, t.c0 + t.cols + margin) - w.c0;
  };
  for (const auto& t : tiles) {
    TileIndex w;
    window_of(t, halo, w);
    auto enc = model.run_encoder(features_to_var(crop_features(input, w)));
    const auto& b = enc.bottom;
    const int bh = b->shape.h, bww = b->shape.w;
    const int ir0 = (t.r0 - w.r0) / ds, ic0 = (t.c0 - w.c0) / ds;
    for (int c = 0; c < bw; ++c)
      for (int r = 0; r < t.rows / ds; ++r)
        std::copy_n(b->value.data() +
                        (std::size_t(c) * bh + ir0 + r) * bww + ic0,
                    t.cols / ds,
                    bottom_full->value.data() +
                        (std::size_t(c) * ch + t.r0 / ds + r) * cw + t.c0 / ds);
  }
  auto aspp_full = model.run_aspp(bottom_full);
  const int aw = aspp_full->shape.c;

  // Pass 2: decode each tile from a window wide enough that every kept
  // pixel has its full receptive field, with the pyramid features cropped
  // out of the scene-wide map.
  ScenePrediction out;
  out.rows = rows;
  out.cols = cols;
  out.classes = model.config().num_classes;
  const std::size_t plane = std::size_t(rows) * cols;
  out.logits.assign(plane * out.classes, 0.0f);

  const int margin2 = halo + kExactHaloMargin;
  for (const auto& t : tiles) {
    TileIndex w;
    window_of(t, margin2, w);
    auto enc = model.run_encoder(features_to_var(crop_features(input, w)));
    auto aspp = ag::make_var<float>({1, aw, w.rows / ds, w.cols / ds});
    for (int c = 0; c < aw; ++c)
      for (int r = 0; r < w.rows / ds; ++r)
        std::copy_n(aspp_full->value.data() +
                        (std::size_t(c) * ch + w.r0 / ds + r) * cw + w.c0 / ds,
                    w.cols / ds,
                    aspp->value.data() +
                        (std::size_t(c) * (w.rows / ds) + r) * (w.cols / ds));
    auto logits = model.run_decode_head(enc, aspp);
    const std::size_t wplane = logits->shape.plane();
    for (int c = 0; c < out.classes; ++c)
      for (int r = 0; r < t.rows; ++r)
        std::copy_n(logits->value.data() + c * wplane +
                        std::size_t(t.r0 - w.r0 + r) * w.cols + (t.c0 - w.c0),
                    t.cols,
                    out.logits.data() + c * plane +
                        std::size_t(t.r0 + r) * cols + t.c0);
  }
  out.labels = argmax_planes(out.logits, out.classes, plane);
  return out;
}

}  // namespace cldnet

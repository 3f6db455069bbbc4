#pragma once
// Network building blocks and the cloud-type segmentation architecture:
// depthwise separable blocks, the multi-dilation pyramid (DW-ASPP), and the
// encoder-decoder with skip concatenation (DW-U), fused into per-pixel
// class logits.

#include <array>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cldnet/autodiff.hpp"

namespace cldnet::nn {

using ag::Shape;
using ag::Var;

// Deterministic fan-in-scaled uniform initialization.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  void fill_uniform(std::vector<T>& v, double bound) {
    for (auto& x : v) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      x = static_cast<T>((2.0 * u - 1.0) * bound);
    }
  }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
struct Conv2d {
  Var<T> weight;  // (Cout, Cin/groups, kh, kw)
  Var<T> bias;    // nullable
  ag::ConvSpec spec;

  Conv2d() = default;
  Conv2d(int cin, int cout, int k, ag::ConvSpec cs, bool with_bias,
         Initializer<T>& init, const std::string& name) {
    spec = cs;
    weight = ag::make_var<T>({cout, cin / cs.groups, k, k}, true, name + ".weight");
    const double fan_in = static_cast<double>(cin / cs.groups) * k * k;
    init.fill_uniform(weight->value, 1.0 / std::sqrt(fan_in));
    if (with_bias)
      bias = ag::make_var<T>({1, cout, 1, 1}, true, name + ".bias");
  }

  Var<T> operator()(const Var<T>& x) const {
    return ag::conv2d(x, weight, bias, spec);
  }
  void params(std::vector<Var<T>>& out) const {
    out.push_back(weight);
    if (bias) out.push_back(bias);
  }
};

template <typename T>
struct BatchNorm2d {
  Var<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
  std::string name;

  // Batch statistics from the most recent training-mode forward; the
  // trainer applies them to the running averages in a fixed order so the
  // result is independent of worker scheduling.
  std::vector<T> last_mean, last_var;
  std::size_t last_count = 0;

  BatchNorm2d() = default;
  BatchNorm2d(int channels, const std::string& nm) : name(nm) {
    gamma = ag::make_var<T>({1, channels, 1, 1}, true, nm + ".gamma");
    beta = ag::make_var<T>({1, channels, 1, 1}, true, nm + ".beta");
    std::fill(gamma->value.begin(), gamma->value.end(), T(1));
    running_mean.assign(channels, T(0));
    running_var.assign(channels, T(1));
  }

  Var<T> operator()(const Var<T>& x, bool training) {
    if (!training)
      return ag::batch_norm(x, gamma, beta, running_mean, running_var, false, eps);
    auto out = ag::batch_norm(x, gamma, beta, running_mean, running_var, true,
                              eps, &last_mean, &last_var);
    last_count = static_cast<std::size_t>(x->shape.n) * x->shape.plane();
    return out;
  }

  void apply_running_update(const std::vector<T>& mean, const std::vector<T>& var,
                            std::size_t count) {
    const T unbias = count > 1 ? static_cast<T>(count) / (count - 1) : T(1);
    for (std::size_t c = 0; c < running_mean.size(); ++c) {
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean[c];
      running_var[c] =
          (T(1) - momentum) * running_var[c] + momentum * var[c] * unbias;
    }
  }
  void apply_own_update() { apply_running_update(last_mean, last_var, last_count); }

  void params(std::vector<Var<T>>& out) const {
    out.push_back(gamma);
    out.push_back(beta);
  }
};

// Depthwise 3x3 (no bias) -> pointwise 1x1 (bias) -> norm -> relu.
template <typename T>
struct DwSeparableBlock {
  Conv2d<T> depthwise, pointwise;
  BatchNorm2d<T> norm;

  DwSeparableBlock() = default;
  DwSeparableBlock(int cin, int width, int dilation, Initializer<T>& init,
                   const std::string& name)
      : depthwise(cin, cin, 3,
                  {.stride = 1, .padding = dilation, .dilation = dilation,
                   .groups = cin},
                  false, init, name + ".dw"),
        pointwise(cin, width, 1, {}, true, init, name + ".pw"),
        norm(width, name + ".bn") {}

  Var<T> operator()(const Var<T>& x, bool training) {
    return ag::relu(norm(pointwise(depthwise(x)), training));
  }
  void params(std::vector<Var<T>>& out) const {
    depthwise.params(out);
    pointwise.params(out);
    norm.params(out);
  }
  void norms(std::vector<BatchNorm2d<T>*>& out) { out.push_back(&norm); }
};

struct CldNetConfig {
  int in_channels = 76;
  int num_classes = 10;
  int stem_width = 32;
  int u_depth = 3;
  std::vector<int> u_widths = {32, 64, 128};
  int bottom_width = 256;
  int aspp_width = 112;  // per-branch width
  std::array<int, 4> aspp_dilations = {1, 6, 12, 18};
  int fuse_width = 64;

  int downsample_factor() const { return 1 << u_depth; }
};

// Reduced-size configuration for small desk-scale experiments.
inline CldNetConfig small_cldnet_config(int in_channels) {
  CldNetConfig cfg;
  cfg.in_channels = in_channels;
  cfg.stem_width = 16;
  cfg.u_depth = 3;
  cfg.u_widths = {16, 24, 32};
  cfg.bottom_width = 48;
  cfg.aspp_width = 24;
  cfg.fuse_width = 32;
  return cfg;
}

template <typename T>
class CldNet {
 public:
  CldNet(const CldNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.u_depth < 1 || static_cast<int>(cfg.u_widths.size()) != cfg.u_depth)
      throw std::invalid_argument("cldnet: u_widths must have u_depth entries");
    for (int w : cfg.u_widths)
      if (w <= 0) throw std::invalid_argument("cldnet: widths must be positive");
    {
      auto d = cfg.aspp_dilations;
      std::sort(d.begin(), d.end());
      if (std::adjacent_find(d.begin(), d.end()) != d.end())
        throw std::invalid_argument("cldnet: aspp dilations must be distinct");
    }
    Initializer<T> init(seed);
    stem_ = Conv2d<T>(cfg.in_channels, cfg.stem_width, 1, {}, true, init, "stem.pw");
    stem_bn_ = BatchNorm2d<T>(cfg.stem_width, "stem.bn");
    int cur = cfg.stem_width;
    for (int l = 0; l < cfg.u_depth; ++l) {
      const std::string base = "enc" + std::to_string(l);
      enc_.push_back({DwSeparableBlock<T>(cur, cfg.u_widths[l], 1, init, base + ".0"),
                      DwSeparableBlock<T>(cfg.u_widths[l], cfg.u_widths[l], 1, init,
                                          base + ".1")});
      cur = cfg.u_widths[l];
    }
    bottom_ = {DwSeparableBlock<T>(cur, cfg.bottom_width, 1, init, "bottom.0"),
               DwSeparableBlock<T>(cfg.bottom_width, cfg.bottom_width, 1, init,
                                   "bottom.1")};
    for (int b = 0; b < 4; ++b)
      aspp_branch_.push_back(DwSeparableBlock<T>(cfg.bottom_width, cfg.aspp_width,
                                                 cfg.aspp_dilations[b], init,
                                                 "aspp.b" + std::to_string(b)));
    aspp_image_ = Conv2d<T>(cfg.bottom_width, cfg.aspp_width, 1, {}, true, init,
                            "aspp.image.pw");
    aspp_proj_ = Conv2d<T>(cfg.aspp_width * 5, cfg.aspp_width, 1, {}, true, init,
                           "aspp.proj.pw");
    aspp_proj_bn_ = BatchNorm2d<T>(cfg.aspp_width, "aspp.proj.bn");
    cur = cfg.bottom_width;
    for (int l = cfg.u_depth - 1; l >= 0; --l) {
      const std::string base = "dec" + std::to_string(l);
      const int cat = cur + cfg.u_widths[l];
      dec_.push_back({DwSeparableBlock<T>(cat, cfg.u_widths[l], 1, init, base + ".0"),
                      DwSeparableBlock<T>(cfg.u_widths[l], cfg.u_widths[l], 1, init,
                                          base + ".1")});
      cur = cfg.u_widths[l];
    }
    fuse_ = Conv2d<T>(cfg.aspp_width + cfg.u_widths[0], cfg.fuse_width, 1, {},
                      true, init, "fuse.pw");
    fuse_bn_ = BatchNorm2d<T>(cfg.fuse_width, "fuse.bn");
    head_ = Conv2d<T>(cfg.fuse_width, cfg.num_classes, 1, {}, true, init, "head.pw");
  }

  const CldNetConfig& config() const { return cfg_; }
  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  struct EncoderOut {
    std::vector<Var<T>> skips;  // one per level, before pooling
    Var<T> bottom;              // coarsest features
  };

  EncoderOut run_encoder(const Var<T>& x) {
    if (x->shape.c != cfg_.in_channels)
      throw std::invalid_argument("cldnet: input channel mismatch");
    const int f = cfg_.downsample_factor();
    if (x->shape.h % f != 0 || x->shape.w % f != 0)
      throw std::invalid_argument(
          "cldnet: spatial size must be divisible by " + std::to_string(f) +
          "; pad the input accordingly");
    EncoderOut out;
    auto cur = ag::relu(stem_bn_(stem_(x), training_));
    for (auto& level : enc_) {
      cur = level[0](cur, training_);
      cur = level[1](cur, training_);
      out.skips.push_back(cur);
      cur = ag::max_pool2d(cur, 2, 2);
    }
    cur = bottom_[0](cur, training_);
    out.bottom = bottom_[1](cur, training_);
    return out;
  }

  // Multi-dilation pyramid over the coarsest features, plus an image-level
  // pooled branch; projected back to aspp_width channels.
  Var<T> run_aspp(const Var<T>& bottom) {
    std::vector<Var<T>> branches;
    const int min_dim = std::min(bottom->shape.h, bottom->shape.w);
    for (int b = 0; b < 4; ++b) {
      auto& blk = aspp_branch_[b];
      int dil = cfg_.aspp_dilations[b];
      if (2 * dil + 1 > min_dim) {
        const int clamped = std::max((min_dim - 1) / 2, 1);
        if (clamped != dil) {
          warnings_.push_back("aspp branch " + std::to_string(b) +
                              ": dilation clamped from " + std::to_string(dil) +
                              " to " + std::to_string(clamped));
          dil = clamped;
        }
      }
      // Dilation is arithmetic only; reuse the branch weights with the
      // clamped value.
      auto saved = blk.depthwise.spec;
      blk.depthwise.spec.dilation = dil;
      blk.depthwise.spec.padding = dil;
      branches.push_back(blk(bottom, training_));
      blk.depthwise.spec = saved;
    }
    auto pooled = ag::relu(aspp_image_(ag::global_avg_pool(bottom)));
    branches.push_back(ag::broadcast_hw(pooled, bottom->shape.h, bottom->shape.w));
    return ag::relu(aspp_proj_bn_(aspp_proj_(ag::concat_channels(branches)),
                                  training_));
  }

  // Decoder + fusion + classifier head. `aspp` is the pyramid output at the
  // coarsest resolution (possibly cropped from a scene-wide map).
  Var<T> run_decode_head(const EncoderOut& enc, const Var<T>& aspp) {
    auto cur = enc.bottom;
    for (int i = 0; i < cfg_.u_depth; ++i) {
      const int skip_level = cfg_.u_depth - 1 - i;
      cur = ag::bilinear_upsample(cur, 2);
      cur = ag::concat_channels<T>({cur, enc.skips[skip_level]});
      cur = dec_[i][0](cur, training_);
      cur = dec_[i][1](cur, training_);
    }
    auto aspp_up = ag::bilinear_upsample(aspp, cfg_.downsample_factor());
    auto fused = ag::relu(
        fuse_bn_(fuse_(ag::concat_channels<T>({aspp_up, cur})), training_));
    return head_(fused);
  }

  Var<T> forward(const Var<T>& x) {
    auto enc = run_encoder(x);
    auto aspp = run_aspp(enc.bottom);
    return run_decode_head(enc, aspp);
  }

  std::vector<Var<T>> parameters() const {
    std::vector<Var<T>> out;
    stem_.params(out);
    stem_bn_.params(out);
    for (const auto& level : enc_) {
      level[0].params(out);
      level[1].params(out);
    }
    bottom_[0].params(out);
    bottom_[1].params(out);
    for (const auto& b : aspp_branch_) b.params(out);
    aspp_image_.params(out);
    aspp_proj_.params(out);
    aspp_proj_bn_.params(out);
    for (const auto& level : dec_) {
      level[0].params(out);
      level[1].params(out);
    }
    fuse_.params(out);
    fuse_bn_.params(out);
    head_.params(out);
    return out;
  }

  std::vector<BatchNorm2d<T>*> norms() {
    std::vector<BatchNorm2d<T>*> out;
    out.push_back(&stem_bn_);
    for (auto& level : enc_) {
      level[0].norms(out);
      level[1].norms(out);
    }
    bottom_[0].norms(out);
    bottom_[1].norms(out);
    for (auto& b : aspp_branch_) b.norms(out);
    out.push_back(&aspp_proj_bn_);
    for (auto& level : dec_) {
      level[0].norms(out);
      level[1].norms(out);
    }
    out.push_back(&fuse_bn_);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : parameters()) p->zero_grad();
  }

  void copy_params_from(const CldNet<T>& other) {
    auto mine = parameters();
    auto theirs = other.parameters();
    if (mine.size() != theirs.size())
      throw std::invalid_argument("copy_params_from: architecture mismatch");
    for (std::size_t i = 0; i < mine.size(); ++i)
      mine[i]->value = theirs[i]->value;
    auto my_norms = norms();
    auto their_norms = const_cast<CldNet<T>&>(other).norms();
    for (std::size_t i = 0; i < my_norms.size(); ++i) {
      my_norms[i]->running_mean = their_norms[i]->running_mean;
      my_norms[i]->running_var = their_norms[i]->running_var;
    }
  }

 private:
  CldNetConfig cfg_;
  bool training_ = false;
  std::vector<std::string> warnings_;

  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  std::vector<std::array<DwSeparableBlock<T>, 2>> enc_;
  std::array<DwSeparableBlock<T>, 2> bottom_;
  std::vector<DwSeparableBlock<T>> aspp_branch_;
  Conv2d<T> aspp_image_;
  Conv2d<T> aspp_proj_;
  BatchNorm2d<T> aspp_proj_bn_;
  std::vector<std::array<DwSeparableBlock<T>, 2>> dec_;
  Conv2d<T> fuse_;
  BatchNorm2d<T> fuse_bn_;
  Conv2d<T> head_;
};

// Architecture registry: named constructors so baseline architectures can
// be plugged in beside the default network.
template <typename T>
using ModelFactory =
    std::function<std::unique_ptr<CldNet<T>>(const CldNetConfig&, std::uint64_t)>;

template <typename T>
std::unique_ptr<CldNet<T>> make_model(const std::string& name,
                                      const CldNetConfig& cfg,
                                      std::uint64_t seed) {
  if (name == "cldnet") return std::make_unique<CldNet<T>>(cfg, seed);
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

}  // namespace cldnet::nn

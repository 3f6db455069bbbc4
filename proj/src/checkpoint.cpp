#include "cldnet/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace cldnet {

using nlohmann::json;

namespace {

json config_to_json(const nn::CldNetConfig& c) {
  return json{{"in_channels", c.in_channels},
              {"num_classes", c.num_classes},
              {"stem_width", c.stem_width},
              {"u_depth", c.u_depth},
              {"u_widths", c.u_widths},
              {"bottom_width", c.bottom_width},
              {"aspp_width", c.aspp_width},
              {"aspp_dilations", c.aspp_dilations},
              {"fuse_width", c.fuse_width}};
}

nn::CldNetConfig config_from_json(const json& j) {
  nn::CldNetConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.stem_width = j.at("stem_width").get<int>();
  c.u_depth = j.at("u_depth").get<int>();
  c.u_widths = j.at("u_widths").get<std::vector<int>>();
  c.bottom_width = j.at("bottom_width").get<int>();
  c.aspp_dilations = j.at("aspp_dilations").get<std::array<int, 4>>();
  c.aspp_width = j.at("aspp_width").get<int>();
  c.fuse_width = j.at("fuse_width").get<int>();
  return c;
}

void write_blob(std::ostream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_blob(std::istream& in, std::vector<float>& v, std::size_t n,
               const std::string& what) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
    throw RasterError("truncated checkpoint tensor " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const nn::CldNet<float>& model, const CheckpointMeta& meta,
                     const AdamState<float>* optimizer,
                     const TrainingProgress* progress) {
  auto params = model.parameters();
  auto norms = const_cast<nn::CldNet<float>&>(model).norms();

  // The tensor directory pins both order and size of every raw blob.
  json tensors = json::array();
  for (const auto& p : params)
    tensors.push_back({{"name", p->name}, {"size", p->value.size()}});
  for (const auto* bn : norms) {
    tensors.push_back({{"name", bn->name + ".running_mean"},
                       {"size", bn->running_mean.size()}});
    tensors.push_back({{"name", bn->name + ".running_var"},
                       {"size", bn->running_var.size()}});
  }
  if (optimizer)
    for (const auto& p : params) {
      const auto it = optimizer->slots.find(p->name);
      const std::size_t sz = it != optimizer->slots.end() ? it->second.m.size() : 0;
      tensors.push_back({{"name", p->name + ".adam_m"}, {"size", sz}});
      tensors.push_back({{"name", p->name + ".adam_v"}, {"size", sz}});
    }

  json j{{"magic", "cldckpt"},
         {"architecture", meta.architecture},
         {"mode", meta.mode},
         {"seed", meta.seed},
         {"config", config_to_json(model.config())},
         {"tensors", tensors}};
  if (optimizer)
    j["optimizer"] = json{{"step", optimizer->step},
                          {"beta1", optimizer->beta1},
                          {"beta2", optimizer->beta2},
                          {"eps", optimizer->eps},
                          {"lr", optimizer->lr}};
  if (progress)
    j["progress"] =
        json{{"next_epoch", progress->next_epoch},
             {"best_val_loss", progress->best_val_loss},
             {"epochs_since_improvement", progress->epochs_since_improvement}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw RasterError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  for (const auto& p : params) write_blob(out, p->value);
  for (const auto* bn : norms) {
    write_blob(out, bn->running_mean);
    write_blob(out, bn->running_var);
  }
  if (optimizer)
    for (const auto& p : params) {
      const auto it = optimizer->slots.find(p->name);
      if (it != optimizer->slots.end()) {
        write_blob(out, it->second.m);
        write_blob(out, it->second.v);
      }
    }
  if (!out) throw RasterError("write failed for checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RasterError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw RasterError("cannot read checkpoint header " + path.string());
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || j.value("magic", "") != "cldckpt")
    throw RasterError("not a checkpoint file: " + path.string());

  LoadedCheckpoint ck;
  ck.config = config_from_json(j.at("config"));
  ck.meta.architecture = j.value("architecture", "cldnet");
  ck.meta.mode = j.value("mode", "base");
  ck.meta.seed = j.value("seed", std::uint64_t(0));
  ck.model = nn::make_model<float>(ck.meta.architecture, ck.config, ck.meta.seed);

  if (j.contains("optimizer")) {
    AdamState<float> st;
    const auto& o = j.at("optimizer");
    st.step = o.at("step").get<std::int64_t>();
    st.beta1 = o.at("beta1").get<double>();
    st.beta2 = o.at("beta2").get<double>();
    st.eps = o.at("eps").get<double>();
    st.lr = o.at("lr").get<double>();
    ck.optimizer = std::move(st);
  }
  if (j.contains("progress")) {
    TrainingProgress pr;
    const auto& p = j.at("progress");
    pr.next_epoch = p.at("next_epoch").get<int>();
    pr.best_val_loss = p.at("best_val_loss").get<double>();
    pr.epochs_since_improvement = p.at("epochs_since_improvement").get<int>();
    ck.progress = pr;
  }

  auto params = ck.model->parameters();
  auto norms = ck.model->norms();
  std::size_t idx = 0;
  const auto& tensors = j.at("tensors");
  auto next = [&](const std::string& name, std::size_t expect) -> std::size_t {
    if (idx >= tensors.size())
      throw RasterError("checkpoint tensor directory ended early at " + name);
    const auto& t = tensors[idx++];
    if (t.at("name").get<std::string>() != name)
      throw RasterError("checkpoint tensor order mismatch: expected " + name +
                        ", found " + t.at("name").get<std::string>());
    const auto sz = t.at("size").get<std::size_t>();
    if (expect != SIZE_MAX && sz != expect)
      throw RasterError("checkpoint tensor size mismatch for " + name);
    return sz;
  };

  for (auto& p : params) {
    next(p->name, p->value.size());
    read_blob(in, p->value, p->value.size(), p->name);
  }
  for (auto* bn : norms) {
    next(bn->name + ".running_mean", bn->running_mean.size());
    read_blob(in, bn->running_mean, bn->running_mean.size(), bn->name);
    next(bn->name + ".running_var", bn->running_var.size());
    read_blob(in, bn->running_var, bn->running_var.size(), bn->name);
  }
  if (ck.optimizer) {
    for (auto& p : params) {
      const std::size_t szm = next(p->name + ".adam_m", SIZE_MAX);
      if (szm > 0) {
        auto& slot = ck.optimizer->slots[p->name];
        read_blob(in, slot.m, szm, p->name + ".adam_m");
        next(p->name + ".adam_v", szm);
        read_blob(in, slot.v, szm, p->name + ".adam_v");
      } else {
        next(p->name + ".adam_v", 0);
      }
    }
  }
  return ck;
}

}  // namespace cldnet

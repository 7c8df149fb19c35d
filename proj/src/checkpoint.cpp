#include "ltx/checkpoint.hpp"

#include <cmath>
#include <map>

#include "ltx/common.hpp"

namespace ltx {

namespace {

template <typename T>
Tensor tensor_of(const std::string& name, const T& t) {
  Tensor out;
  out.name = name;
  if constexpr (T::RowsAtCompileTime == 1) {
    out.dims = {static_cast<std::uint64_t>(t.cols())};
  } else {
    out.dims = {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())};
  }
  out.values.assign(t.data(), t.data() + t.size());
  return out;
}

}  // namespace

Checkpoint new_checkpoint(const nn::ModelConfig& cfg, std::uint64_t seed) {
  return {{cfg, nn::init_params<float>(cfg, seed)}, train::zero_state<float>(cfg)};
}

std::vector<Tensor> to_tensors(const Checkpoint& ckpt) {
  std::vector<Tensor> out;
  nn::visit_params([&](const std::string& name, const auto& t) { out.push_back(tensor_of(name, t)); },
                   ckpt.model.params);
  nn::visit_params([&](const std::string& name, const auto& t) { out.push_back(tensor_of("optimizer.m." + name, t)); },
                   ckpt.optimizer.m);
  nn::visit_params([&](const std::string& name, const auto& t) { out.push_back(tensor_of("optimizer.v." + name, t)); },
                   ckpt.optimizer.v);
  return out;
}

Checkpoint from_tensors(const nn::ModelConfig& cfg, std::uint64_t step, std::span<const Tensor> tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) {
    if (!by_name.emplace(t.name, &t).second) throw DataError("duplicate tensor '" + t.name + "'");
  }
  Checkpoint ckpt{{cfg, nn::zero_params<float>(cfg)}, train::zero_state<float>(cfg)};
  ckpt.optimizer.step = step;
  auto fill = [&](const std::string& prefix) {
    return [&, prefix](const std::string& name, auto& dst) {
      auto it = by_name.find(prefix + name);
      if (it == by_name.end()) throw DataError("checkpoint lacks tensor '" + prefix + name + "'");
      const auto expected = tensor_of(prefix + name, dst);
      if (it->second->dims != expected.dims) throw DataError("tensor '" + prefix + name + "' has the wrong shape");
      std::copy(it->second->values.begin(), it->second->values.end(), dst.data());
      by_name.erase(it);
    };
  };
  nn::visit_params(fill(""), ckpt.model.params);
  nn::visit_params(fill("optimizer.m."), ckpt.optimizer.m);
  nn::visit_params(fill("optimizer.v."), ckpt.optimizer.v);
  if (!by_name.empty()) throw DataError("checkpoint has unexpected tensor '" + by_name.begin()->first + "'");
  for (const auto& t : tensors) {
    for (float v : t.values) {
      if (!std::isfinite(v)) throw DataError("non-finite value in tensor '" + t.name + "'");
    }
  }
  return ckpt;
}

std::filesystem::path sidecar_path(const std::filesystem::path& ckpt_path) {
  auto p = ckpt_path;
  p += ".json";
  return p;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::ordered_json side;
  side["format"] = "ltx-checkpoint";
  side["model"] = nn::to_json(ckpt.config());
  side["step"] = ckpt.step();
  write_tensors(path, to_tensors(ckpt));
  write_file_atomic(sidecar_path(path), side.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto side = nlohmann::json::parse(read_file(sidecar_path(path)), nullptr, false);
  if (side.is_discarded() || side.value("format", "") != "ltx-checkpoint") {
    throw DataError("missing or malformed checkpoint sidecar: " + sidecar_path(path).string());
  }
  const auto cfg = nn::model_config_from_json(side.at("model"));
  return from_tensors(cfg, side.value("step", std::uint64_t{0}), read_tensors(path));
}

}  // namespace ltx

#include "ewcft/model/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ewcft/train/config_json.hpp"

namespace ewcft::model {

using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "ewcft-checkpoint";

void require_finite(const std::vector<double>& values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("checkpoint: non-finite value in " + what);
  }
}

json arrays_to_json(const continual::ParameterArrays& arrays, const std::string& what) {
  json out = json::object();
  for (const auto& [id, v] : arrays) {
    require_finite(v, what + " '" + id + "'");
    out[id] = v;
  }
  return out;
}

continual::ParameterArrays arrays_from_json(const json& j) {
  continual::ParameterArrays out;
  for (const auto& [id, v] : j.items()) out.emplace(id, v.get<std::vector<double>>());
  return out;
}

}  // namespace

json checkpoint_to_json(const Classifier& model, const continual::ParameterSnapshot* snapshot,
                        const continual::FisherDiagonal* fisher, const json& metadata) {
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["model"] = {{"kind", std::string(model.kind())}, {"dims", model.dims()}, {"init_seed", model.seed()}};
  json params = json::array();
  for (const auto& p : model.parameters()) {
    require_finite(p.value.data(), "parameter '" + p.id + "'");
    params.push_back({{"id", p.id}, {"shape", p.value.shape()}, {"values", p.value.data()}});
  }
  j["parameters"] = std::move(params);
  if (snapshot) j["snapshot"] = arrays_to_json(snapshot->values(), "snapshot");
  if (fisher) {
    j["fisher"] = {{"sample_size", fisher->sample_size()},
                   {"source", fisher->source()},
                   {"values", arrays_to_json(fisher->values(), "fisher")}};
  }
  if (!metadata.is_null()) j["metadata"] = metadata;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != kFormat) throw std::runtime_error("checkpoint: not an ewcft checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto& m = j.at("model");
    ModelDims dims;
    from_json(m.at("dims"), dims);
    Checkpoint c;
    c.model = make_classifier(m.at("kind").get<std::string>(), dims, m.at("init_seed").get<std::uint64_t>());
    std::vector<Parameter> params;
    for (const auto& p : j.at("parameters")) {
      params.push_back({p.at("id").get<std::string>(),
                        autodiff::Tensor(p.at("shape").get<autodiff::Shape>(), p.at("values").get<std::vector<double>>())});
    }
    c.model->load_parameters(params);
    if (auto it = j.find("snapshot"); it != j.end()) c.snapshot = continual::ParameterSnapshot(arrays_from_json(*it));
    if (auto it = j.find("fisher"); it != j.end()) {
      c.fisher = continual::FisherDiagonal(arrays_from_json(it->at("values")), it->at("sample_size").get<std::size_t>(),
                                           it->at("source").get<std::string>());
    }
    if (auto it = j.find("metadata"); it != j.end()) c.metadata = *it;
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Classifier& model,
                     const continual::ParameterSnapshot* snapshot, const continual::FisherDiagonal* fisher,
                     const json& metadata) {
  train::write_json_file(checkpoint_to_json(model, snapshot, fisher, metadata), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(train::read_json_file(path));
}

}  // namespace ewcft::model

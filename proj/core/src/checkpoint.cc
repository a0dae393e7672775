#include "ealearn/checkpoint.h"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ealearn/error.h"

namespace ealearn {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "ealearn-checkpoint";

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error("checkpoint matrix size does not match its shape");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json config_to_json(const ModelConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"num_layers", c.num_layers},
          {"dropout_rate", c.dropout_rate},
          {"margin", c.margin},
          {"negatives_per_positive", c.negatives_per_positive},
          {"learning_rate", c.learning_rate},
          {"optimizer", std::string(optimizer_name(c.optimizer))},
          {"max_epochs", c.max_epochs},
          {"eval_every", c.eval_every},
          {"patience", c.patience},
          {"softmax_temperature", c.softmax_temperature},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.margin = j.at("margin").get<double>();
  c.negatives_per_positive = j.at("negatives_per_positive").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.max_epochs = j.at("max_epochs").get<int>();
  c.eval_every = j.at("eval_every").get<int>();
  c.patience = j.at("patience").get<int>();
  c.softmax_temperature = j.at("softmax_temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  validate(c);
  return c;
}

}  // namespace

std::string serialize_checkpoint(const ModelState& state) {
  std::ostringstream rng_text;
  rng_text << state.rng;
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(state.config);
  j["epoch"] = state.epoch;
  j["adam_steps"] = state.adam_steps;
  j["rng"] = rng_text.str();
  for (Side s : {Side::kLeft, Side::kRight}) {
    const std::string name(side_name(s));
    j["embeddings"][name] = matrix_to_json(state.embeddings[side_index(s)]);
    j["adam_first"][name] = matrix_to_json(state.adam_first[side_index(s)]);
    j["adam_second"][name] = matrix_to_json(state.adam_second[side_index(s)]);
  }
  return j.dump();
}

ModelState deserialize_checkpoint(const std::string& blob) {
  try {
    const json j = json::parse(blob);
    if (j.at("format").get<std::string>() != kFormat) {
      throw Error("not an ealearn checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(fmt::format("unsupported checkpoint version {}", version));
    }
    ModelState state;
    state.config = config_from_json(j.at("config"));
    state.epoch = j.at("epoch").get<long>();
    state.adam_steps = j.at("adam_steps").get<long>();
    std::istringstream rng_text(j.at("rng").get<std::string>());
    rng_text >> state.rng;
    if (!rng_text) throw Error("corrupt random stream state in checkpoint");
    for (Side s : {Side::kLeft, Side::kRight}) {
      const std::string name(side_name(s));
      const std::size_t i = side_index(s);
      state.embeddings[i] = matrix_from_json(j.at("embeddings").at(name));
      state.adam_first[i] = matrix_from_json(j.at("adam_first").at(name));
      state.adam_second[i] = matrix_from_json(j.at("adam_second").at(name));
      if (state.embeddings[i].cols() != state.config.embedding_dim) {
        throw Error("checkpoint embedding width does not match its config");
      }
    }
    return state;
  } catch (const json::exception& e) {
    throw Error(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const ModelState& state,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << serialize_checkpoint(state);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace ealearn

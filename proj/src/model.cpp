#include "docmt/model.hpp"

#include <fstream>

#include "docmt/checkpoint.hpp"
#include "docmt/error.hpp"
#include "json.hpp"

namespace docmt {

namespace {

nlohmann::json config_to_json(const TransformerConfig& c) {
  return {{"num_layers", c.num_layers},
          {"model_dim", c.model_dim},
          {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},
          {"max_positions", c.max_positions},
          {"dropout", c.dropout},
          {"label_smoothing", c.label_smoothing},
          {"shared_embeddings", c.shared_embeddings}};
}

TransformerConfig config_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  c.shared_embeddings = j.at("shared_embeddings").get<bool>();
  c.validate();
  return c;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  if (model.stage != "baseline" && model.stage != "han")
    throw ValidationError("unknown model stage '" + model.stage + "'");
  save_params(model.params, path);
  nlohmann::json manifest;
  manifest["stage"] = model.stage;
  manifest["precision"] = "float32";
  manifest["config"] = config_to_json(model.config);
  manifest["context_spec"] = model.trained_spec.offsets;
  // tokens after the four reserved specials reconstruct the vocabulary
  std::vector<std::string> tokens(model.vocab.tokens().begin() + 4,
                                  model.vocab.tokens().end());
  manifest["vocab"] = tokens;
  std::ofstream out(path + ".json");
  if (!out) throw CheckpointError("cannot write manifest: " + path + ".json");
  out << manifest.dump(2) << "\n";
  if (!out) throw CheckpointError("failed writing manifest: " + path + ".json");
}

Model load_model(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw CheckpointError("cannot read manifest: " + path + ".json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad manifest " + path + ".json: " + e.what());
  }
  Model model;
  try {
    model.stage = manifest.at("stage").get<std::string>();
    if (manifest.at("precision").get<std::string>() != "float32")
      throw CheckpointError("manifest precision is not float32: " + path);
    model.config = config_from_json(manifest.at("config"));
    model.trained_spec =
        ContextSpec::of(manifest.at("context_spec").get<std::vector<int>>());
    model.vocab =
        Vocabulary(manifest.at("vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad manifest " + path + ".json: " + e.what());
  }
  model.params = load_params<float>(path);
  if (!model.params.has("embed"))
    throw CheckpointError("checkpoint lacks the embedding table: " + path);
  const auto& embed = model.params.at("embed").value;
  if (embed.rows() != model.vocab.size() || embed.cols() != model.config.model_dim)
    throw CheckpointError(
        "embedding table " + Tape<float>::shape_str(embed) + " does not match " +
        std::to_string(model.vocab.size()) + " vocabulary entries at dim " +
        std::to_string(model.config.model_dim) + ": " + path);
  if (model.stage == "baseline" && !model.trained_spec.empty())
    throw CheckpointError("baseline checkpoint declares a context spec: " + path);
  return model;
}

}  // namespace docmt

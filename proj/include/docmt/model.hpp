#pragma once

#include <string>

#include "docmt/han.hpp"
#include "docmt/nmt.hpp"
#include "docmt/params.hpp"
#include "docmt/vocab.hpp"

namespace docmt {

/// A trained translation model: configuration, vocabulary, parameters, and
/// which stage produced it. Serialized as a binary parameter container plus
/// a JSON manifest sidecar at <path>.json.
struct Model {
  TransformerConfig config;
  Vocabulary vocab{{}};
  ParamStore<float> params;
  std::string stage = "baseline";  // "baseline" | "han"
  ContextSpec trained_spec;        // empty unless stage == "han"
};

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace docmt

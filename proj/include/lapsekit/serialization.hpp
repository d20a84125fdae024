#pragma once

// JSON forms of configs, parameters and fitted models. Every model document
// carries "format" = "lapsekit-model" and an integer "version".

#include <filesystem>
#include <json.hpp>
#include <string>

#include "lapsekit/evaluation.hpp"

namespace lapsekit {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

void to_json(json& j, const Marginals& m);
void from_json(const json& j, Marginals& m);
void to_json(json& j, const SignalSpec& s);
void from_json(const json& j, SignalSpec& s);
void to_json(json& j, const GeneratorConfig& c);
void from_json(const json& j, GeneratorConfig& c);
void to_json(json& j, const EconomicParams& ep);
void from_json(const json& j, EconomicParams& ep);
void to_json(json& j, const FieldEncoding& f);
void from_json(const json& j, FieldEncoding& f);
void to_json(json& j, const EncodingMap& m);
void from_json(const json& j, EncodingMap& m);
void to_json(json& j, const ConfusionMatrix& cm);
void from_json(const json& j, ConfusionMatrix& cm);

/// Either a preset name ("aggressive" / "moderate") or a full object.
EconomicParams economics_from_json(const json& j);

namespace cart {
void to_json(json& j, const Params& p);
void from_json(const json& j, Params& p);
void to_json(json& j, const Model& m);
void from_json(const json& j, Model& m);
}  // namespace cart

namespace boost {
void to_json(json& j, const Params& p);
void from_json(const json& j, Params& p);
void to_json(json& j, const Model& m);
void from_json(const json& j, Model& m);
}  // namespace boost

namespace svm {
void to_json(json& j, const Params& p);
void from_json(const json& j, Params& p);
void to_json(json& j, const Model& m);
void from_json(const json& j, Model& m);
}  // namespace svm

namespace linear {
void to_json(json& j, const Params& p);
void from_json(const json& j, Params& p);
void to_json(json& j, const Model& m);
void from_json(const json& j, Model& m);
}  // namespace linear

namespace eval {

json spec_to_json(const ModelSpec& spec);
/// family: logit | cart | svm | boost | boost-profit; params may be partial.
ModelSpec spec_from_json(const std::string& family, const json& params);

/// A fitted model together with the encoding needed to score new policies.
struct ModelDocument {
  std::string family;
  AnyModel model;
  EncodingMap encoding;
  std::string target_strategy;  // boost-profit only
};

json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const json& j);

}  // namespace eval

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lapsekit

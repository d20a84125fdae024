#include "lapsekit/serialization.hpp"

#include <fstream>
#include <sstream>

#include "lapsekit/error.hpp"

namespace lapsekit {
namespace {

template <class T>
void opt(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

void opt_date(const json& j, const char* key, Date& field) {
  if (!j.contains(key)) return;
  try {
    field = parse_date(j.at(key).get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void check_format(const json& j, const char* kind) {
  if (j.value("format", "") != "lapsekit-model") throw ConfigError("not a lapsekit model document");
  const int version = j.value("version", 0);
  if (version != kModelFormatVersion) {
    throw ConfigError(std::string(kind) + ": unsupported model version " + std::to_string(version));
  }
}

}  // namespace

void to_json(json& j, const Marginals& m) {
  j = json{{"female", m.female},
           {"occupation_extra_screening", m.occupation_extra_screening},
           {"physical_exam_required", m.physical_exam_required},
           {"single_premium", m.single_premium},
           {"currency_ntd", m.currency_ntd},
           {"participation", m.participation},
           {"product_type", m.product_type},
           {"channel", m.channel},
           {"payment_method", m.payment_method},
           {"age_mean", m.age_mean},
           {"age_sd", m.age_sd},
           {"age_min", m.age_min},
           {"age_max", m.age_max},
           {"nonlife_zero_share", m.nonlife_zero_share},
           {"nonlife_positive_mean", m.nonlife_positive_mean},
           {"nonlife_max", m.nonlife_max},
           {"face_median", m.face_median},
           {"face_mean", m.face_mean},
           {"face_min", m.face_min},
           {"face_max", m.face_max},
           {"window_start", format_date(m.window_start)},
           {"window_end", format_date(m.window_end)},
           {"participation_cutover", format_date(m.participation_cutover)}};
}

void from_json(const json& j, Marginals& m) {
  opt(j, "female", m.female);
  opt(j, "occupation_extra_screening", m.occupation_extra_screening);
  opt(j, "physical_exam_required", m.physical_exam_required);
  opt(j, "single_premium", m.single_premium);
  opt(j, "currency_ntd", m.currency_ntd);
  opt(j, "participation", m.participation);
  opt(j, "product_type", m.product_type);
  opt(j, "channel", m.channel);
  opt(j, "payment_method", m.payment_method);
  opt(j, "age_mean", m.age_mean);
  opt(j, "age_sd", m.age_sd);
  opt(j, "age_min", m.age_min);
  opt(j, "age_max", m.age_max);
  opt(j, "nonlife_zero_share", m.nonlife_zero_share);
  opt(j, "nonlife_positive_mean", m.nonlife_positive_mean);
  opt(j, "nonlife_max", m.nonlife_max);
  opt(j, "face_median", m.face_median);
  opt(j, "face_mean", m.face_mean);
  opt(j, "face_min", m.face_min);
  opt(j, "face_max", m.face_max);
  opt_date(j, "window_start", m.window_start);
  opt_date(j, "window_end", m.window_end);
  opt_date(j, "participation_cutover", m.participation_cutover);
}

void to_json(json& j, const SignalSpec& s) {
  j = json{{"age", s.age},
           {"log_face", s.log_face},
           {"nonlife_count", s.nonlife_count},
           {"female", s.female},
           {"occupation_extra_screening", s.occupation_extra_screening},
           {"physical_exam_required", s.physical_exam_required},
           {"single_premium", s.single_premium},
           {"currency_ntd", s.currency_ntd},
           {"participation", s.participation},
           {"product_type", s.product_type},
           {"channel", s.channel},
           {"payment_method", s.payment_method},
           {"age_squared", s.age_squared},
           {"early_duration", s.early_duration},
           {"large_face_step", s.large_face_step},
           {"insurer_paid_young", s.insurer_paid_young},
           {"bank_channel_investment", s.bank_channel_investment},
           {"mandatory_log_face", s.mandatory_log_face},
           {"no_nonlife_post_office", s.no_nonlife_post_office},
           {"scale", s.scale}};
}

void from_json(const json& j, SignalSpec& s) {
  opt(j, "age", s.age);
  opt(j, "log_face", s.log_face);
  opt(j, "nonlife_count", s.nonlife_count);
  opt(j, "female", s.female);
  opt(j, "occupation_extra_screening", s.occupation_extra_screening);
  opt(j, "physical_exam_required", s.physical_exam_required);
  opt(j, "single_premium", s.single_premium);
  opt(j, "currency_ntd", s.currency_ntd);
  opt(j, "participation", s.participation);
  opt(j, "product_type", s.product_type);
  opt(j, "channel", s.channel);
  opt(j, "payment_method", s.payment_method);
  opt(j, "age_squared", s.age_squared);
  opt(j, "early_duration", s.early_duration);
  opt(j, "large_face_step", s.large_face_step);
  opt(j, "insurer_paid_young", s.insurer_paid_young);
  opt(j, "bank_channel_investment", s.bank_channel_investment);
  opt(j, "mandatory_log_face", s.mandatory_log_face);
  opt(j, "no_nonlife_post_office", s.no_nonlife_post_office);
  opt(j, "scale", s.scale);
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"n_policies", c.n_policies},
           {"seed", c.seed},
           {"base_lapse_rate", c.base_lapse_rate},
           {"marginals", c.marginals},
           {"signal", c.signal}};
}

void from_json(const json& j, GeneratorConfig& c) {
  opt(j, "n_policies", c.n_policies);
  opt(j, "seed", c.seed);
  opt(j, "base_lapse_rate", c.base_lapse_rate);
  opt(j, "marginals", c.marginals);
  opt(j, "signal", c.signal);
}

void to_json(json& j, const EconomicParams& ep) {
  j = json{{"horizon", ep.horizon},         {"profitability", ep.profitability},
           {"discount", ep.discount},       {"contact_cost", ep.contact_cost},
           {"r_lapse", ep.r_lapse},         {"r_stay", ep.r_stay},
           {"incentive", ep.incentive},     {"acceptance", ep.acceptance}};
}

void from_json(const json& j, EconomicParams& ep) {
  opt(j, "horizon", ep.horizon);
  opt(j, "profitability", ep.profitability);
  opt(j, "discount", ep.discount);
  opt(j, "contact_cost", ep.contact_cost);
  opt(j, "r_lapse", ep.r_lapse);
  opt(j, "r_stay", ep.r_stay);
  opt(j, "incentive", ep.incentive);
  opt(j, "acceptance", ep.acceptance);
  if (!j.contains("r_stay")) ep.r_stay.assign(static_cast<std::size_t>(std::max(ep.horizon, 0)) + 1, 1.0);
}

EconomicParams economics_from_json(const json& j) {
  if (j.is_string()) return load_paper_presets(parse_strategy(j.get<std::string>()));
  EconomicParams ep;
  if (j.contains("preset")) ep = load_paper_presets(parse_strategy(j.at("preset").get<std::string>()));
  from_json(j, ep);
  ep.validate();
  return ep;
}

namespace {
const char* kind_name(EncodingKind k) {
  switch (k) {
    case EncodingKind::Standardized: return "standardized";
    case EncodingKind::Binary: return "binary";
    case EncodingKind::OneHot: return "one_hot";
    case EncodingKind::Label: return "label";
  }
  return "?";
}
EncodingKind kind_from(const std::string& s) {
  if (s == "standardized") return EncodingKind::Standardized;
  if (s == "binary") return EncodingKind::Binary;
  if (s == "one_hot") return EncodingKind::OneHot;
  if (s == "label") return EncodingKind::Label;
  throw ConfigError("unknown encoding kind '" + s + "'");
}
}  // namespace

void to_json(json& j, const FieldEncoding& f) {
  j = json{{"field", f.field}, {"kind", kind_name(f.kind)}, {"columns", f.columns}};
  if (f.kind == EncodingKind::Standardized) {
    j["mean"] = f.mean;
    j["scale"] = f.scale;
    j["zero_variance"] = f.zero_variance;
  }
  if (f.kind == EncodingKind::OneHot) j["levels"] = f.levels;
}

void from_json(const json& j, FieldEncoding& f) {
  f.field = j.at("field").get<std::string>();
  f.kind = kind_from(j.at("kind").get<std::string>());
  f.columns = j.at("columns").get<std::vector<std::size_t>>();
  opt(j, "mean", f.mean);
  opt(j, "scale", f.scale);
  opt(j, "zero_variance", f.zero_variance);
  opt(j, "levels", f.levels);
}

void to_json(json& j, const EncodingMap& m) {
  j = json{{"width", m.width}, {"window_start", format_date(m.window_start)}, {"fields", m.fields}};
}

void from_json(const json& j, EncodingMap& m) {
  m.width = j.at("width").get<std::size_t>();
  opt_date(j, "window_start", m.window_start);
  m.fields = j.at("fields").get<std::vector<FieldEncoding>>();
}

void to_json(json& j, const ConfusionMatrix& cm) {
  j = json{{"counts", cm.counts}, {"face", cm.face}};
}

void from_json(const json& j, ConfusionMatrix& cm) {
  j.at("counts").get_to(cm.counts);
  j.at("face").get_to(cm.face);
}

// ---------------------------------------------------------------------------

namespace cart {
void to_json(json& j, const Params& p) {
  j = json{{"min_node_size", p.min_node_size}, {"cv_folds", p.cv_folds}, {"seed", p.seed}};
}
void from_json(const json& j, Params& p) {
  opt(j, "min_node_size", p.min_node_size);
  opt(j, "cv_folds", p.cv_folds);
  opt(j, "seed", p.seed);
}
void to_json(json& j, const Model& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes()) {
    json node{{"predicted_class", n.predicted_class}, {"proportion", n.proportion}, {"n_obs", n.n_obs}};
    if (!n.is_leaf()) {
      node["feature"] = n.feature;
      node["threshold"] = n.threshold;
      node["left"] = n.left;
      node["right"] = n.right;
    }
    nodes.push_back(std::move(node));
  }
  json trace = json::array();
  for (const auto& s : m.pruning_trace()) {
    trace.push_back({{"n_leaves", s.n_leaves}, {"alpha", s.alpha}, {"cv_error", s.cv_error}});
  }
  j = json{{"width", m.width()}, {"n_leaves", m.n_leaves()}, {"nodes", nodes}, {"pruning_trace", trace}};
}
void from_json(const json& j, Model& m) {
  std::vector<Node> nodes;
  for (const auto& jn : j.at("nodes")) {
    Node n;
    n.predicted_class = jn.at("predicted_class").get<int>();
    n.proportion = jn.at("proportion").get<double>();
    n.n_obs = jn.at("n_obs").get<std::size_t>();
    if (jn.contains("feature")) {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    nodes.push_back(n);
  }
  std::vector<PruningStep> trace;
  for (const auto& js : j.value("pruning_trace", json::array())) {
    trace.push_back({js.at("n_leaves").get<std::size_t>(), js.at("alpha").get<double>(),
                     js.at("cv_error").get<double>()});
  }
  m = Model(std::move(nodes), j.at("width").get<std::size_t>(), std::move(trace));
}
}  // namespace cart

namespace boost {
void to_json(json& j, const Params& p) {
  j = json{{"nrounds", p.nrounds},
           {"eta", p.eta},
           {"gamma", p.gamma_reg},
           {"max_depth", p.max_depth},
           {"min_child_weight", p.min_child_weight},
           {"subsample", p.subsample},
           {"colsample_bytree", p.colsample_bytree},
           {"loss", to_string(p.loss)},
           {"seed", p.seed}};
}
void from_json(const json& j, Params& p) {
  opt(j, "nrounds", p.nrounds);
  opt(j, "eta", p.eta);
  opt(j, "gamma", p.gamma_reg);
  opt(j, "max_depth", p.max_depth);
  opt(j, "min_child_weight", p.min_child_weight);
  opt(j, "subsample", p.subsample);
  opt(j, "colsample_bytree", p.colsample_bytree);
  if (j.contains("loss")) p.loss = parse_loss(j.at("loss").get<std::string>());
  opt(j, "seed", p.seed);
}
void to_json(json& j, const Model& m) {
  json trees = json::array();
  for (const auto& t : m.trees()) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"value", n.value}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  j = json{{"f0", m.f0()},
           {"loss", to_string(m.loss())},
           {"width", m.width()},
           {"training_curve", m.training_curve()},
           {"trees", trees}};
}
void from_json(const json& j, Model& m) {
  std::vector<Tree> trees;
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode n;
      if (jn.contains("feature")) {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      } else {
        n.value = jn.at("value").get<double>();
      }
      t.nodes.push_back(n);
    }
    trees.push_back(std::move(t));
  }
  m = Model(j.at("f0").get<double>(), parse_loss(j.at("loss").get<std::string>()),
            j.at("width").get<std::size_t>(), std::move(trees),
            j.value("training_curve", std::vector<double>{}));
}
}  // namespace boost

namespace svm {
void to_json(json& j, const Params& p) {
  j = json{{"cost", p.cost},           {"kernel_gamma", p.kernel_gamma}, {"tolerance", p.tolerance},
           {"max_passes", p.max_passes}, {"seed", p.seed},               {"allow_large", p.allow_large}};
}
void from_json(const json& j, Params& p) {
  opt(j, "cost", p.cost);
  opt(j, "kernel_gamma", p.kernel_gamma);
  opt(j, "tolerance", p.tolerance);
  opt(j, "max_passes", p.max_passes);
  opt(j, "seed", p.seed);
  opt(j, "allow_large", p.allow_large);
}
void to_json(json& j, const Model& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.support_vectors().rows(); ++i) {
    const auto r = m.support_vectors().row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j = json{{"width", m.width()},
           {"kernel_gamma", m.kernel_gamma()},
           {"bias", m.bias()},
           {"converged", m.converged()},
           {"alpha_times_label", m.coefficients()},
           {"support_vectors", rows}};
}
void from_json(const json& j, Model& m) {
  const auto width = j.at("width").get<std::size_t>();
  const auto rows = j.at("support_vectors").get<std::vector<std::vector<double>>>();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != width) throw ConfigError("svm model: support vector width mismatch");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  m = Model(Matrix(rows.size(), width, std::move(flat)), j.at("alpha_times_label").get<std::vector<double>>(),
            j.at("bias").get<double>(), j.at("kernel_gamma").get<double>(), j.value("converged", true));
}
}  // namespace svm

namespace linear {
void to_json(json& j, const Params& p) { j = json{{"max_iter", p.max_iter}, {"grad_tol", p.grad_tol}}; }
void from_json(const json& j, Params& p) {
  opt(j, "max_iter", p.max_iter);
  opt(j, "grad_tol", p.grad_tol);
}
void to_json(json& j, const Model& m) {
  j = json{{"intercept", m.intercept},
           {"coefficients", m.coefficients},
           {"converged", m.converged},
           {"n_iterations", m.n_iterations},
           {"separation_detected", m.separation_detected},
           {"ridge_jitter_used", m.ridge_jitter_used}};
}
void from_json(const json& j, Model& m) {
  m.intercept = j.at("intercept").get<double>();
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  opt(j, "converged", m.converged);
  opt(j, "n_iterations", m.n_iterations);
  opt(j, "separation_detected", m.separation_detected);
  opt(j, "ridge_jitter_used", m.ridge_jitter_used);
}
}  // namespace linear

namespace eval {

json spec_to_json(const ModelSpec& spec) {
  return std::visit([](const auto& p) { return json(p); }, spec);
}

ModelSpec spec_from_json(const std::string& family, const json& params) {
  const json& p = params.is_null() ? json::object() : params;
  if (family == "logit") return p.get<linear::Params>();
  if (family == "cart") return p.get<cart::Params>();
  if (family == "svm") return p.get<svm::Params>();
  if (family == "boost" || family == "boost-profit") {
    boost::Params bp;
    bp.loss = family == "boost" ? boost::Loss::Logistic : boost::Loss::SquaredError;
    from_json(p, bp);
    return bp;
  }
  throw ConfigError("unknown model family '" + family + "' (logit | cart | svm | boost | boost-profit)");
}

json model_to_json(const ModelDocument& doc) {
  json j{{"format", "lapsekit-model"}, {"version", kModelFormatVersion}, {"family", doc.family}};
  std::visit([&](const auto& m) { j["model"] = m; }, doc.model);
  j["encoding"] = doc.encoding;
  if (!doc.target_strategy.empty()) j["target_strategy"] = doc.target_strategy;
  return j;
}

ModelDocument model_from_json(const json& j) {
  check_format(j, "model_from_json");
  ModelDocument doc;
  doc.family = j.at("family").get<std::string>();
  const json& m = j.at("model");
  if (doc.family == "logit") doc.model = m.get<linear::Model>();
  else if (doc.family == "cart") doc.model = m.get<cart::Model>();
  else if (doc.family == "svm") doc.model = m.get<svm::Model>();
  else if (doc.family == "boost" || doc.family == "boost-profit") doc.model = m.get<boost::Model>();
  else throw ConfigError("unknown model family '" + doc.family + "'");
  doc.encoding = j.at("encoding").get<EncodingMap>();
  doc.target_strategy = j.value("target_strategy", "");
  return doc;
}

}  // namespace eval

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

}  // namespace lapsekit

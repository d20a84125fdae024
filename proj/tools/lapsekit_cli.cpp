// lapsekit: gen -> tune -> train -> evaluate -> report.
//
// Every command takes an optional JSON config (--config) whose top level may
// hold "seed", "jobs" and "out", plus one section per command. Flags win over
// the config; LAPSEKIT_OUT wins over --out. Relative paths inside a config are
// resolved against the config file's directory.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lapsekit/error.hpp"
#include "lapsekit/evaluation.hpp"
#include "lapsekit/serialization.hpp"

namespace fs = std::filesystem;
using namespace lapsekit;
using lapsekit::json;
using lapsekit::eval::NamedEconomics;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

const std::vector<std::string> kFamilies = {"logit", "cart", "svm", "boost", "boost-profit"};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::string strategy;
  std::string model;
  std::vector<std::string> inputs;  // report only
};

struct Context {
  json root = json::object();
  json section = json::object();
  fs::path base = ".";
  Flags flags;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  }

  std::uint64_t seed(const char* command) const {
    if (flags.seed) return *flags.seed;
    if (section.contains("seed")) return section.at("seed").get<std::uint64_t>();
    if (root.contains("seed")) return root.at("seed").get<std::uint64_t>();
    throw ConfigError(std::string(command) + " is stochastic and needs a seed (--seed or \"seed\" in the config)");
  }

  std::size_t jobs() const {
    if (flags.jobs) return std::max<std::size_t>(1, *flags.jobs);
    return std::max<std::size_t>(1, root.value("jobs", std::size_t{1}));
  }

  fs::path out_dir() const {
    if (const char* env = std::getenv("LAPSEKIT_OUT"); env && *env) return env;
    if (!flags.out.empty()) return flags.out;
    if (root.contains("out")) return resolve(root.at("out").get<std::string>());
    return ".";
  }

  fs::path input(const char* key) const {
    if (!section.contains(key)) throw ConfigError(std::string("config is missing \"") + key + "\"");
    const auto path = resolve(section.at(key).get<std::string>());
    if (!fs::exists(path)) throw ConfigError("input not found: " + path.string());
    return path;
  }
};

Context load_context(const std::string& command, const Flags& flags) {
  Context ctx;
  ctx.flags = flags;
  if (!flags.config.empty()) {
    const fs::path path(flags.config);
    if (!fs::exists(path)) throw ConfigError("config not found: " + flags.config);
    ctx.root = read_json_file(path);
    if (!ctx.root.is_object()) throw ConfigError("config must be a JSON object");
    ctx.base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    if (ctx.root.contains(command)) ctx.section = ctx.root.at(command);
  }
  return ctx;
}

fs::path prepare_out(const Context& ctx) {
  const auto dir = ctx.out_dir();
  fs::create_directories(dir);
  return dir;
}

void require_family(const std::string& family) {
  if (std::find(kFamilies.begin(), kFamilies.end(), family) == kFamilies.end()) {
    throw ConfigError("unknown model family '" + family + "' (logit | cart | svm | boost | boost-profit)");
  }
}

NamedEconomics named_economics(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    return {name, economics_from_json(j)};
  }
  const auto name = j.contains("name") ? j.at("name").get<std::string>() : j.value("preset", std::string("custom"));
  return {name, economics_from_json(j)};
}

std::vector<NamedEconomics> strategies_of(const Context& ctx) {
  std::vector<NamedEconomics> out;
  if (ctx.section.contains("strategies")) {
    for (const auto& s : ctx.section.at("strategies")) out.push_back(named_economics(s));
  } else {
    out = {named_economics(json("aggressive")), named_economics(json("moderate"))};
  }
  if (out.empty()) throw ConfigError("no economic strategies configured");
  return out;
}

/// The target strategy for boost-profit: --strategy, then "strategy", then aggressive.
NamedEconomics target_strategy(const Context& ctx) {
  if (!ctx.flags.strategy.empty()) return named_economics(json(ctx.flags.strategy));
  if (ctx.section.contains("strategy")) return named_economics(ctx.section.at("strategy"));
  return named_economics(json("aggressive"));
}

/// A params entry is an inline object, a params document, or a path to one.
eval::ModelSpec params_for(const Context& ctx, const std::string& family, const json& entry) {
  json j = entry;
  if (j.is_string()) j = read_json_file(ctx.resolve(j.get<std::string>()));
  if (j.is_object() && j.value("format", "") == "lapsekit-params") {
    const auto stored = j.at("family").get<std::string>();
    if (stored != family) throw ConfigError("params file is for '" + stored + "', not '" + family + "'");
    j = j.at("params");
  }
  return eval::spec_from_json(family, j);
}

eval::ModelSpec configured_params(const Context& ctx, const std::string& family) {
  if (ctx.section.contains("params")) {
    const auto& p = ctx.section.at("params");
    if (p.is_object() && p.contains(family)) return params_for(ctx, family, p.at(family));
    if (ctx.section.contains("model")) return params_for(ctx, family, p);
  }
  return eval::spec_from_json(family, json::object());
}

Dataset load_dataset(const Context& ctx) { return encode(read_csv(ctx.input("data"))); }

json params_document(const std::string& family, const eval::ModelSpec& spec, std::uint64_t seed,
                     const std::string& target) {
  json j{{"format", "lapsekit-params"},
         {"version", 1},
         {"family", family},
         {"seed", seed},
         {"params", eval::spec_to_json(spec)}};
  if (!target.empty()) j["target_strategy"] = target;
  return j;
}

// ---------------------------------------------------------------------------
// grids
// ---------------------------------------------------------------------------

template <class T>
void override_list(const json& j, const char* key, std::vector<T>& v) {
  if (j.contains(key)) v = j.at(key).get<std::vector<T>>();
}

template <class T>
void override_value(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

std::string preset_name(const json& j, const char* fallback) {
  if (j.is_string()) return j.get<std::string>();
  return j.value("preset", std::string(fallback));
}

eval::BoostGrid boost_grid(const json& j) {
  const auto preset = preset_name(j, "paper-9.1");
  if (preset != "paper-9.1") throw ConfigError("unknown boosting grid preset '" + preset + "'");
  auto g = eval::BoostGrid::paper_9_1();
  if (j.is_object()) {
    override_list(j, "eta", g.eta);
    override_list(j, "gamma", g.gamma);
    override_list(j, "max_depth", g.max_depth);
    override_list(j, "min_child_weight", g.min_child_weight);
    override_list(j, "subsample", g.subsample);
    override_list(j, "colsample_bytree", g.colsample_bytree);
    override_value(j, "grid_folds", g.grid_folds);
    override_value(j, "nrounds_folds", g.nrounds_folds);
    override_value(j, "nrounds_max", g.nrounds_max);
  }
  return g;
}

eval::SvmGrid svm_grid(const json& j) {
  const auto preset = preset_name(j, "paper-9.2");
  if (preset != "paper-9.2") throw ConfigError("unknown svm grid preset '" + preset + "'");
  auto g = eval::SvmGrid::paper_9_2();
  if (j.is_object()) {
    override_list(j, "cost", g.cost);
    override_list(j, "kernel_gamma", g.kernel_gamma);
    override_value(j, "folds", g.folds);
    if (j.contains("base")) from_json(j.at("base"), g.base);
  }
  return g;
}

eval::ProfitTuning profit_tuning(const json& j) {
  const auto preset = preset_name(j, "paper-9.3");
  if (preset != "paper-9.3") throw ConfigError("unknown profit tuning preset '" + preset + "'");
  auto t = eval::ProfitTuning::paper_9_3();
  if (j.is_object()) {
    if (j.contains("fixed")) from_json(j.at("fixed"), t.fixed);
    t.fixed.loss = boost::Loss::SquaredError;
    override_value(j, "folds", t.folds);
    override_value(j, "nrounds_max", t.nrounds_max);
  }
  return t;
}

json grid_entry(const Context& ctx, const std::string& family) {
  if (ctx.section.contains("grids") && ctx.section.at("grids").contains(family)) {
    return ctx.section.at("grids").at(family);
  }
  return json::object();
}

std::vector<std::string> families_of(const Context& ctx, std::vector<std::string> fallback) {
  if (!ctx.flags.model.empty()) return {ctx.flags.model};
  if (ctx.section.contains("models")) return ctx.section.at("models").get<std::vector<std::string>>();
  return fallback;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_gen(const Context& ctx) {
  GeneratorConfig cfg;
  if (ctx.section.contains("generator")) from_json(ctx.section.at("generator"), cfg);
  cfg.seed = ctx.seed("gen");
  cfg.validate();
  const auto dir = prepare_out(ctx);
  const auto name = ctx.section.value("output", std::string("portfolio.csv"));
  const auto policies = generate(cfg);
  write_csv(policies, dir / name);
  json resolved = cfg;
  write_text_file(dir / "generator.json", resolved.dump(2) + "\n");
  std::cout << "wrote " << policies.size() << " policies to " << (dir / name).string() << "\n";
  return 0;
}

int cmd_tune(const Context& ctx) {
  const auto seed = ctx.seed("tune");
  const auto families = families_of(ctx, {"boost", "svm", "boost-profit"});
  for (const auto& f : families) {
    require_family(f);
    if (f == "logit" || f == "cart") {
      throw ConfigError("'" + f + "' has nothing to tune; tune covers boost, svm and boost-profit");
    }
  }
  const auto data = load_dataset(ctx);
  const auto dir = prepare_out(ctx);
  const eval::TuneOptions options{seed, ctx.jobs()};
  for (const auto& family : families) {
    std::string target;
    eval::ModelSpec spec;
    if (family == "boost") {
      spec = eval::tune_boost_classification(data, boost_grid(grid_entry(ctx, family)), options);
    } else if (family == "svm") {
      spec = eval::tune_svm(data, svm_grid(grid_entry(ctx, family)), options);
    } else {
      const auto t = target_strategy(ctx);
      target = t.name;
      auto with_targets = data;
      with_targets.targets = profit_targets(data.face_amounts, data.labels, t.params);
      spec = eval::tune_boost_profit(with_targets, profit_tuning(grid_entry(ctx, family)), options);
    }
    const auto path = dir / ("params_" + family + (target.empty() ? "" : "_" + target) + ".json");
    write_text_file(path, params_document(family, spec, seed, target).dump(2) + "\n");
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

int cmd_train(const Context& ctx) {
  const auto seed = ctx.seed("train");
  std::string family = ctx.flags.model.empty() ? ctx.section.value("model", std::string()) : ctx.flags.model;
  if (family.empty()) throw ConfigError("train needs a model family (--model or \"model\")");
  require_family(family);
  const auto spec = configured_params(ctx, family);
  const auto data = load_dataset(ctx);
  const auto dir = prepare_out(ctx);

  eval::ModelDocument doc;
  doc.family = family;
  doc.encoding = data.encoding;
  if (family == "boost-profit") {
    const auto t = target_strategy(ctx);
    doc.target_strategy = t.name;
    auto p = std::get<boost::Params>(spec);
    p.seed = seed;
    const auto z = profit_targets(data.face_amounts, data.labels, t.params);
    doc.model = boost::fit(data.features, z, p);
  } else {
    doc.model = eval::fit_model(spec, data.features, data.labels, seed);
  }
  const auto path =
      dir / ("model_" + family + (doc.target_strategy.empty() ? "" : "_" + doc.target_strategy) + ".json");
  write_text_file(path, eval::model_to_json(doc).dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string column_label(const eval::EvaluationReport& r) {
  return r.target_strategy.empty() ? r.model : r.model + "[" + r.target_strategy + "]";
}

// Mean and standard deviation rows with one column per evaluated model.
void write_summary_tables(const fs::path& dir, const std::vector<eval::EvaluationReport>& reports,
                          const std::vector<NamedEconomics>& strategies) {
  std::string header = "metric";
  for (const auto& r : reports) header += "," + column_label(r);
  std::string acc = header + "\nmean_accuracy";
  for (const auto& r : reports) acc += "," + fixed(r.accuracy.mean, 6);
  acc += "\nsd_accuracy";
  for (const auto& r : reports) acc += "," + fixed(r.accuracy.sd, 6);
  write_text_file(dir / "summary_accuracy.csv", acc + "\n");
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    std::string t = header + "\nmean_retention_gain";
    for (const auto& r : reports) t += "," + fixed(r.retention_gain[s].mean, 2);
    t += "\nsd_retention_gain";
    for (const auto& r : reports) t += "," + fixed(r.retention_gain[s].sd, 2);
    write_text_file(dir / ("summary_retention_gain_" + strategies[s].name + ".csv"), t + "\n");
  }
}

int cmd_evaluate(const Context& ctx) {
  const auto seed = ctx.seed("evaluate");
  const auto families = families_of(ctx, {"logit", "cart", "svm", "boost", "boost-profit"});
  for (const auto& f : families) require_family(f);
  const auto strategies = strategies_of(ctx);
  eval::ProtocolOptions options;
  options.jobs = ctx.jobs();
  options.orientation = eval::parse_orientation(ctx.section.value("orientation", std::string("train-on-one")));
  options.n_folds = ctx.section.value("folds", std::size_t{10});
  std::vector<NamedEconomics> targets;
  if (!ctx.flags.strategy.empty()) {
    targets = {named_economics(json(ctx.flags.strategy))};
  } else if (ctx.section.contains("profit_targets")) {
    for (const auto& s : ctx.section.at("profit_targets")) targets.push_back(named_economics(s));
  } else {
    targets = strategies;
  }

  std::vector<eval::ModelSpec> specs;
  for (const auto& family : families) specs.push_back(configured_params(ctx, family));

  const auto data = load_dataset(ctx);
  const auto dir = prepare_out(ctx);
  std::vector<eval::EvaluationReport> reports;
  for (std::size_t m = 0; m < families.size(); ++m) {
    const auto& family = families[m];
    const auto& spec = specs[m];
    if (family == "boost-profit") {
      for (const auto& t : targets) {
        reports.push_back(
            eval::run_profit_protocol(data, std::get<boost::Params>(spec), t, strategies, seed, options));
      }
    } else {
      reports.push_back(eval::run_protocol(data, spec, strategies, seed, options));
    }
  }
  for (const auto& r : reports) {
    const auto base = eval::report_basename(r);
    write_text_file(dir / (base + ".json"), eval::report_json(r));
    write_text_file(dir / (base + ".csv"), eval::report_csv(r));
    std::cout << base << ": accuracy " << fixed(100 * r.accuracy.mean, 2) << "%";
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      std::cout << ", RG " << strategies[s].name << " " << fixed(r.retention_gain[s].mean, 2);
    }
    std::cout << "\n";
  }
  write_summary_tables(dir, reports, strategies);
  return 0;
}

int cmd_report(const Context& ctx) {
  std::vector<std::string> inputs = ctx.flags.inputs;
  if (inputs.empty() && ctx.section.contains("inputs")) {
    for (const auto& p : ctx.section.at("inputs")) inputs.push_back(ctx.resolve(p.get<std::string>()).string());
  }
  if (inputs.empty()) throw ConfigError("report needs at least one report file");
  struct Row {
    eval::EvaluationReport report;
    std::size_t strategy = 0;
  };
  std::vector<Row> rows;
  for (const auto& path : inputs) {
    if (!fs::exists(path)) throw ConfigError("input not found: " + path);
    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto r = eval::parse_report_json(text);
    if (r.strategies.empty()) throw InputError(path + " holds no economic strategies");
    const std::string wanted = ctx.flags.strategy.empty() ? r.strategies.front() : ctx.flags.strategy;
    const auto it = std::find(r.strategies.begin(), r.strategies.end(), wanted);
    if (it == r.strategies.end()) throw ConfigError(path + " has no strategy '" + wanted + "'");
    const auto index = static_cast<std::size_t>(it - r.strategies.begin());
    rows.push_back({std::move(r), index});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    const double ga = a.report.retention_gain[a.strategy].mean, gb = b.report.retention_gain[b.strategy].mean;
    if (ga != gb) return ga > gb;
    return column_label(a.report) < column_label(b.report);
  });
  std::string out =
      "rank,model,target_strategy,seed,orientation,strategy,mean_retention_gain,sd_retention_gain,"
      "mean_accuracy,sd_accuracy,folds_used\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k].report;
    const auto& g = r.retention_gain[rows[k].strategy];
    out += std::to_string(k + 1) + "," + r.model + "," + r.target_strategy + "," + std::to_string(r.seed) + "," +
           std::string(eval::to_string(r.orientation)) + "," + r.strategies[rows[k].strategy] + "," +
           fixed(g.mean, 2) + "," + fixed(g.sd, 2) + "," + fixed(r.accuracy.mean, 6) + "," +
           fixed(r.accuracy.sd, 6) + "," + std::to_string(r.accuracy.n) + "\n";
  }
  const auto dir = prepare_out(ctx);
  const auto name = ctx.section.value("output", std::string("comparison.csv"));
  write_text_file(dir / name, out);
  std::cout << out;
  return 0;
}

void add_common(CLI::App* cmd, Flags& f, bool stochastic) {
  cmd->add_option("--config", f.config, "JSON config file");
  if (stochastic) cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--jobs", f.jobs, "concurrent folds or grid points (default 1)");
  cmd->add_option("--out", f.out, "output directory (LAPSEKIT_OUT overrides)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lapsekit: lapse prediction and retention-gain experiments"};
  app.require_subcommand(1);
  Flags flags;

  auto* gen = app.add_subcommand("gen", "generate a synthetic portfolio CSV");
  add_common(gen, flags, true);
  auto* tune = app.add_subcommand("tune", "grid-search boosting, SVM and profit boosting parameters");
  add_common(tune, flags, true);
  auto* train = app.add_subcommand("train", "fit one model family and save it");
  add_common(train, flags, true);
  auto* evaluate = app.add_subcommand("evaluate", "run the ten-fold protocol and write reports");
  add_common(evaluate, flags, true);
  auto* report = app.add_subcommand("report", "merge reports into one table ordered by mean retention gain");
  add_common(report, flags, false);
  report->add_option("reports", flags.inputs, "report JSON files");

  for (auto* cmd : {tune, train, evaluate, report}) {
    cmd->add_option("--strategy", flags.strategy, "aggressive | moderate")
        ->check(CLI::IsMember({"aggressive", "moderate"}));
  }
  for (auto* cmd : {tune, train, evaluate}) {
    cmd->add_option("--model", flags.model, "logit | cart | svm | boost | boost-profit")
        ->check(CLI::IsMember(kFamilies));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    const auto ctx = load_context(name, flags);
    if (name == "gen") return cmd_gen(ctx);
    if (name == "tune") return cmd_tune(ctx);
    if (name == "train") return cmd_train(ctx);
    if (name == "evaluate") return cmd_evaluate(ctx);
    return cmd_report(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

// Command-line front end: stats, train, evaluate, compare, gradcheck, synth.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "imba_ids/config.hpp"
#include "imba_ids/data.hpp"
#include "imba_ids/digest.hpp"
#include "imba_ids/metrics.hpp"
#include "imba_ids/model.hpp"
#include "imba_ids/trainer.hpp"

namespace imba_ids::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

inline std::string fixed2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

inline void print_distribution(std::ostream& out, const std::vector<std::string>& names,
                               const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::size_t width = 5;
  for (const auto& n : names) width = std::max(width, n.size());
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(14) << "count"
      << std::setw(11) << "fraction" << '\n';
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double pct = total ? 100.0 * static_cast<double>(counts[k]) / static_cast<double>(total) : 0.0;
    out << std::left << std::setw(static_cast<int>(width)) << names[k] << std::right << std::setw(14) << counts[k]
        << std::setw(10) << fixed2(pct) << "%\n";
  }
  out << std::left << std::setw(static_cast<int>(width)) << "total" << std::right << std::setw(14) << total << '\n';
  out << "imbalance (Omega_imb): " << fixed2(imbalance_measure(counts)) << '\n';
}

inline void print_report(std::ostream& out, const ClassReport& r) {
  std::size_t width = 5;
  for (const auto& n : r.class_names) width = std::max(width, n.size());
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(10) << "support"
      << std::setw(11) << "precision" << std::setw(9) << "recall" << '\n';
  for (std::size_t k = 0; k < r.class_names.size(); ++k) {
    out << std::left << std::setw(static_cast<int>(width)) << r.class_names[k] << std::right << std::setw(10)
        << r.support[k] << std::setw(11) << fixed2(r.precision[k]) << std::setw(9) << fixed2(r.recall[k]) << '\n';
  }
  out << "CBA: " << fixed2(r.cba) << "%\n";
}

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

// Holds --config plus one string per configuration key; values given on the
// command line override the file.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> values = std::vector<std::string>(config_keys().size());

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "INI configuration file");
    for (std::size_t k = 0; k < config_keys().size(); ++k) {
      const auto& key = config_keys()[k];
      app.add_option(key.flag, values[k], key.help);
    }
  }

  RunConfig resolve(const CLI::App& app) const {
    ini::Tree tree = config_path.empty() ? ini::Tree() : ini::load(config_path);
    for (std::size_t k = 0; k < config_keys().size(); ++k) {
      const auto& key = config_keys()[k];
      if (app.count(key.flag) > 0) set_config_value(tree, key.section, key.key, values[k]);
    }
    return run_config_from(tree);
  }
};

struct FileFingerprint {
  std::string path;
  std::size_t rows = 0;
  std::size_t malformed_rows = 0;
  std::string sha256;

  nlohmann::ordered_json to_json() const {
    return {{"path", path}, {"rows", rows}, {"malformed_rows", malformed_rows}, {"sha256", sha256}};
  }
};

// Everything needed to train or evaluate on one schema: encoded, normalized
// train/test sets plus the fitted preprocessing.
struct PreparedData {
  DatasetSchema schema;
  std::string schema_sha256;
  Encoder encoder;
  Normalizer normalizer;
  EncodedDataset train;
  EncodedDataset test;
  FileFingerprint train_file;
  std::optional<FileFingerprint> test_file;
  std::vector<std::string> warnings;
};

inline RawTable load_table(const std::string& path, const DatasetSchema& schema, FileFingerprint& fp) {
  RawTable table = load_csv(path, schema);
  fp.path = path;
  fp.rows = table.rows();
  fp.malformed_rows = table.malformed_rows;
  fp.sha256 = sha256_file(path);
  return table;
}

// The split and the vocabulary are both computed before encoding so that
// test rows never influence the categorical vocabulary or normalization.
inline PreparedData prepare_data(const RunConfig& rc) {
  PreparedData p;
  p.schema = DatasetSchema::load(rc.data.schema);
  p.schema_sha256 = sha256_file(rc.data.schema);
  RawTable train_raw = load_table(rc.data.train, p.schema, p.train_file);
  if (train_raw.rows() == 0) throw DataError(rc.data.train + ": no data rows");
  RawTable test_raw;
  if (!rc.data.test.empty()) {
    p.test_file.emplace();
    test_raw = load_table(rc.data.test, p.schema, *p.test_file);
  } else {
    const LabelVector labels = resolve_labels(train_raw, p.schema);
    Rng rng(derive_seed(rc.train.seed, streams::split));
    auto idx = stratified_split_indices(labels, p.schema.num_classes(), rc.data.split, rng);
    p.warnings = std::move(idx.warnings);
    test_raw = train_raw.select(idx.test);
    train_raw = train_raw.select(idx.train);
  }
  p.encoder = Encoder::fit(train_raw, p.schema);
  EncodedDataset train = p.encoder.encode(train_raw, p.schema);
  p.normalizer = Normalizer::fit(train);
  p.train = p.normalizer.apply(std::move(train));
  p.test = p.normalizer.apply(p.encoder.encode(test_raw, p.schema));
  return p;
}

inline nlohmann::ordered_json data_json(const RunConfig& rc, const PreparedData& p) {
  nlohmann::ordered_json j;
  j["schema"] = {{"path", rc.data.schema}, {"sha256", p.schema_sha256}};
  j["train"] = p.train_file.to_json();
  if (p.test_file) j["test"] = p.test_file->to_json();
  else j["split"] = std::to_string(rc.data.split.train_parts) + ":" + std::to_string(rc.data.split.test_parts);
  j["train_rows_used"] = p.train.rows();
  j["test_rows_used"] = p.test.rows();
  return j;
}

// Run identity: training hyperparameters plus the content of every input.
inline std::string run_id(const RunConfig& rc, const PreparedData& p) {
  Sha256 h;
  h.update(to_ini(rc.train));
  h.update("\nschema=" + p.schema_sha256 + "\ntrain=" + p.train_file.sha256);
  if (p.test_file) h.update("\ntest=" + p.test_file->sha256);
  else h.update("\nsplit=" + std::to_string(rc.data.split.train_parts) + ":" + std::to_string(rc.data.split.test_parts));
  return h.hex().substr(0, 16);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

inline nlohmann::ordered_json preprocessor_json(const Encoder& enc, const Normalizer& norm) {
  nlohmann::ordered_json j;
  j["encoder"] = enc.to_json();
  j["normalizer"] = norm.to_json();
  return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct StatsOptions {
  std::string dataset;
  std::string schema;
  std::string counts;
};

// Reads "class,count" lines; a first line whose count is not a number is a header.
inline std::pair<std::vector<std::string>, std::vector<std::size_t>> read_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open counts file " + path);
  std::vector<std::string> names;
  std::vector<std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (ini::trim(line).empty()) continue;
    auto cells = ini::split_list(line);
    if (cells.size() != 2) throw DataError(path + ":" + std::to_string(line_no) + ": expected class,count");
    auto n = ini::parse_u64(cells[1]);
    if (!n) {
      if (line_no == 1) continue;
      throw DataError(path + ":" + std::to_string(line_no) + ": count '" + cells[1] + "' is not an integer");
    }
    names.push_back(cells[0]);
    counts.push_back(*n);
  }
  return {names, counts};
}

inline int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream&) {
  if (!o.counts.empty()) {
    auto [names, counts] = read_counts(o.counts);
    if (names.empty()) throw DataError(o.counts + ": no classes");
    print_distribution(out, names, counts);
    return kOk;
  }
  if (o.dataset.empty() || o.schema.empty()) throw ConfigError("data.train", "stats needs --dataset and --schema, or --counts");
  const auto schema = DatasetSchema::load(o.schema);
  const auto table = load_csv(o.dataset, schema);
  if (table.rows() == 0) throw DataError(o.dataset + ": no data rows");
  const auto counts = count_classes(resolve_labels(table, schema), schema.num_classes());
  print_distribution(out, schema.classes, counts);
  if (table.malformed_rows) out << "malformed rows skipped: " << table.malformed_rows << '\n';
  return kOk;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require_dataset_keys(rc);
  const PreparedData p = prepare_data(rc);
  for (const auto& w : p.warnings) err << "warning: " << w << '\n';
  const std::string id = run_id(rc, p);
  const fs::path dir = fs::path(rc.data.out) / ("run-" + id);
  fs::create_directories(dir);

  err << "training " << p.train.rows() << " rows x " << p.train.dim() << " features, " << p.train.num_classes()
      << " classes; evaluating on " << p.test.rows() << " rows\n";
  const TrainResult result = train(rc.train, p.train, &p.test);
  const ClassReport report = evaluate(result.model, p.test);

  std::ostringstream history;
  for (std::size_t e = 0; e < result.history.epoch_loss.size(); ++e) {
    nlohmann::ordered_json line;
    line["epoch"] = e + 1;
    line["loss"] = result.history.epoch_loss[e];
    line["test_cba"] = result.history.eval_reports[e].cba;
    history << line.dump() << '\n';
    err << "epoch " << e + 1 << "/" << rc.train.epochs << "  loss " << result.history.epoch_loss[e] << "  test CBA "
        << fixed2(result.history.eval_reports[e].cba) << "%\n";
  }
  nlohmann::ordered_json report_line;
  report_line["run"] = id;
  report_line["split"] = "test";
  report_line.update(report_to_json(report));

  save_checkpoint(result.model, (dir / "model.ckpt").string());
  write_text(dir / "config.ini", to_ini(rc.train));
  write_text(dir / "schema.ini", p.schema.to_ini());
  write_text(dir / "preprocessor.json", preprocessor_json(p.encoder, p.normalizer).dump(2) + "\n");
  write_text(dir / "history.jsonl", history.str());
  write_text(dir / "report.jsonl", report_line.dump() + "\n");

  nlohmann::ordered_json manifest;
  manifest["run"] = id;
  manifest["version"] = kVersion;
  manifest["created"] = utc_timestamp();
  manifest["config"] = to_json(rc.train);
  manifest["data"] = data_json(rc, p);
  manifest["artifacts"] = {{"config", "config.ini"},         {"checkpoint", "model.ckpt"},
                           {"preprocessor", "preprocessor.json"}, {"schema", "schema.ini"},
                           {"history", "history.jsonl"},     {"report", "report.jsonl"}};
  manifest["checkpoint_sha256"] = sha256_file((dir / "model.ckpt").string());
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  print_report(out, report);
  out << "run directory: " << dir.string() << '\n';
  return kOk;
}

struct EvaluateOptions {
  std::string run;
  std::string dataset;
  std::string out;  // optional report.jsonl destination
};

inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream&) {
  const fs::path dir(o.run);
  if (!fs::exists(dir / "model.ckpt")) throw DataError(o.run + ": not a run directory (model.ckpt missing)");
  const auto schema = DatasetSchema::load((dir / "schema.ini").string());
  std::ifstream pre_in(dir / "preprocessor.json");
  if (!pre_in) throw DataError(o.run + ": preprocessor.json missing");
  const auto pre = nlohmann::json::parse(pre_in);
  const auto encoder = Encoder::from_json(pre.at("encoder"));
  const auto normalizer = Normalizer::from_json(pre.at("normalizer"));
  const MlpModel model = load_checkpoint((dir / "model.ckpt").string());
  const auto table = load_csv(o.dataset, schema);
  if (table.rows() == 0) throw DataError(o.dataset + ": no data rows");
  const ClassReport report = evaluate(model, normalizer.apply(encoder.encode(table, schema)));
  print_report(out, report);
  if (!o.out.empty()) {
    nlohmann::ordered_json line;
    line["dataset"] = o.dataset;
    line["sha256"] = sha256_file(o.dataset);
    line.update(report_to_json(report));
    write_text(o.out, line.dump() + "\n");
  }
  return kOk;
}

struct CompareOptions {
  std::string strategies = "ce,as,wce,over,under";
  std::string jsonl;  // machine output; "-" for stdout
};

inline std::vector<Strategy> parse_strategy_list(const std::string& text) {
  std::vector<Strategy> out;
  for (const auto& name : ini::split_list(text)) {
    auto s = parse_strategy(name);
    if (!s) throw ConfigError("--strategies", "unknown strategy '" + name + "' (ce, as, wce, over, under)");
    out.push_back(*s);
  }
  if (out.empty()) throw ConfigError("--strategies", "no strategies given");
  return out;
}

inline void print_comparison(std::ostream& out, const std::vector<StrategyResult>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].report.cba > rows[best].report.cba) best = i;
  const auto& names = rows.front().report.class_names;
  out << std::left << std::setw(8) << "strategy";
  for (const auto& n : names) out << std::right << std::setw(16) << (n + " P/R");
  out << std::setw(9) << "CBA" << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].report;
    out << std::left << std::setw(8) << strategy_name(rows[i].strategy);
    for (std::size_t k = 0; k < names.size(); ++k)
      out << std::right << std::setw(16) << (fixed2(r.precision[k]) + "/" + fixed2(r.recall[k]));
    out << std::setw(9) << fixed2(r.cba) << (i == best ? "  *best" : "") << '\n';
  }
}

inline int cmd_compare(const RunConfig& rc, const CompareOptions& o, std::ostream& out, std::ostream& err) {
  require_dataset_keys(rc);
  const auto strategies = parse_strategy_list(o.strategies);
  const PreparedData p = prepare_data(rc);
  for (const auto& w : p.warnings) err << "warning: " << w << '\n';
  err << "comparing " << strategies.size() << " strategies on " << p.train.rows() << " training rows\n";
  const auto rows = compare_strategies(rc.train, strategies, p.train, p.test);
  print_comparison(out, rows);
  if (!o.jsonl.empty()) {
    std::ostringstream lines;
    const std::string id = run_id(rc, p);
    for (const auto& row : rows) {
      nlohmann::ordered_json line;
      line["run"] = id;
      line["strategy"] = strategy_name(row.strategy);
      line["config"] = to_json(row.config);
      line.update(report_to_json(row.report));
      lines << line.dump() << '\n';
    }
    if (o.jsonl == "-") out << lines.str();
    else write_text(o.jsonl, lines.str());
  }
  return kOk;
}

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 6;
};

template <class Activation = Relu>
int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out, std::ostream&) {
  const auto suite = gradcheck_suite<Activation>(o.seed, o.trials);
  out << std::left << std::setw(28) << "loss" << std::right << std::setw(14) << "max rel err" << "  status\n";
  for (const auto& e : suite.entries) {
    const bool ok = e.worst.max_rel_error < suite.tolerance;
    std::ostringstream err_text;
    err_text << std::scientific << std::setprecision(3) << e.worst.max_rel_error;
    out << std::left << std::setw(28) << e.loss << std::right << std::setw(14) << err_text.str() << "  "
        << (ok ? "ok" : "FAIL") << '\n';
    if (!ok) {
      out << "  worst coordinate: layer " << e.worst.worst_layer << ' ' << (e.worst.worst_is_bias ? "bias" : "weight")
          << " [" << e.worst.worst_index << "] analytic " << e.worst.worst_analytic << " numeric "
          << e.worst.worst_numeric << " (net " << e.worst_architecture << ")\n";
    }
  }
  out << (suite.passed() ? "PASS" : "FAIL") << " (tolerance " << suite.tolerance << ")\n";
  return suite.passed() ? kOk : kFailure;
}

struct SynthOptions {
  std::string preset;
  std::string spec;
  std::string out;
  std::string schema_out;
  std::optional<std::uint64_t> seed;
  double separation = 2.0;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream&) {
  if (o.preset.empty() == o.spec.empty()) throw ConfigError("--preset", "give exactly one of --preset or --spec");
  SynthSpec spec;
  if (!o.spec.empty()) {
    spec = SynthSpec::load(o.spec);
    if (o.seed) spec.seed = *o.seed;
  } else if (o.preset == "long-tail") {
    spec = long_tail_benchmark(o.seed.value_or(0), o.separation);
  } else if (o.preset == "separable") {
    spec = separable_benchmark(o.seed.value_or(0));
  } else {
    throw ConfigError("--preset", "unknown preset '" + o.preset + "' (long-tail, separable)");
  }
  Rng rng(spec.seed);
  const EncodedDataset ds = synth_generate(spec, rng);
  std::ofstream file(o.out, std::ios::binary);
  if (!file) throw DataError("cannot write " + o.out);
  write_csv(ds, file);
  file.close();
  if (!file) throw DataError("write failed for " + o.out);
  if (!o.schema_out.empty()) write_text(o.schema_out, spec.schema().to_ini());
  out << "wrote " << ds.rows() << " rows x " << ds.dim() << " features to " << o.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Imbalanced intrusion-detection training toolkit", "imba_ids"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "class distribution and imbalance measure");
  stats_cmd->add_option("--dataset", stats.dataset, "CSV file");
  stats_cmd->add_option("--schema", stats.schema, "schema INI file");
  stats_cmd->add_option("--counts", stats.counts, "class,count table instead of a dataset");

  ConfigOptions train_cfg;
  auto* train_cmd = app.add_subcommand("train", "train, evaluate and write a run directory");
  train_cfg.attach(*train_cmd);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a trained run on a dataset");
  eval_cmd->add_option("--run", eval.run, "run directory")->required();
  eval_cmd->add_option("--dataset", eval.dataset, "CSV file")->required();
  eval_cmd->add_option("--out", eval.out, "write the report as one JSON line to this file");

  ConfigOptions compare_cfg;
  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "train every strategy on the same split");
  compare_cfg.attach(*compare_cmd);
  compare_cmd->add_option("--strategies", compare.strategies, "comma-separated: ce, as, wce, over, under");
  compare_cmd->add_option("--jsonl", compare.jsonl, "machine-readable rows (\"-\" for stdout)");

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  gc_cmd->add_option("--seed", gc.seed, "seed for the random instances");
  gc_cmd->add_option("--trials", gc.trials, "random nets per loss")->check(CLI::PositiveNumber);

  SynthOptions synth;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic Gaussian-cluster dataset");
  synth_cmd->add_option("--preset", synth.preset, "long-tail | separable");
  synth_cmd->add_option("--spec", synth.spec, "synth spec INI file");
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--separation", synth.separation, "long-tail preset: attack mean offset");
  synth_cmd->add_option("--out", synth.out, "output CSV")->required();
  synth_cmd->add_option("--schema-out", synth.schema_out, "also write a matching schema INI");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*stats_cmd) return cmd_stats(stats, out, err);
    if (*train_cmd) return cmd_train(train_cfg.resolve(*train_cmd), out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out, err);
    if (*compare_cmd) return cmd_compare(compare_cfg.resolve(*compare_cmd), compare, out, err);
    if (*gc_cmd) return cmd_gradcheck(gc, out, err);
    if (*synth_cmd) {
      if (seed_opt->count() > 0) synth.seed = synth_seed;
      return cmd_synth(synth, out, err);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingAborted& e) {
    err << "training aborted at step " << e.step() << " (batch " << e.batch() << "): " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace imba_ids::cli

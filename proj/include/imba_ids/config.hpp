#pragma once

// Training configuration files.
//
//   [model]
//   hidden_layers = 10
//   hidden_width = 100
//   keep_prob = 0.8
//
//   [loss]
//   kind = attack_sharing
//   lambda = 10
//   class_weights =
//
//   [optimizer]
//   kind = adam
//   learning_rate = 1e-4
//   rho1 = 0.9
//   rho2 = 0.999
//   delta = 1e-8
//   reset_each_epoch = false
//
//   [train]
//   batch_size = 128
//   epochs = 10
//   seed = 0
//   resample = none
//
//   [data]
//   schema = configs/kdd99.schema.ini
//   train = kddcup.data.csv
//   test = corrected.csv
//   split = 5:1
//   out = runs
//
// Every key is optional except data.schema and data.train for commands that
// load a dataset. Each key has a command-line flag of the same name with
// underscores written as dashes (e.g. --learning-rate, --keep-prob).

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imba_ids/data.hpp"
#include "imba_ids/errors.hpp"
#include "imba_ids/ini.hpp"
#include "imba_ids/trainer.hpp"

namespace imba_ids {

struct DataOptions {
  std::string schema;
  std::string train;
  std::string test;  // empty: stratified split of train
  SplitRatio split;
  std::string out = "runs";
};

struct RunConfig {
  TrainConfig train;
  DataOptions data;
};

struct ConfigKey {
  const char* section;
  const char* key;
  const char* flag;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model", "hidden_layers", "--hidden-layers", "number of hidden layers"},
      {"model", "hidden_width", "--hidden-width", "units per hidden layer"},
      {"model", "keep_prob", "--keep-prob", "dropout keep probability"},
      {"loss", "kind", "--loss", "cross_entropy | attack_sharing | weighted_ce"},
      {"loss", "lambda", "--lambda", "attack-sharing weight"},
      {"loss", "class_weights", "--class-weights", "comma-separated weights for weighted_ce"},
      {"optimizer", "kind", "--optimizer", "adam | sgd"},
      {"optimizer", "learning_rate", "--learning-rate", "step size"},
      {"optimizer", "rho1", "--rho1", "first-moment decay"},
      {"optimizer", "rho2", "--rho2", "second-moment decay"},
      {"optimizer", "delta", "--delta", "stabilizer added to the root second moment"},
      {"optimizer", "reset_each_epoch", "--reset-each-epoch", "zero the moment accumulators every epoch"},
      {"train", "batch_size", "--batch-size", "minibatch size"},
      {"train", "epochs", "--epochs", "number of epochs"},
      {"train", "seed", "--seed", "run seed"},
      {"train", "resample", "--resample", "none | over | under"},
      {"data", "schema", "--schema", "dataset schema file"},
      {"data", "train", "--dataset", "training CSV"},
      {"data", "test", "--test", "test CSV (default: stratified split of the training CSV)"},
      {"data", "split", "--split", "train:test ratio used when no test CSV is given"},
      {"data", "out", "--out", "output directory"},
  };
  return keys;
}

namespace detail {

inline std::string full_key(const ConfigKey& k) { return std::string(k.section) + "." + k.key; }

inline std::uint64_t get_u64(const std::string& key, const std::string& v) {
  auto n = ini::parse_u64(v);
  if (!n) throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return *n;
}

inline double get_double(const std::string& key, const std::string& v) {
  auto d = ini::parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(key, "expected a number, got '" + v + "'");
  return *d;
}

}  // namespace detail

/// Sets "section.key" on the tree, e.g. from a command-line override.
inline void set_config_value(ini::Tree& tree, const std::string& section, const std::string& key,
                             const std::string& value) {
  // Unit separator as path delimiter: section and key names may contain dots.
  tree.put(ini::Tree::path_type(section + '\x1f' + key, '\x1f'), value);
}

inline SplitRatio parse_split(const std::string& key, const std::string& text) {
  auto parts = ini::split_list(text, ':');
  if (parts.size() != 2) throw ConfigError(key, "expected TRAIN:TEST, got '" + text + "'");
  SplitRatio r{detail::get_u64(key, parts[0]), detail::get_u64(key, parts[1])};
  if (r.train_parts == 0 || r.test_parts == 0) throw ConfigError(key, "ratio parts must be >= 1");
  return r;
}

/// Reads a RunConfig from the tree. Unknown sections and keys are rejected
/// so that typos do not silently fall back to defaults.
inline RunConfig run_config_from(const ini::Tree& tree) {
  std::map<std::string, const ConfigKey*> known;
  for (const auto& k : config_keys()) known[detail::full_key(k)] = &k;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside of any section");
    for (const auto& [key, value] : body) {
      if (!known.count(section + "." + key)) throw ConfigError(section + "." + key, "unknown configuration key");
    }
  }

  RunConfig rc;
  TrainConfig& c = rc.train;
  auto get = [&](const char* section, const char* key) { return ini::find(tree, section, key); };
  if (auto v = get("model", "hidden_layers")) c.hidden_layers = detail::get_u64("model.hidden_layers", *v);
  if (auto v = get("model", "hidden_width")) c.hidden_width = detail::get_u64("model.hidden_width", *v);
  if (auto v = get("model", "keep_prob")) c.keep_prob = detail::get_double("model.keep_prob", *v);
  if (auto v = get("loss", "kind")) {
    auto k = parse_loss_kind(*v);
    if (!k) throw ConfigError("loss.kind", "unknown loss '" + *v + "'");
    c.loss = *k;
  }
  if (auto v = get("loss", "lambda")) c.lambda = detail::get_double("loss.lambda", *v);
  if (auto v = get("loss", "class_weights")) c.class_weights = ini::parse_double_list(*v, "loss.class_weights");
  if (auto v = get("optimizer", "kind")) {
    auto k = parse_optimizer_kind(*v);
    if (!k) throw ConfigError("optimizer.kind", "unknown optimizer '" + *v + "'");
    c.optimizer = *k;
  }
  if (auto v = get("optimizer", "learning_rate")) c.learning_rate = detail::get_double("optimizer.learning_rate", *v);
  if (auto v = get("optimizer", "rho1")) c.rho1 = detail::get_double("optimizer.rho1", *v);
  if (auto v = get("optimizer", "rho2")) c.rho2 = detail::get_double("optimizer.rho2", *v);
  if (auto v = get("optimizer", "delta")) c.delta = detail::get_double("optimizer.delta", *v);
  if (auto v = get("optimizer", "reset_each_epoch")) {
    auto b = ini::parse_bool(*v);
    if (!b) throw ConfigError("optimizer.reset_each_epoch", "expected true or false");
    c.reset_optimizer_each_epoch = *b;
  }
  if (auto v = get("train", "batch_size")) c.batch_size = detail::get_u64("train.batch_size", *v);
  if (auto v = get("train", "epochs")) c.epochs = detail::get_u64("train.epochs", *v);
  if (auto v = get("train", "seed")) c.seed = detail::get_u64("train.seed", *v);
  if (auto v = get("train", "resample")) {
    auto r = parse_resampling(*v);
    if (!r) throw ConfigError("train.resample", "unknown resampling '" + *v + "'");
    c.resample = *r;
  }
  if (auto v = get("data", "schema")) rc.data.schema = *v;
  if (auto v = get("data", "train")) rc.data.train = *v;
  if (auto v = get("data", "test")) rc.data.test = *v;
  if (auto v = get("data", "split")) rc.data.split = parse_split("data.split", *v);
  if (auto v = get("data", "out")) rc.data.out = *v;
  c.validate();
  return rc;
}

inline void require_dataset_keys(const RunConfig& rc) {
  if (rc.data.schema.empty()) throw ConfigError("data.schema", "missing required key (or --schema)");
  if (rc.data.train.empty()) throw ConfigError("data.train", "missing required key (or --dataset)");
}

namespace detail {
inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}
}  // namespace detail

// Canonical INI text of the training hyperparameters (no data paths).
inline std::string to_ini(const TrainConfig& c) {
  std::ostringstream out;
  out << "[model]\nhidden_layers = " << c.hidden_layers << "\nhidden_width = " << c.hidden_width
      << "\nkeep_prob = " << format_double(c.keep_prob) << "\n\n[loss]\nkind = " << to_string(c.loss)
      << "\nlambda = " << format_double(c.lambda) << "\nclass_weights = " << detail::join_doubles(c.class_weights)
      << "\n\n[optimizer]\nkind = " << to_string(c.optimizer) << "\nlearning_rate = " << format_double(c.learning_rate)
      << "\nrho1 = " << format_double(c.rho1) << "\nrho2 = " << format_double(c.rho2)
      << "\ndelta = " << format_double(c.delta) << "\nreset_each_epoch = " << (c.reset_optimizer_each_epoch ? "true" : "false")
      << "\n\n[train]\nbatch_size = " << c.batch_size << "\nepochs = " << c.epochs << "\nseed = " << c.seed
      << "\nresample = " << to_string(c.resample) << "\n";
  return out.str();
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = {{"hidden_layers", c.hidden_layers}, {"hidden_width", c.hidden_width}, {"keep_prob", c.keep_prob}};
  j["loss"] = {{"kind", to_string(c.loss)}, {"lambda", c.lambda}, {"class_weights", c.class_weights}};
  j["optimizer"] = {{"kind", to_string(c.optimizer)}, {"learning_rate", c.learning_rate}, {"rho1", c.rho1},
                    {"rho2", c.rho2}, {"delta", c.delta}, {"reset_each_epoch", c.reset_optimizer_each_epoch}};
  j["train"] = {{"batch_size", c.batch_size}, {"epochs", c.epochs}, {"seed", c.seed},
                {"resample", to_string(c.resample)}};
  return j;
}

}  // namespace imba_ids

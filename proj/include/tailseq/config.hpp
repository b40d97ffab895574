#pragma once

#include <set>
#include <string>

#include "json.hpp"
#include "tailseq/evaluate.hpp"
#include "tailseq/synthetic.hpp"
#include "tailseq/trainer.hpp"

namespace tailseq {

constexpr int kConfigSchemaVersion = 1;

/// Union of every section a run can need. Parsing rejects unknown keys and
/// validates each section before any work starts.
struct RunConfig {
  std::string data_in;  // optional raw-data path recorded by prepare
  EncoderConfig encoder;
  TrainConfig train;
  EvalConfig eval;
  SyntheticConfig synth;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::ordered_json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (allowed.find(it.key()) == allowed.end())
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read_field(const nlohmann::ordered_json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::ordered_json& j) {
  detail::reject_unknown_keys(j, {"schema_version", "data_in", "encoder", "train", "eval", "synth"}, "top level");
  if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
  if (j.at("schema_version").get<int>() != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema_version");

  RunConfig cfg;
  detail::read_field(j, "data_in", cfg.data_in);

  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    detail::reject_unknown_keys(e, {"d", "max_len", "n_blocks", "n_heads", "dropout_rate"}, "encoder");
    detail::read_field(e, "d", cfg.encoder.d);
    detail::read_field(e, "max_len", cfg.encoder.max_len);
    detail::read_field(e, "n_blocks", cfg.encoder.n_blocks);
    detail::read_field(e, "n_heads", cfg.encoder.n_heads);
    detail::read_field(e, "dropout_rate", cfg.encoder.dropout_rate);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown_keys(
        t,
        {"alpha", "beta", "gamma", "lambda_u", "lambda_i", "e_max", "batch_size", "learning_rate", "pretrain_epochs",
         "seed", "include_reversed", "adam_beta1", "adam_beta2", "adam_eps", "enhance_item_branch_inputs",
         "ctx_cache_cap", "val_negatives", "val_k"},
        "train");
    detail::read_field(t, "alpha", cfg.train.alpha);
    detail::read_field(t, "beta", cfg.train.beta);
    detail::read_field(t, "gamma", cfg.train.gamma);
    detail::read_field(t, "lambda_u", cfg.train.lambda_u);
    detail::read_field(t, "lambda_i", cfg.train.lambda_i);
    detail::read_field(t, "e_max", cfg.train.e_max);
    detail::read_field(t, "batch_size", cfg.train.batch_size);
    detail::read_field(t, "learning_rate", cfg.train.learning_rate);
    detail::read_field(t, "pretrain_epochs", cfg.train.pretrain_epochs);
    detail::read_field(t, "seed", cfg.train.seed);
    detail::read_field(t, "include_reversed", cfg.train.include_reversed);
    detail::read_field(t, "adam_beta1", cfg.train.adam_beta1);
    detail::read_field(t, "adam_beta2", cfg.train.adam_beta2);
    detail::read_field(t, "adam_eps", cfg.train.adam_eps);
    detail::read_field(t, "enhance_item_branch_inputs", cfg.train.enhance_item_branch_inputs);
    detail::read_field(t, "ctx_cache_cap", cfg.train.ctx_cache_cap);
    detail::read_field(t, "val_negatives", cfg.train.val_negatives);
    detail::read_field(t, "val_k", cfg.train.val_k);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown_keys(e, {"k", "n_negatives", "seed", "target"}, "eval");
    detail::read_field(e, "k", cfg.eval.k);
    detail::read_field(e, "n_negatives", cfg.eval.n_negatives);
    detail::read_field(e, "seed", cfg.eval.seed);
    if (e.contains("target")) {
      const std::string t = e.at("target").get<std::string>();
      if (t == "validation")
        cfg.eval.target = EvalConfig::Target::validation;
      else if (t == "test")
        cfg.eval.target = EvalConfig::Target::test;
      else
        throw ConfigError("config: eval.target must be 'validation' or 'test'");
    }
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    detail::reject_unknown_keys(s,
                                {"n_users", "n_items", "zipf_exponent", "user_activity_exponent", "min_seq_len",
                                 "mean_seq_len", "seed"},
                                "synth");
    detail::read_field(s, "n_users", cfg.synth.n_users);
    detail::read_field(s, "n_items", cfg.synth.n_items);
    detail::read_field(s, "zipf_exponent", cfg.synth.zipf_exponent);
    detail::read_field(s, "user_activity_exponent", cfg.synth.user_activity_exponent);
    detail::read_field(s, "min_seq_len", cfg.synth.min_seq_len);
    detail::read_field(s, "mean_seq_len", cfg.synth.mean_seq_len);
    detail::read_field(s, "seed", cfg.synth.seed);
  }

  cfg.encoder.validate();
  cfg.train.validate();
  cfg.eval.validate();
  cfg.synth.validate();
  return cfg;
}

/// Fully defaulted effective config; re-running from this JSON reproduces
/// the run.
inline nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  if (!cfg.data_in.empty()) j["data_in"] = cfg.data_in;
  j["encoder"] = {{"d", cfg.encoder.d},
                  {"max_len", cfg.encoder.max_len},
                  {"n_blocks", cfg.encoder.n_blocks},
                  {"n_heads", cfg.encoder.n_heads},
                  {"dropout_rate", cfg.encoder.dropout_rate}};
  j["train"] = {{"alpha", cfg.train.alpha},
                {"beta", cfg.train.beta},
                {"gamma", cfg.train.gamma},
                {"lambda_u", cfg.train.lambda_u},
                {"lambda_i", cfg.train.lambda_i},
                {"e_max", cfg.train.e_max},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"pretrain_epochs", cfg.train.pretrain_epochs},
                {"seed", cfg.train.seed},
                {"include_reversed", cfg.train.include_reversed},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"enhance_item_branch_inputs", cfg.train.enhance_item_branch_inputs},
                {"ctx_cache_cap", cfg.train.ctx_cache_cap},
                {"val_negatives", cfg.train.val_negatives},
                {"val_k", cfg.train.val_k}};
  j["eval"] = {{"k", cfg.eval.k},
               {"n_negatives", cfg.eval.n_negatives},
               {"seed", cfg.eval.seed},
               {"target", cfg.eval.target == EvalConfig::Target::validation ? "validation" : "test"}};
  j["synth"] = {{"n_users", cfg.synth.n_users},
                {"n_items", cfg.synth.n_items},
                {"zipf_exponent", cfg.synth.zipf_exponent},
                {"user_activity_exponent", cfg.synth.user_activity_exponent},
                {"min_seq_len", cfg.synth.min_seq_len},
                {"mean_seq_len", cfg.synth.mean_seq_len},
                {"seed", cfg.synth.seed}};
  return j;
}

}  // namespace tailseq

/*
 * Copyright 2026 The MHKA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// mhka: command-line driver.
//
// Exit status: 0 on success, 1 when gradcheck fails, 10 + error category
// otherwise (see mhka::ErrorKind; usage errors exit with 23).

#include <omp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "mhka/error.hpp"
#include "mhka/model.hpp"
#include "mhka/trainer.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using mhka::ErrorKind;
using mhka::fail;

int exit_code(ErrorKind kind) { return 10 + static_cast<int>(kind); }

json read_json_file(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(kind, path.string() + ": " + e.what());
  }
}

// Flags shared by the commands. Unset optionals keep the config value.
struct Flags {
  std::optional<std::string> config, data, knowledge, out, checkpoint, mode, grid, antonyms,
      split;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<double> fraction;
  std::vector<double> fractions;
  std::vector<std::string> relations;
  std::optional<std::size_t> k, n;
  std::vector<std::size_t> heads, layers;
  bool protect_relevant = false;
  int jobs = 0;

  // Field overrides, keyed by section then field name.
  std::map<std::string, std::optional<double>> model_num, train_num, synth_num;
  std::optional<std::string> variant;
  bool share_knowledge_embedding = false;
};

const char* const kModelNumeric[] = {
    "d_model", "n_heads", "ctx_layers", "know_layers", "reason_layers", "d_ff",
    "max_positions", "knowledge_max_positions", "dropout", "init_std", "layer_norm_eps"};
const char* const kTrainNumeric[] = {"lr", "batch_size", "epochs"};
const char* const kSynthNumeric[] = {"vocab_size", "rules_per_instance", "fraction_decisive"};

enum Uses : unsigned {
  kData = 1,
  kCheckpoint = 2,
  kTrainCfg = 4,
  kModelCfg = 8,
  kSeeds = 16,
  kFractions = 32,
  kGrid = 64,
  kPerturb = 128,
  kAblate = 256,
  kSplit = 512,
  kSynth = 1024,
};

void add_flags(CLI::App* sub, Flags& f, unsigned uses) {
  sub->add_option("--config", f.config, "JSON config with model/train/synth sections");
  sub->add_option("--out", f.out, "output directory (default mhka-out/<command>)");
  sub->add_option("--seed", f.seed, "run seed (default: $MHKA_SEED, then the config)");
  sub->add_option("--jobs", f.jobs, "worker threads (0 = OpenMP default)");
  if (uses & kData) {
    sub->add_option("--data", f.data, "dataset directory with train/dev/test.jsonl");
    sub->add_option("--knowledge", f.knowledge, "directory of <split>.knowledge.jsonl sidecars");
  }
  if (uses & kCheckpoint) sub->add_option("--checkpoint", f.checkpoint, "model checkpoint");
  if (uses & kSplit) sub->add_option("--split", f.split, "split to read (default test)");
  if (uses & kSeeds) sub->add_option("--seeds", f.seeds, "comma-separated seeds")->delimiter(',');
  if (uses & kFractions) {
    sub->add_option("--fractions", f.fractions, "training-set percentages, e.g. 1,2,5,10,100")
        ->delimiter(',');
  }
  if (uses & kGrid) sub->add_option("--grid", f.grid, "desk, pretrained, or a JSON grid file");
  if (uses & kPerturb) {
    sub->add_option("--mode", f.mode, "comma-separated perturbation modes");
    sub->add_option("--relations", f.relations, "relations for drop_relations")->delimiter(',');
    sub->add_option("--k", f.k, "rules to drop per option for drop_random");
    sub->add_flag("--protect_relevant", f.protect_relevant,
                  "drop_random never drops relevant rules");
    sub->add_option("--antonyms", f.antonyms, "word<TAB>antonym lexicon");
  }
  if (uses & kAblate) {
    sub->add_option("--heads", f.heads, "head counts")->delimiter(',');
    sub->add_option("--layers", f.layers, "layer counts")->delimiter(',');
  }
  if (uses & kTrainCfg) {
    sub->add_option("--fraction", f.fraction, "fraction of the training split in (0, 1]");
    for (const char* name : kTrainNumeric) {
      sub->add_option(std::string("--") + name, f.train_num[name]);
    }
  }
  if (uses & kModelCfg) {
    sub->add_option("--variant", f.variant, "mhka, blind or joint");
    for (const char* name : kModelNumeric) {
      sub->add_option(std::string("--") + name, f.model_num[name]);
    }
    sub->add_flag("--share_knowledge_embedding", f.share_knowledge_embedding);
  }
  if (uses & kSynth) {
    sub->add_option("--n", f.n, "training instances per task (dev and test get half)");
    for (const char* name : kSynthNumeric) {
      sub->add_option(std::string("--") + name, f.synth_num[name]);
    }
  }
}

void set_number(json& section, const std::string& name, double v) {
  if (section.contains(name) && section[name].is_number_unsigned()) {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
      fail(ErrorKind::kConfig, name + " must be a non-negative integer");
    }
    section[name] = static_cast<std::uint64_t>(v);
  } else {
    section[name] = v;
  }
}

json resolve_config(const Flags& f) {
  json cfg = {{"model", mhka::ModelConfig{}.to_json()},
              {"train", mhka::TrainConfig{}.to_json()},
              {"synth", mhka::cli::synth_to_json(mhka::SynthConfig{})}};
  if (f.config) {
    const json file = read_json_file(*f.config, ErrorKind::kConfig);
    if (!file.is_object()) fail(ErrorKind::kConfig, *f.config + " must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!cfg.contains(key)) fail(ErrorKind::kConfig, "unknown config section '" + key + "'");
      if (!value.is_object()) fail(ErrorKind::kConfig, "config section '" + key + "' must be an object");
      for (const auto& [field, v] : value.items()) cfg[key][field] = v;
    }
  }
  for (const auto& [name, v] : f.model_num) {
    if (v) set_number(cfg["model"], name, *v);
  }
  for (const auto& [name, v] : f.train_num) {
    if (v) set_number(cfg["train"], name, *v);
  }
  for (const auto& [name, v] : f.synth_num) {
    if (v) set_number(cfg["synth"], name, *v);
  }
  if (f.variant) cfg["model"]["variant"] = *f.variant;
  if (f.share_knowledge_embedding) cfg["model"]["share_knowledge_embedding"] = true;
  if (f.fraction) cfg["train"]["train_fraction"] = *f.fraction;

  // Round-trip through the typed configs so errors surface before any work.
  cfg["model"] = mhka::ModelConfig::from_json(cfg["model"]).to_json();
  cfg["train"] = mhka::TrainConfig::from_json(cfg["train"]).to_json();
  cfg["synth"] = mhka::cli::synth_to_json(mhka::cli::synth_from_json(cfg["synth"]));
  return cfg;
}

std::uint64_t resolve_seed(const Flags& f, const json& cfg) {
  if (f.seed) return *f.seed;
  if (const char* env = std::getenv("MHKA_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') {
      fail(ErrorKind::kConfig, std::string("MHKA_SEED must be an unsigned integer, got '") +
                                   env + "'");
    }
    return v;
  }
  return cfg["train"]["seed"].get<std::uint64_t>();
}

json resolve_options(const std::string& command, const Flags& f) {
  json opts;
  opts["command"] = command;
  opts["config"] = resolve_config(f);
  const std::uint64_t seed = resolve_seed(f, opts["config"]);
  opts["config"]["train"]["seed"] = seed;
  opts["seed"] = seed;
  opts["config_path"] = f.config ? json(*f.config) : json(nullptr);
  opts["out"] = f.out ? *f.out : "mhka-out/" + command;
  opts["jobs"] = f.jobs;
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) opts[key] = *v;
  };
  put("data", f.data);
  put("knowledge", f.knowledge);
  put("checkpoint", f.checkpoint);
  put("mode", f.mode);
  put("antonyms", f.antonyms);
  put("split", f.split);
  if (f.grid) {
    opts["grid"] = (*f.grid == "desk" || *f.grid == "pretrained")
                       ? json(*f.grid)
                       : read_json_file(*f.grid, ErrorKind::kConfig);
  }
  if (!f.seeds.empty()) opts["seeds"] = f.seeds;
  if (!f.fractions.empty()) opts["fractions"] = f.fractions;
  if (!f.relations.empty()) opts["relations"] = f.relations;
  if (f.k) opts["k"] = *f.k;
  if (f.n) opts["n"] = *f.n;
  if (!f.heads.empty()) opts["heads"] = f.heads;
  if (!f.layers.empty()) opts["layers"] = f.layers;
  if (f.protect_relevant) opts["protect_relevant"] = true;
  return opts;
}

int run_and_record(const json& opts) {
  if (const int jobs = opts.value("jobs", 0); jobs > 0) omp_set_num_threads(jobs);
  const int status = mhka::cli::run_command(opts);
  mhka::cli::write_manifest(opts);
  return status;
}

int replay(const std::string& manifest_path, const std::optional<std::string>& out, int jobs) {
  const json manifest = read_json_file(manifest_path, ErrorKind::kReplay);
  if (!manifest.contains("options") || !manifest.contains("artifacts")) {
    fail(ErrorKind::kReplay, manifest_path + " is not a run manifest");
  }
  json opts = manifest["options"];
  if (out) opts["out"] = *out;
  if (jobs > 0) opts["jobs"] = jobs;
  if (fs::weakly_canonical(opts["out"].get<std::string>()) ==
      fs::weakly_canonical(fs::path(manifest_path).parent_path())) {
    fail(ErrorKind::kUsage, "replay needs an --out different from the recorded run");
  }
  const int status = run_and_record(opts);
  const json fresh = read_json_file(fs::path(opts["out"].get<std::string>()) / "manifest.json",
                                    ErrorKind::kReplay);
  std::size_t same = 0;
  std::vector<std::string> differing;
  for (const auto& [name, digest] : manifest["artifacts"].items()) {
    if (fresh["artifacts"].value(name, std::string()) == digest.get<std::string>()) {
      ++same;
    } else {
      differing.push_back(name);
    }
  }
  for (const auto& [name, _] : fresh["artifacts"].items()) {
    if (!manifest["artifacts"].contains(name)) differing.push_back(name);
  }
  if (!differing.empty()) {
    std::string list;
    for (const auto& d : differing) list += " " + d;
    fail(ErrorKind::kReplay, "artifacts differ from the recorded run:" + list);
  }
  std::cout << "replay: " << same << " artifacts byte-identical\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-head knowledge attention for alpha-NLI and CIP"};
  app.require_subcommand(1);
  Flags f;
  const std::pair<const char*, std::pair<const char*, unsigned>> commands[] = {
      {"train", {"train a model", kData | kTrainCfg | kModelCfg}},
      {"eval", {"evaluate a checkpoint", kData | kCheckpoint | kSplit}},
      {"gridsearch", {"grid search on dev", kData | kTrainCfg | kModelCfg | kGrid}},
      {"lowresource",
       {"accuracy against training-set size", kData | kTrainCfg | kModelCfg | kSeeds | kFractions}},
      {"transfer",
       {"fine-tune a CIP checkpoint on alpha-NLI against training from scratch",
        kData | kCheckpoint | kTrainCfg | kSeeds}},
      {"perturb", {"evaluate under knowledge perturbations", kData | kCheckpoint | kSplit | kPerturb}},
      {"ablate", {"accuracy over head and layer counts", kData | kTrainCfg | kModelCfg | kAblate}},
      {"inspect", {"per-rule attention and similarity report", kData | kCheckpoint | kSplit}},
      {"gradcheck", {"finite-difference check of every gradient", 0}},
      {"synth", {"generate the synthetic suites", kSynth}},
      {"build-cip", {"build a balanced CIP set from story rewrites", kData}},
  };
  for (const auto& [name, info] : commands) {
    add_flags(app.add_subcommand(name, info.first), f, info.second);
  }
  std::string manifest;
  std::optional<std::string> replay_out;
  auto* rep = app.add_subcommand("replay", "rerun a recorded command and compare its reports");
  rep->add_option("manifest", manifest, "manifest.json of the recorded run")->required();
  rep->add_option("--out", replay_out, "output directory for the rerun");
  rep->add_option("--jobs", f.jobs, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_code(ErrorKind::kUsage);
  }

  try {
    if (rep->parsed()) return replay(manifest, replay_out, f.jobs);
    for (const auto& [name, _] : commands) {
      if (app.got_subcommand(name)) return run_and_record(resolve_options(name, f));
    }
  } catch (const mhka::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 99;
  }
  return 0;
}

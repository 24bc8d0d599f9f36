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

#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mhka/analysis.hpp"
#include "mhka/error.hpp"
#include "mhka/gradcheck.hpp"
#include "mhka/parallel.hpp"
#include "mhka/parameters.hpp"
#include "mhka/trainer.hpp"

namespace mhka::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Task { kAlphaNli, kCip };

std::string_view task_name(Task t) { return t == Task::kAlphaNli ? "alpha_nli" : "cip"; }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const json& need(const json& opts, const char* key, const char* flag) {
  if (!opts.contains(key) || opts[key].is_null()) {
    fail(ErrorKind::kUsage,
         opts.at("command").get<std::string>() + " needs --" + std::string(flag));
  }
  return opts[key];
}

fs::path out_dir(const json& opts) { return opts.at("out").get<std::string>(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kFile, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
  std::string text;
  for (const auto& l : lines) text += l.dump() + "\n";
  write_text(path, text);
}

// Identifies a run by everything that shapes its results.
std::string run_id(const json& opts) {
  json key = opts;
  key.erase("out");
  key.erase("jobs");
  return opts.at("command").get<std::string>() + "-" + hex64(fnv1a(key.dump())).substr(0, 12);
}

ModelConfig model_config(const json& opts) {
  return ModelConfig::from_json(opts.at("config").at("model"));
}

TrainConfig train_config(const json& opts) {
  TrainConfig tc = TrainConfig::from_json(opts.at("config").at("train"));
  tc.seed = opts.at("seed").get<std::uint64_t>();
  tc.jobs = opts.value("jobs", 0);
  return tc;
}

std::vector<std::uint64_t> seed_list(const json& opts) {
  if (opts.contains("seeds") && !opts["seeds"].is_null()) {
    return opts["seeds"].get<std::vector<std::uint64_t>>();
  }
  return {opts.at("seed").get<std::uint64_t>()};
}

// --- datasets ---------------------------------------------------------------

struct DataPaths {
  fs::path data;
  fs::path knowledge;
};

DataPaths data_paths(const json& opts) {
  DataPaths p;
  p.data = need(opts, "data", "data").get<std::string>();
  if (!fs::is_directory(p.data)) {
    fail(ErrorKind::kFile, "data directory " + p.data.string() + " does not exist");
  }
  p.knowledge = opts.contains("knowledge") && !opts["knowledge"].is_null()
                    ? fs::path(opts["knowledge"].get<std::string>())
                    : p.data;
  return p;
}

fs::path split_file(const DataPaths& p, const std::string& split) {
  return p.data / (split + ".jsonl");
}

Task detect_task(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::kFile, "cannot open " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, file.string() + ": " + e.what());
    }
    if (j.contains("obs1")) return Task::kAlphaNli;
    if (j.contains("s1")) return Task::kCip;
    fail(ErrorKind::kParse, file.string() + ": records are neither alpha-NLI nor CIP");
  }
  fail(ErrorKind::kData, file.string() + " is empty");
}

template <typename Instance>
std::vector<Instance> parse_task(const fs::path& file) {
  if constexpr (std::is_same_v<Instance, AlphaNliInstance>) {
    return parse_alpha_nli(file);
  } else {
    return parse_cip(file);
  }
}

template <typename Instance>
std::optional<std::vector<Instance>> load_split(const DataPaths& p, const std::string& split,
                                                bool required) {
  const fs::path file = split_file(p, split);
  if (!fs::exists(file)) {
    if (required) fail(ErrorKind::kFile, "missing " + file.string());
    return std::nullopt;
  }
  auto data = parse_task<Instance>(file);
  const fs::path sidecar = p.knowledge / (split + ".knowledge.jsonl");
  if (fs::exists(sidecar)) {
    attach_knowledge(data, sidecar);
  } else {
    std::cerr << "note: no knowledge sidecar " << sidecar.string() << "\n";
  }
  return data;
}

template <typename Instance>
Vocabulary build_vocab(const std::vector<Instance>& data) {
  std::vector<std::string> texts;
  collect_texts(data, texts);
  return Vocabulary::build(texts, 1);
}

std::string eval_split(const json& opts) { return opts.value("split", std::string("test")); }

// The held-out split to report on: test when present, else dev.
template <typename Instance>
std::pair<std::string, std::vector<Instance>> report_split(
    const DataPaths& p, const std::optional<std::vector<Instance>>& dev) {
  if (auto test = load_split<Instance>(p, "test", false)) return {"test", std::move(*test)};
  if (dev) return {"dev", *dev};
  fail(ErrorKind::kFile, "need a dev.jsonl or test.jsonl under " + p.data.string());
}

// --- commands -----------------------------------------------------------------

template <typename Instance>
int cmd_train(const json& opts, Task task) {
  const auto paths = data_paths(opts);
  const auto train_data = *load_split<Instance>(paths, "train", true);
  const auto dev = load_split<Instance>(paths, "dev", false);
  const auto test = load_split<Instance>(paths, "test", false);
  const Vocabulary vocab = build_vocab(train_data);
  ModelConfig mc = model_config(opts);
  mc.vocab_size = vocab.size();
  const TrainConfig tc = train_config(opts);
  const auto used = subsample(train_data, tc.train_fraction, tc.seed);

  MhkaModel<float> model(mc, tc.seed);
  const auto dev_set = dev ? encode_dataset(*dev, vocab, mc) : std::vector<EncodedExample>{};
  Metrics m = train(model, encode_dataset(used, vocab, mc), dev_set, tc);
  if (test) m.test_accuracy = evaluate(model, encode_dataset(*test, vocab, mc), tc.jobs);

  const fs::path out = out_dir(opts);
  save_model(out / "model.ckpt", model, vocab, tc.seed,
             {{"task", task_name(task)}, {"train", tc.to_json()}});
  write_json(out / "training.json", m.to_json());
  const json cfg = {{"model", mc.to_json()}, {"train", tc.to_json()}};
  std::vector<json> records;
  const std::string id = run_id(opts);
  if (dev) records.push_back(metrics_record(id, cfg, tc.seed, "dev", m.best_dev));
  if (m.test_accuracy) {
    records.push_back(metrics_record(id, cfg, tc.seed, "test", *m.test_accuracy));
  }
  write_jsonl(out / "metrics.jsonl", records);
  std::cout << "trained " << used.size() << " instances; best dev " << m.best_dev
            << " at epoch " << m.best_epoch;
  if (m.test_accuracy) std::cout << "; test " << *m.test_accuracy;
  std::cout << "\n";
  return 0;
}

template <typename Instance>
int cmd_eval(const json& opts) {
  const auto paths = data_paths(opts);
  const auto loaded = load_model<float>(need(opts, "checkpoint", "checkpoint").get<std::string>());
  const std::string split = eval_split(opts);
  const auto data = *load_split<Instance>(paths, split, true);
  const auto encoded = encode_dataset(data, loaded.vocab, loaded.model.config());
  const int jobs = opts.value("jobs", 0);

  std::vector<std::vector<double>> logits(encoded.size());
  parallel_for(encoded.size(), jobs,
               [&](std::size_t i) { logits[i] = score(loaded.model, encoded[i]); });
  std::vector<json> preds;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const std::size_t p = classify(logits[i]).index;
    correct += p == encoded[i].gold;
    preds.push_back({{"id", encoded[i].id},
                     {"logits", logits[i]},
                     {"prediction", p},
                     {"gold", encoded[i].gold}});
  }
  if (encoded.empty()) fail(ErrorKind::kData, "cannot evaluate on an empty set");
  const double acc = static_cast<double>(correct) / static_cast<double>(encoded.size());
  const fs::path out = out_dir(opts);
  write_jsonl(out / "predictions.jsonl", preds);
  write_jsonl(out / "metrics.jsonl",
              {metrics_record(run_id(opts), {{"model", loaded.model.config().to_json()}},
                              loaded.seed, split, acc)});
  std::cout << split << " accuracy " << acc << " (" << correct << "/" << encoded.size()
            << ")\n";
  return 0;
}

Grid grid_option(const json& opts) {
  return Grid::from_json(opts.contains("grid") && !opts["grid"].is_null() ? opts["grid"]
                                                                           : json("desk"));
}

template <typename Instance>
int cmd_gridsearch(const json& opts) {
  const auto paths = data_paths(opts);
  const auto train_data = *load_split<Instance>(paths, "train", true);
  const auto dev = *load_split<Instance>(paths, "dev", true);
  const Vocabulary vocab = build_vocab(train_data);
  ModelConfig mc = model_config(opts);
  mc.vocab_size = vocab.size();
  const TrainConfig base = train_config(opts);
  const Grid grid = grid_option(opts);
  const auto used = subsample(train_data, base.train_fraction, base.seed);
  const auto result = grid_search<float>(mc, grid, base, encode_dataset(used, vocab, mc),
                                         encode_dataset(dev, vocab, mc));
  std::vector<json> rows, records;
  const std::string id = run_id(opts);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    rows.push_back({{"cell", i},
                    {"train", r.config.to_json()},
                    {"metrics", r.metrics.to_json()},
                    {"best", i == result.best}});
    records.push_back(metrics_record(id + "-" + std::to_string(i),
                                     {{"model", mc.to_json()}, {"train", r.config.to_json()}},
                                     r.config.seed, "dev", r.metrics.best_dev));
  }
  const fs::path out = out_dir(opts);
  write_jsonl(out / "grid.jsonl", rows);
  write_jsonl(out / "metrics.jsonl", records);
  const auto& best = result.rows[result.best];
  write_json(out / "best.json", {{"cell", result.best},
                                 {"train", best.config.to_json()},
                                 {"dev_accuracy", best.metrics.best_dev}});
  std::cout << "best cell " << result.best << ": " << best.config.to_json().dump()
            << " dev " << best.metrics.best_dev << "\n";
  return 0;
}

template <typename Instance>
int cmd_lowresource(const json& opts) {
  const auto paths = data_paths(opts);
  const auto train_data = *load_split<Instance>(paths, "train", true);
  const auto dev = load_split<Instance>(paths, "dev", false);
  const auto [split, held_out] = report_split<Instance>(paths, dev);
  const Vocabulary vocab = build_vocab(train_data);
  ModelConfig mc = model_config(opts);
  mc.vocab_size = vocab.size();
  const TrainConfig base = train_config(opts);
  const auto dev_set = dev ? encode_dataset(*dev, vocab, mc) : std::vector<EncodedExample>{};
  const auto eval_set = encode_dataset(held_out, vocab, mc);
  const auto percents = need(opts, "fractions", "fractions").get<std::vector<double>>();
  const auto seeds = seed_list(opts);

  std::vector<json> rows, records;
  for (double pct : percents) {
    if (!(pct > 0 && pct <= 100)) {
      fail(ErrorKind::kConfig, "fractions are percentages in (0, 100]");
    }
    TrainConfig tc = base;
    tc.train_fraction = pct / 100.0;
    std::size_t used_n = 0;
    const auto summary = seed_average(
        [&](std::uint64_t seed) {
          tc.seed = seed;
          const auto used = subsample(train_data, tc.train_fraction, seed);
          used_n = used.size();
          MhkaModel<float> model(mc, seed);
          train(model, encode_dataset(used, vocab, mc), dev_set, tc);
          return evaluate(model, eval_set, tc.jobs);
        },
        seeds);
    rows.push_back({{"percent", pct}, {"instances", used_n}, {"summary", summary.to_json()}});
    records.push_back(metrics_record(run_id(opts) + "-" + std::to_string(pct),
                                     {{"model", mc.to_json()}, {"train", tc.to_json()}},
                                     seeds.front(), split, summary.mean, summary.mean,
                                     summary.variance));
    std::cout << pct << "%: mean " << summary.mean << " variance " << summary.variance << "\n";
  }
  const fs::path out = out_dir(opts);
  write_jsonl(out / "lowresource.jsonl", rows);
  write_jsonl(out / "metrics.jsonl", records);
  return 0;
}

int cmd_transfer(const json& opts, Task task) {
  if (task != Task::kAlphaNli) fail(ErrorKind::kData, "transfer fine-tunes on alpha-NLI data");
  const auto paths = data_paths(opts);
  const fs::path ckpt = need(opts, "checkpoint", "checkpoint").get<std::string>();
  const auto train_data = *load_split<AlphaNliInstance>(paths, "train", true);
  const auto dev = *load_split<AlphaNliInstance>(paths, "dev", true);
  const auto [split, held_out] = report_split<AlphaNliInstance>(paths, dev);
  const auto seeds = seed_list(opts);
  TrainConfig base = train_config(opts);

  const auto probe = load_model<float>(ckpt);
  const ModelConfig mc = probe.model.config();
  const auto dev_set = encode_dataset(dev, probe.vocab, mc);
  const auto eval_set = encode_dataset(held_out, probe.vocab, mc);

  std::vector<json> rows;
  std::vector<double> pre_acc, scratch_acc;
  for (std::uint64_t seed : seeds) {
    TrainConfig tc = base;
    tc.seed = seed;
    const auto used = subsample(train_data, tc.train_fraction, seed);
    const auto t = transfer<float>(ckpt, used, dev, tc);
    const double a = evaluate(t.model, eval_set, tc.jobs);
    MhkaModel<float> scratch(mc, seed);
    train(scratch, encode_dataset(used, probe.vocab, mc), dev_set, tc);
    const double b = evaluate(scratch, eval_set, tc.jobs);
    pre_acc.push_back(a);
    scratch_acc.push_back(b);
    rows.push_back({{"seed", seed},
                    {"instances", used.size()},
                    {"pretrained", a},
                    {"scratch", b},
                    {"pretrained_best_epoch", t.metrics.best_epoch}});
    std::cout << "seed " << seed << ": pretrained " << a << " scratch " << b << "\n";
  }
  auto summarize = [&](const std::vector<double>& v) {
    std::size_t i = 0;
    return seed_average([&](std::uint64_t) { return v[i++]; }, seeds);
  };
  const auto sp = summarize(pre_acc), ss = summarize(scratch_acc);
  const json cfg = {{"model", mc.to_json()}, {"train", base.to_json()}};
  const std::string id = run_id(opts);
  const fs::path out = out_dir(opts);
  write_jsonl(out / "transfer.jsonl", rows);
  write_jsonl(out / "metrics.jsonl",
              {metrics_record(id + "-pretrained", cfg, seeds.front(), split, sp.mean, sp.mean,
                              sp.variance),
               metrics_record(id + "-scratch", cfg, seeds.front(), split, ss.mean, ss.mean,
                              ss.variance)});
  std::cout << "mean pretrained " << sp.mean << " scratch " << ss.mean << "\n";
  return 0;
}

AntonymMap antonym_option(const json& opts, const DataPaths& paths) {
  if (opts.contains("antonyms") && !opts["antonyms"].is_null()) {
    return load_antonyms(opts["antonyms"].get<std::string>());
  }
  const fs::path fallback = paths.data / "antonyms.tsv";
  return fs::exists(fallback) ? load_antonyms(fallback) : AntonymMap{};
}

std::vector<PerturbationSpec> perturbation_specs(const json& opts) {
  std::vector<PerturbationSpec> specs;
  std::stringstream modes(need(opts, "mode", "mode").get<std::string>());
  std::string name;
  while (std::getline(modes, name, ',')) {
    PerturbationSpec s;
    s.mode = parse_perturbation_mode(name);
    s.seed = opts.at("seed").get<std::uint64_t>();
    if (s.mode == PerturbationMode::kDropRelations && opts.contains("relations")) {
      s.relation_set.emplace();
      for (const auto& r : opts["relations"]) {
        s.relation_set->push_back(parse_relation(r.get<std::string>()));
      }
    }
    if (s.mode == PerturbationMode::kDropRandom) {
      if (opts.contains("k")) s.k = opts["k"].get<std::size_t>();
      s.protect_relevant = opts.value("protect_relevant", false);
    }
    s.validate();
    specs.push_back(std::move(s));
  }
  return specs;
}

template <typename Instance>
int cmd_perturb(const json& opts) {
  const auto paths = data_paths(opts);
  const auto loaded = load_model<float>(need(opts, "checkpoint", "checkpoint").get<std::string>());
  const std::string split = eval_split(opts);
  const auto data = *load_split<Instance>(paths, split, true);
  const auto specs = perturbation_specs(opts);
  const auto report = perturbation_experiment(loaded.model, loaded.vocab, data, specs,
                                              antonym_option(opts, paths), opts.value("jobs", 0));
  std::vector<json> rows;
  for (const auto& r : report.rows) {
    rows.push_back({{"spec", r.spec.to_json()},
                    {"split", split},
                    {"baseline", report.baseline},
                    {"accuracy", r.accuracy},
                    {"delta", r.delta}});
    std::cout << perturbation_mode_name(r.spec.mode) << ": " << r.accuracy << " (delta "
              << r.delta << ")\n";
  }
  write_jsonl(out_dir(opts) / "perturb.jsonl", rows);
  return 0;
}

template <typename Instance>
int cmd_ablate(const json& opts) {
  const auto paths = data_paths(opts);
  const auto train_data = *load_split<Instance>(paths, "train", true);
  const auto dev = *load_split<Instance>(paths, "dev", true);
  const Vocabulary vocab = build_vocab(train_data);
  ModelConfig mc = model_config(opts);
  mc.vocab_size = vocab.size();
  const TrainConfig tc = train_config(opts);
  const auto heads = opts.value("heads", std::vector<std::size_t>{1, 2, 4});
  const auto layers = opts.value("layers", std::vector<std::size_t>{1, 2});
  const auto used = subsample(train_data, tc.train_fraction, tc.seed);
  const auto cells = ablate_heads_layers<float>(heads, layers, encode_dataset(used, vocab, mc),
                                                encode_dataset(dev, vocab, mc), mc, tc);
  std::vector<json> rows;
  for (const auto& c : cells) {
    json row = {{"heads", c.heads}, {"layers", c.layers}, {"skipped", c.skipped}};
    if (c.skipped) {
      row["reason"] = c.reason;
      std::cout << c.heads << " heads x " << c.layers << " layers: skipped (" << c.reason
                << ")\n";
    } else {
      row["dev_accuracy"] = c.dev_accuracy;
      std::cout << c.heads << " heads x " << c.layers << " layers: " << c.dev_accuracy << "\n";
    }
    rows.push_back(std::move(row));
  }
  write_jsonl(out_dir(opts) / "ablation.jsonl", rows);
  return 0;
}

template <typename Instance>
int cmd_inspect(const json& opts) {
  const auto paths = data_paths(opts);
  const auto loaded = load_model<float>(need(opts, "checkpoint", "checkpoint").get<std::string>());
  const std::string split = eval_split(opts);
  const auto data = *load_split<Instance>(paths, split, true);
  const int jobs = opts.value("jobs", 0);

  std::vector<std::vector<AttentionReport>> reports(data.size());
  std::vector<bool> correct(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    reports[i] = inspect(loaded.model, loaded.vocab, data[i]);
    const auto ex = encode_example(data[i], loaded.vocab, loaded.model.config());
    correct[i] = classify(score(loaded.model, ex)).index == ex.gold;
  });

  std::vector<json> lines = {
      {{"header",
        {{"split", split},
         {"attention", "final reasoning layer; span sum; mean over heads and queries; "
                       "normalized over rules"},
         {"similarity", "dot product of the refined [CLS] state with the rule's mean-pooled "
                        "knowledge-encoder output"}}}}};
  for (const auto& per_instance : reports) {
    for (const auto& r : per_instance) {
      for (auto& rec : r.records()) lines.push_back(std::move(rec));
    }
  }
  const fs::path out = out_dir(opts);
  write_jsonl(out / "attention.jsonl", lines);

  const fs::path decisive_file = paths.data / (split + ".decisive.jsonl");
  if (fs::exists(decisive_file)) {
    std::map<std::pair<std::string, int>, int> decisive;
    for (const auto& d : read_decisive(decisive_file)) decisive[{d.id, d.option}] = d.rule_index;
    std::size_t n_correct = 0, hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!correct[i]) continue;
      ++n_correct;
      // The option the story is about: the gold hypothesis, or the only one.
      int option = 1;
      if constexpr (std::is_same_v<Instance, AlphaNliInstance>) option = data[i].gold;
      const auto& r = reports[i][static_cast<std::size_t>(option - 1)];
      const auto it = decisive.find({data[i].id, option});
      if (it != decisive.end() && it->second >= 0 &&
          r.rules[r.top_rule()].rule_index == static_cast<std::size_t>(it->second)) {
        ++hits;
      }
    }
    const double rate = n_correct ? static_cast<double>(hits) / static_cast<double>(n_correct)
                                  : 0.0;
    write_json(out / "summary.json", {{"instances", data.size()},
                                      {"correct", n_correct},
                                      {"decisive_top", hits},
                                      {"decisive_top_rate", rate}});
    std::cout << "decisive rule on top in " << hits << " of " << n_correct
              << " correctly predicted instances\n";
  }
  return 0;
}

int cmd_gradcheck(const json& opts) {
  const auto c = tiny_gradcheck_case();
  MhkaModel<double> model(c.config, opts.at("seed").get<std::uint64_t>());
  const auto ex = encode_example(c.instance, c.vocab, c.config);
  const double h = 1e-4, tol = 1e-3;
  const auto r = gradcheck_model(model, ex, h);
  const bool ok = r.passed(tol);
  write_json(out_dir(opts) / "gradcheck.json", {{"max_relative_error", r.max_relative_error},
                                                {"worst_parameter", r.worst_name},
                                                {"worst_index", r.worst_index},
                                                {"analytic", r.worst_analytic},
                                                {"numeric", r.worst_numeric},
                                                {"coordinates", r.coordinates},
                                                {"step", h},
                                                {"tolerance", tol},
                                                {"passed", ok}});
  std::cout << "max relative gradient error " << r.max_relative_error << " over "
            << r.coordinates << " coordinates (worst " << r.worst_name << "[" << r.worst_index
            << "]): " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_synth(const json& opts) {
  SynthConfig base = synth_from_json(opts.at("config").at("synth"));
  const auto n = opts.value("n", std::size_t{1000});
  const auto seed = opts.at("seed").get<std::uint64_t>();
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", n}, {"dev", std::max<std::size_t>(1, n / 2)},
      {"test", std::max<std::size_t>(1, n / 2)}};
  const fs::path out = out_dir(opts);
  fs::create_directories(out / "alpha_nli");
  fs::create_directories(out / "cip");
  for (std::size_t s = 0; s < std::size(splits); ++s) {
    SynthConfig c = base;
    c.n_instances = splits[s].second;
    c.seed = mix_seed(seed, s);
    c.id_prefix = splits[s].first;
    const std::string name = splits[s].first;
    const auto a = synth_alpha_nli(c);
    write_alpha_nli(out / "alpha_nli" / (name + ".jsonl"), a.instances);
    write_knowledge(out / "alpha_nli" / (name + ".knowledge.jsonl"), a.instances);
    write_decisive(out / "alpha_nli" / (name + ".decisive.jsonl"), a);
    const auto b = synth_cip(c);
    write_cip(out / "cip" / (name + ".jsonl"), b.instances);
    write_knowledge(out / "cip" / (name + ".knowledge.jsonl"), b.instances);
    write_decisive(out / "cip" / (name + ".decisive.jsonl"), b);
  }
  write_antonyms(out / "alpha_nli" / "antonyms.tsv", synth_antonyms());
  write_antonyms(out / "cip" / "antonyms.tsv", synth_antonyms());
  std::cout << "wrote " << n << "/" << splits[1].second << "/" << splits[2].second
            << " train/dev/test instances per task under " << out.string() << "\n";
  return 0;
}

int cmd_build_cip(const json& opts) {
  const fs::path file = need(opts, "data", "data").get<std::string>();
  if (!fs::is_regular_file(file)) {
    fail(ErrorKind::kFile, "rewrite file " + file.string() + " does not exist");
  }
  const auto rewrites = parse_rewrites(file);
  const auto cip = build_cip_from_rewrites(rewrites, opts.at("seed").get<std::uint64_t>());
  std::size_t yes = 0;
  for (const auto& x : cip) yes += x.gold_yes;
  const fs::path out = out_dir(opts);
  write_cip(out / "cip.jsonl", cip);
  write_json(out / "summary.json", {{"rewrites", rewrites.size()},
                                    {"instances", cip.size()},
                                    {"yes", yes},
                                    {"no", cip.size() - yes}});
  std::cout << "built " << cip.size() << " CIP instances (" << yes << " yes, "
            << cip.size() - yes << " no) from " << rewrites.size() << " rewrites\n";
  return 0;
}

template <typename Instance>
int dispatch_task(const std::string& command, const json& opts, Task task) {
  if (command == "train") return cmd_train<Instance>(opts, task);
  if (command == "eval") return cmd_eval<Instance>(opts);
  if (command == "gridsearch") return cmd_gridsearch<Instance>(opts);
  if (command == "lowresource") return cmd_lowresource<Instance>(opts);
  if (command == "transfer") return cmd_transfer(opts, task);
  if (command == "perturb") return cmd_perturb<Instance>(opts);
  if (command == "ablate") return cmd_ablate<Instance>(opts);
  if (command == "inspect") return cmd_inspect<Instance>(opts);
  fail(ErrorKind::kUsage, "unknown command '" + command + "'");
}

}  // namespace

SynthConfig synth_from_json(const json& j) {
  static const std::set<std::string> known = {"vocab_size", "rules_per_instance",
                                              "fraction_decisive"};
  SynthConfig c;
  if (!j.is_object()) fail(ErrorKind::kConfig, "synth config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::kConfig, "unknown synth field '" + key + "'");
  }
  try {
    if (j.contains("vocab_size")) c.vocab_size = j["vocab_size"].get<std::size_t>();
    if (j.contains("rules_per_instance")) {
      c.rules_per_instance = j["rules_per_instance"].get<std::size_t>();
    }
    if (j.contains("fraction_decisive")) {
      c.fraction_decisive = j["fraction_decisive"].get<double>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad synth config: ") + e.what());
  }
  c.validate();
  return c;
}

json synth_to_json(const SynthConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"rules_per_instance", c.rules_per_instance},
          {"fraction_decisive", c.fraction_decisive}};
}

int run_command(const json& opts) {
  const std::string command = opts.at("command").get<std::string>();
  fs::create_directories(out_dir(opts));
  if (command == "gradcheck") return cmd_gradcheck(opts);
  if (command == "synth") return cmd_synth(opts);
  if (command == "build-cip") return cmd_build_cip(opts);
  // A transfer run reads alpha-NLI data; every other command follows the data.
  const auto paths = data_paths(opts);
  fs::path probe = split_file(paths, "train");
  for (const char* s : {"train", "dev", "test"}) {
    if (fs::exists(split_file(paths, s))) {
      probe = split_file(paths, s);
      break;
    }
  }
  const Task task = detect_task(probe);
  return task == Task::kAlphaNli ? dispatch_task<AlphaNliInstance>(command, opts, task)
                                 : dispatch_task<CipInstance>(command, opts, task);
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kFile, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return "fnv1a64:" + hex64(fnv1a(ss.str()));
}

json write_manifest(const json& opts) {
  const fs::path out = out_dir(opts);
  json artifacts = json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) artifacts[fs::relative(f, out).generic_string()] = file_digest(f);

  json manifest = {{"command", opts.at("command")},
                   {"config_path", opts.value("config_path", json(nullptr))},
                   {"data", opts.value("data", json(nullptr))},
                   {"knowledge", opts.value("knowledge", json(nullptr))},
                   {"checkpoint", opts.value("checkpoint", json(nullptr))},
                   {"seed", opts.at("seed")},
                   {"seeds", opts.value("seeds", json(nullptr))},
                   {"out", opts.at("out")},
                   {"options", opts},
                   {"artifacts", artifacts}};
  write_json(out / "manifest.json", manifest);
  return manifest;
}

}  // namespace mhka::cli

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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any of them fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhka/analysis.hpp"
#include "mhka/encoding.hpp"
#include "mhka/gradcheck.hpp"
#include "mhka/model.hpp"
#include "mhka/synth.hpp"
#include "mhka/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mhka;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1f s", seconds_since(t0));
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail
            << " (" << timing << ")" << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << std::fixed << v;
  return ss.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "mhka_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, std::string* log = nullptr) {
  const auto out = work_dir() / "cli.log";
  const std::string cmd = "\"" MHKA_CLI "\" " + args + " > \"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (log) *log = slurp(out);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// Shared synthetic setup, trained once and reused by several criteria.
struct Setup {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
  SynthAlphaNli train_suite, dev_suite, test_suite;
  Vocabulary vocab;
};

Setup& setup() {
  static Setup s = [] {
    Setup out;
    const json cfg = json::parse(slurp(fs::path(MHKA_CONFIG_DIR) / "synthetic.json"));
    out.model = ModelConfig::from_json(cfg.at("model"));
    out.train = TrainConfig::from_json(cfg.at("train"));
    out.synth.rules_per_instance = cfg.at("synth").at("rules_per_instance").get<std::size_t>();
    auto make = [&](std::size_t n, std::uint64_t seed, const std::string& prefix) {
      SynthConfig c = out.synth;
      c.n_instances = n;
      c.seed = seed;
      c.id_prefix = prefix;
      return synth_alpha_nli(c);
    };
    out.train_suite = make(1000, 1, "train");
    out.dev_suite = make(200, 4, "dev");
    out.test_suite = make(500, 2, "test");
    std::vector<std::string> texts;
    collect_texts(out.train_suite.instances, texts);
    SynthConfig cip = out.synth;
    cip.n_instances = 1000;
    cip.seed = 5;
    cip.id_prefix = "cip";
    collect_texts(synth_cip(cip).instances, texts);
    out.vocab = Vocabulary::build(texts, 1);
    out.model.vocab_size = out.vocab.size();
    out.train.seed = 3;
    return out;
  }();
  return s;
}

struct Trained {
  ModelVariant variant;
  double accuracy = 0;
  double seconds = 0;
  std::unique_ptr<MhkaModel<float>> model;
};

Trained train_variant(ModelVariant variant) {
  auto& s = setup();
  ModelConfig mc = s.model;
  mc.variant = variant;
  const auto t0 = Clock::now();
  Trained t{variant, 0, 0, std::make_unique<MhkaModel<float>>(mc, s.train.seed)};
  train(*t.model, encode_dataset(s.train_suite.instances, s.vocab, mc),
        encode_dataset(s.dev_suite.instances, s.vocab, mc), s.train);
  t.accuracy = evaluate(*t.model, encode_dataset(s.test_suite.instances, s.vocab, mc));
  t.seconds = seconds_since(t0);
  return t;
}

std::unique_ptr<MhkaModel<float>> mhka_model;

Outcome criterion_gradcheck() {
  const auto t0 = Clock::now();
  auto c = tiny_gradcheck_case();
  MhkaModel<double> model(c.config, 1);
  const auto example = encode_example(c.instance, c.vocab, c.config);
  const auto r = gradcheck_model(model, example, 1e-4);
  const double secs = seconds_since(t0);
  const bool ok = example.options[0].context.size() == 6 && r.passed(1e-3) && secs < 60;
  return {ok, "max relative error " + sci(r.max_relative_error) + " over " +
                  std::to_string(r.coordinates) + " coordinates, worst " + r.worst_name +
                  ", 6-token input " + (example.options[0].context.size() == 6 ? "yes" : "no")};
}

Outcome criterion_forward_invariants() {
  Rng rng(2026);
  double worst_row = 0, worst_causal = 0;
  std::size_t attention_nodes = 0;
  const std::size_t vocab = 40;
  const int passes = 1000;
  for (int pass = 0; pass < passes; ++pass) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    ModelConfig mc;
    mc.n_heads = std::size_t{1} << pick(0, 2);
    mc.d_model = mc.n_heads * 4 * pick(1, 2);
    mc.ctx_layers = pick(1, 2);
    mc.know_layers = pick(1, 2);
    mc.reason_layers = pick(1, 2);
    mc.d_ff = 2 * mc.d_model;
    mc.vocab_size = vocab;
    mc.max_positions = 24;
    mc.knowledge_max_positions = 32;
    mc.init_std = 0.5;
    mc.dropout = 0;
    MhkaModel<double> model(mc, static_cast<std::uint64_t>(pass));

    auto random_ids = [&](std::size_t n) {
      std::vector<int> ids(n);
      for (auto& id : ids) id = static_cast<int>(pick(kReservedCount, vocab - 1));
      return ids;
    };
    EncodedOption opt;
    opt.context.ids = random_ids(pick(1, 20));
    opt.context.ids.insert(opt.context.ids.begin(), kClsId);
    opt.context.ids.push_back(kSepId);
    opt.knowledge.tokens.ids = random_ids(pick(1, 32));

    Graph<double> g;
    g.value(model.option_logit(g, opt));
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const Var v{static_cast<int>(i)};
      if (g.op(v) != OpKind::kAttention) continue;
      ++attention_nodes;
      const auto& w = g.attention_weights(v);
      for (std::size_t r = 0; r < w.rows(); ++r) {
        double sum = 0;
        for (double x : w.row(r)) sum += x;
        worst_row = std::max(worst_row, std::abs(sum - 1.0));
      }
    }

    // Changing knowledge tokens after position t leaves rows < t unchanged.
    const auto& ids = opt.knowledge.tokens.ids;
    const std::size_t t = pick(0, ids.size() - 1);
    auto changed = ids;
    for (std::size_t i = t; i < changed.size(); ++i) changed[i] = static_cast<int>(pick(kReservedCount, vocab - 1));
    Graph<double> g1, g2;
    const auto& a = g1.value(model.encode_knowledge_stack(g1, ids));
    const auto& b = g2.value(model.encode_knowledge_stack(g2, changed));
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) {
        worst_causal = std::max(worst_causal, std::abs(a.row(r)[c] - b.row(r)[c]));
      }
    }
  }
  const bool ok = worst_row <= 1e-6 && worst_causal <= 1e-6 && attention_nodes > 0;
  return {ok, std::to_string(passes) + " passes, " + std::to_string(attention_nodes) +
                  " attention maps, max |row sum - 1| " + sci(worst_row) +
                  ", max causal deviation " + sci(worst_causal)};
}

Outcome criterion_synthetic() {
  const auto t0 = Clock::now();
  Trained blind = train_variant(ModelVariant::kBlind);
  Trained joint = train_variant(ModelVariant::kJoint);
  Trained full = train_variant(ModelVariant::kMhka);
  const double secs = seconds_since(t0);
  mhka_model = std::move(full.model);
  const bool ok = std::abs(blind.accuracy - 0.5) <= 0.04 && joint.accuracy > blind.accuracy &&
                  full.accuracy >= 0.95 && full.accuracy - joint.accuracy >= 0.20 &&
                  secs < 600;
  return {ok, "blind " + fmt(blind.accuracy) + ", joint " + fmt(joint.accuracy) + ", mhka " +
                  fmt(full.accuracy) + "; train+eval " + fmt(secs, 0) + " s"};
}

Outcome criterion_perturbation() {
  if (!mhka_model) return {false, "no trained model"};
  auto& s = setup();
  PerturbationSpec replace;
  replace.mode = PerturbationMode::kReplaceRelevant;
  PerturbationSpec drop;
  drop.mode = PerturbationMode::kDropRandom;
  drop.k = 1;
  drop.protect_relevant = true;
  drop.seed = 7;
  const auto r = perturbation_experiment(*mhka_model, s.vocab, s.test_suite.instances,
                                         {replace, drop}, synth_antonyms());
  const double replace_drop = -r.rows[0].delta, random_drop = -r.rows[1].delta;
  const bool ok = replace_drop >= 0.20 && random_drop <= 0.03;
  return {ok, "baseline " + fmt(r.baseline) + ", replace_relevant drop " + fmt(replace_drop) +
                  ", drop_random(k=1, non-decisive) drop " + fmt(random_drop)};
}

Outcome criterion_transfer() {
  auto& s = setup();
  ModelConfig mc = s.model;
  SynthConfig cc = s.synth;
  cc.n_instances = 1000;
  cc.seed = 5;
  cc.id_prefix = "cip";
  const auto cip = synth_cip(cc).instances;

  TrainConfig pre = s.train;
  pre.epochs = 3;
  pre.seed = 11;
  MhkaModel<float> cip_model(mc, pre.seed);
  train(cip_model, encode_dataset(cip, s.vocab, mc), {}, pre);
  const fs::path ckpt = work_dir() / "cip.ckpt";
  save_model(ckpt, cip_model, s.vocab, pre.seed);

  const auto dev_set = encode_dataset(s.dev_suite.instances, s.vocab, mc);
  const auto test_set = encode_dataset(s.test_suite.instances, s.vocab, mc);
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<double> pre_acc, scratch_acc;
  for (std::uint64_t seed : seeds) {
    TrainConfig tc = s.train;
    tc.seed = seed;
    const auto used = subsample(s.train_suite.instances, 0.05, seed);
    const auto t = transfer<float>(ckpt, used, s.dev_suite.instances, tc, mc);
    pre_acc.push_back(evaluate(t.model, test_set));
    MhkaModel<float> scratch(mc, seed);
    train(scratch, encode_dataset(used, s.vocab, mc), dev_set, tc);
    scratch_acc.push_back(evaluate(scratch, test_set));
  }
  auto mean = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  const double a = mean(pre_acc), b = mean(scratch_acc);
  return {a - b >= 0.05, "5% of alpha-NLI (50 instances), 5 seeds: pretrained " + fmt(a) +
                             ", scratch " + fmt(b) + ", gain " + fmt(a - b)};
}

Outcome criterion_build_cip() {
  const fs::path input = work_dir() / "rewrites.jsonl";
  {
    std::ofstream out(input);
    for (int i = 0; i < 20; ++i) {
      const bool same = i % 5 < 3;  // 12 of 20
      json r = {{"id", "story-" + std::to_string(i)},
                {"s1", "Kim woke up early."},
                {"s2", "She went for a run " + std::to_string(i) + "."},
                {"s3", "She felt great all day."},
                {"s4", "She slept well."},
                {"s5", "The next day she ran again."},
                {"s2_cf", "She stayed in bed " + std::to_string(i) + "."},
                {"s3_cf", same ? "She felt great all day." : "She felt lazy all day."},
                {"s4_cf", "She slept well."},
                {"s5_cf", "The next day she ran again."}};
      out << r.dump() << "\n";
    }
  }
  std::string log;
  const fs::path out = work_dir() / "build_cip";
  const int code = run_cli("build-cip --data " + quoted(input) + " --out " + quoted(out), &log);
  if (code != 0) return {false, "exit " + std::to_string(code) + ": " + log};
  const auto summary = json::parse(slurp(out / "summary.json"));
  std::size_t lines = 0;
  std::ifstream in(out / "cip.jsonl");
  for (std::string line; std::getline(in, line);) lines += !line.empty();
  const bool ok = summary["rewrites"] == 20 && summary["yes"] == 8 && summary["no"] == 8 &&
                  lines == 16;
  return {ok, "20 rewrites (12 match, 8 differ) -> " + summary["yes"].dump() + " yes, " +
                  summary["no"].dump() + " no, " + std::to_string(lines) + " lines"};
}

std::string golden(const std::string& name) {
  std::string s = slurp(fs::path(MHKA_GOLDEN_DIR) / name);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

Outcome criterion_golden() {
  const auto dotty = parse_alpha_nli(fs::path(MHKA_GOLDEN_DIR) / "dotty_alpha_nli.jsonl").at(0);
  const auto bob = parse_cip(fs::path(MHKA_GOLDEN_DIR) / "bob_cip.jsonl").at(0);
  const Vocabulary dv = Vocabulary::build(
      std::vector<std::string>{dotty.o1, dotty.o2, dotty.h1, dotty.h2}, 1);
  const Vocabulary bv =
      Vocabulary::build(std::vector<std::string>{bob.s1, bob.s2, bob.s3, bob.s2_cf}, 1);
  const bool h1 = dv.decode(encode_alpha_nli(dotty, 1, dv).ids) == golden("dotty_alpha_nli_h1.tokens");
  const bool h2 = dv.decode(encode_alpha_nli(dotty, 2, dv).ids) == golden("dotty_alpha_nli_h2.tokens");
  const bool cip = bv.decode(encode_cip(bob, bv).ids) == golden("bob_cip.tokens");
  return {h1 && h2 && cip, std::string("dotty h1 ") + (h1 ? "match" : "MISMATCH") + ", dotty h2 " +
                               (h2 ? "match" : "MISMATCH") + ", bob cip " +
                               (cip ? "match" : "MISMATCH")};
}

Outcome criterion_replay() {
  const fs::path root = work_dir() / "replay";
  const std::string model =
      " --d_model 16 --n_heads 2 --ctx_layers 1 --know_layers 1 --reason_layers 1 --d_ff 32"
      " --max_positions 48 --knowledge_max_positions 96 --epochs 2 --batch_size 4";
  const fs::path data = root / "synth" / "alpha_nli";
  const std::string d = " --data " + quoted(data) + " --knowledge " + quoted(data);
  const fs::path ckpt = root / "train" / "model.ckpt";
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"synth", "synth --n 40 --seed 8 --rules_per_instance 6 --out " + quoted(root / "synth")},
      {"train", "train" + d + model + " --seed 9 --out " + quoted(root / "train")},
      {"eval", "eval" + d + " --checkpoint " + quoted(ckpt) + " --out " + quoted(root / "eval")},
      {"perturb", "perturb" + d + " --checkpoint " + quoted(ckpt) +
                      " --mode replace_relevant,drop_random --k 1 --out " +
                      quoted(root / "perturb")},
      {"inspect", "inspect" + d + " --checkpoint " + quoted(ckpt) + " --out " +
                      quoted(root / "inspect")}};
  std::size_t identical = 0;
  for (const auto& [name, args] : runs) {
    std::string log;
    if (int c = run_cli(args, &log); c != 0) {
      return {false, name + " exited " + std::to_string(c) + ": " + log};
    }
    const fs::path again = root / (name + "_replay");
    if (int c = run_cli("replay " + quoted(root / name / "manifest.json") + " --out " +
                            quoted(again),
                        &log);
        c != 0) {
      return {false, name + " replay exited " + std::to_string(c) + ": " + log};
    }
    const auto manifest = json::parse(slurp(root / name / "manifest.json"));
    for (const auto& [rel, _] : manifest["artifacts"].items()) {
      if (slurp(root / name / rel) != slurp(again / rel)) {
        return {false, name + " artifact " + rel + " differs on replay"};
      }
      ++identical;
    }
  }
  return {identical > 0, std::to_string(runs.size()) + " commands replayed, " +
                             std::to_string(identical) + " reports byte-identical"};
}

Outcome criterion_attention() {
  if (!mhka_model) return {false, "no trained model"};
  auto& s = setup();
  std::size_t correct = 0, top = 0;
  const auto& test = s.test_suite;
  for (std::size_t i = 0; i < test.instances.size(); ++i) {
    const auto& x = test.instances[i];
    if (forward_alpha_nli(*mhka_model, s.vocab, x).prediction != x.gold) continue;
    ++correct;
    const auto reports = inspect(*mhka_model, s.vocab, x);
    const auto& gold = reports[static_cast<std::size_t>(x.gold - 1)];
    const int decisive = test.decisive[i][static_cast<std::size_t>(x.gold - 1)];
    if (decisive >= 0 &&
        gold.rules[gold.top_rule()].rule_index == static_cast<std::size_t>(decisive)) {
      ++top;
    }
  }
  const double share = correct ? static_cast<double>(top) / static_cast<double>(correct) : 0;
  return {correct > 0 && share >= 0.70,
          "decisive rule on top in " + std::to_string(top) + " of " + std::to_string(correct) +
              " correct predictions (" + fmt(100 * share, 1) + "%)"};
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);
  report(1, "gradcheck", criterion_gradcheck);
  report(2, "forward invariants", criterion_forward_invariants);
  report(3, "synthetic suite", criterion_synthetic);
  report(4, "knowledge perturbation", criterion_perturbation);
  report(5, "CIP transfer", criterion_transfer);
  report(6, "build-cip balance", criterion_build_cip);
  report(7, "golden encodings", criterion_golden);
  report(8, "manifest replay", criterion_replay);
  report(9, "decisive attention", criterion_attention);
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failed" : "acceptance: all passed")
            << std::endl;
  return failures ? 1 : 0;
}

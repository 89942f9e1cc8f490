// SPDX-License-Identifier: Apache-2.0
// End-to-end checks of the command-line tool: every subcommand is run as a
// child process and judged by exit code, file side effects, and (for the
// --machine modes) parseable output.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "sinn/sinn.hpp"
#include "test_util.hpp"

namespace {

// SINN_CLI_BIN is injected as a string literal by the build.
std::string cli_bin() { return std::string(SINN_CLI_BIN); }

const std::filesystem::path kScratch = "cli_scratch";

std::string at(const std::string& name) { return (kScratch / name).string(); }

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(kScratch);
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  std::filesystem::create_directories(kScratch);
  const std::string out_path = at("last_stdout.txt");
  const std::string err_path = at("last_stderr.txt");
  const std::string cmd =
      "\"" + cli_bin() + "\" " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return CliResult{WEXITSTATUS(status), slurp(out_path), slurp(err_path)};
}

// Writes the two-layer scene graph used throughout and returns its path.
std::string scenes_graph_file() {
  const std::string path = at("scenes.graph");
  write_file(path, sinn::serialize_graph(testutil::scenes_graph()));
  return path;
}

}  // namespace

TEST_CASE("cli help exits zero and lists subcommands", "[cli]") {
  const CliResult r = run_cli("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"synth", "train", "eval", "predict"})
    CHECK_THAT(r.out, Catch::Matchers::ContainsSubstring(sub));
}

TEST_CASE("cli usage errors exit one", "[cli]") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("train --data x --ckpt y").code == 1);  // missing --graph
  const std::string g = scenes_graph_file();
  CHECK(run_cli("train --graph " + g + " --data x --ckpt y --variant banana").code == 1);
}

TEST_CASE("cli synth is deterministic and loadable", "[cli]") {
  const std::string g = scenes_graph_file();
  const std::string base = " --graph " + g + " --per-class 10 --dim 16 --seed 5";
  CHECK(run_cli("synth" + base + " --out " + at("a.jsonl")).code == 0);
  CHECK(run_cli("synth" + base + " --out " + at("b.jsonl")).code == 0);
  CHECK(slurp(at("a.jsonl")) == slurp(at("b.jsonl")));
  CHECK(run_cli("synth --graph " + g + " --per-class 10 --dim 16 --seed 6 --out " +
                at("c.jsonl"))
            .code == 0);
  CHECK(slurp(at("a.jsonl")) != slurp(at("c.jsonl")));

  const sinn::Dataset ds = sinn::load_dataset(at("a.jsonl"), testutil::scenes_graph());
  CHECK(ds.samples.size() == 40);
  CHECK(ds.feature_dim == 16);
}

TEST_CASE("cli train writes deterministic loadable checkpoints", "[cli]") {
  const std::string g = scenes_graph_file();
  REQUIRE(run_cli("synth --graph " + g + " --per-class 10 --dim 16 --seed 5 --out " +
                  at("train.jsonl"))
              .code == 0);
  const std::string base = " --graph " + g + " --data " + at("train.jsonl") +
                           " --variant logistic --epochs 2 --seed 3";
  REQUIRE(run_cli("train" + base + " --ckpt " + at("m1.ckpt")).code == 0);
  REQUIRE(run_cli("train" + base + " --ckpt " + at("m2.ckpt")).code == 0);
  CHECK(slurp(at("m1.ckpt")) == slurp(at("m2.ckpt")));

  const sinn::LabelGraph graph = testutil::scenes_graph();
  const sinn::ModelParams p = sinn::load_checkpoint_file(at("m1.ckpt"));
  CHECK(p.variant == sinn::Variant::logistic);
  CHECK(p.feature_dim == 16);
  CHECK(p.graph_hash == sinn::graph_hash(graph));
  CHECK(p.layer_sizes == graph.layer_sizes());

  // A structured variant keeps its masked entries at zero through training.
  REQUIRE(run_cli("train --graph " + g + " --data " + at("train.jsonl") +
                  " --variant sinn --epochs 1 --seed 3 --ckpt " + at("s.ckpt"))
              .code == 0);
  const sinn::ModelParams sp = sinn::load_checkpoint_file(at("s.ckpt"));
  CHECK(sp.variant == sinn::Variant::sinn);
  CHECK_NOTHROW(sinn::check_masked_zero(sp, sinn::compile_masks(graph)));

  // A machine-mode run logs one JSON record per epoch.
  const CliResult log = run_cli("train" + base + " --machine --ckpt " + at("m3.ckpt"));
  REQUIRE(log.code == 0);
  std::istringstream lines(log.out);
  std::string line;
  int epochs = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    CHECK(rec.at("epoch").get<int>() == ++epochs);
    CHECK(std::isfinite(rec.at("mean_loss").get<double>()));
    CHECK(rec.at("lr").get<double>() > 0.0);
  }
  CHECK(epochs == 2);
}

TEST_CASE("cli eval machine output round-trips through the record format", "[cli]") {
  const std::string g = scenes_graph_file();
  REQUIRE(run_cli("synth --graph " + g + " --per-class 10 --dim 16 --seed 5 --out " +
                  at("eval.jsonl"))
              .code == 0);
  REQUIRE(run_cli("train --graph " + g + " --data " + at("eval.jsonl") +
                  " --variant logistic --epochs 2 --seed 3 --ckpt " + at("e.ckpt"))
              .code == 0);
  const std::string base = " --graph " + g + " --data " + at("eval.jsonl") + " --ckpt " +
                           at("e.ckpt");

  const CliResult whole = run_cli("eval" + base + " --machine");
  REQUIRE(whole.code == 0);
  const sinn::EvalResult r = sinn::EvalResult::from_record(whole.out);
  CHECK(r.to_record() == whole.out);
  REQUIRE(r.layers.size() == 2);
  for (double v : {r.map_l, r.map_i, r.iou, r.prec_l, r.rec_l, r.prec_i, r.rec_i}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(r.layers[0].mc.has_value());  // both layers are exclusive here

  const CliResult splits = run_cli("eval" + base + " --splits 2 --train-frac 0.5 --machine");
  REQUIRE(splits.code == 0);
  CHECK_NOTHROW(sinn::EvalResult::from_record(splits.out));

  const CliResult human = run_cli("eval" + base + " --splits 2 --train-frac 0.5");
  CHECK(human.code == 0);
  CHECK_THAT(human.out, Catch::Matchers::ContainsSubstring("mean over 2 splits"));

  const CliResult observed = run_cli("eval" + base + " --observe scene --observe-mode true_logit");
  CHECK(observed.code == 0);
}

TEST_CASE("cli predict machine output ranks every layer", "[cli]") {
  const std::string g = scenes_graph_file();
  REQUIRE(run_cli("synth --graph " + g + " --per-class 3 --dim 16 --seed 5 --out " +
                  at("pred.jsonl"))
              .code == 0);
  REQUIRE(run_cli("train --graph " + g + " --data " + at("pred.jsonl") +
                  " --variant sinn --epochs 1 --seed 3 --ckpt " + at("p.ckpt"))
              .code == 0);

  const CliResult r = run_cli("predict --graph " + g + " --data " + at("pred.jsonl") +
                              " --ckpt " + at("p.ckpt") + " --machine");
  REQUIRE(r.code == 0);

  const sinn::LabelGraph graph = testutil::scenes_graph();
  std::istringstream lines(r.out);
  std::string line;
  int records = 0;
  while (std::getline(lines, line)) {
    ++records;
    const nlohmann::json rec = nlohmann::json::parse(line);
    CHECK(rec.contains("id"));
    CHECK_FALSE(rec.contains("observed"));
    for (int t = 0; t < graph.num_layers(); ++t) {
      const auto& ranked = rec.at("layers").at(graph.layers[t].name);
      REQUIRE(static_cast<int>(ranked.size()) == graph.layer_size(t));
      double prev = 1.0;
      for (const auto& item : ranked) {
        const double prob = item.at("prob").get<double>();
        CHECK(prob >= 0.0);
        CHECK(prob <= prev);  // descending ranking
        prev = prob;
        CHECK(graph.label_index(t, item.at("label").get<std::string>()) >= 0);
      }
    }
  }
  CHECK(records == 12);
}

TEST_CASE("cli predict honors observation files", "[cli]") {
  const std::string g = scenes_graph_file();
  REQUIRE(run_cli("synth --graph " + g + " --per-class 3 --dim 16 --seed 5 --out " +
                  at("obs.jsonl"))
              .code == 0);
  REQUIRE(run_cli("train --graph " + g + " --data " + at("obs.jsonl") +
                  " --variant sinn --epochs 1 --seed 3 --ckpt " + at("o.ckpt"))
              .code == 0);
  write_file(at("observe.jsonl"),
             R"({"id": "office_0", "layer": "scene", "positive": ["indoor"]})"
             "\n");

  const std::string base = "predict --graph " + g + " --data " + at("obs.jsonl") + " --ckpt " +
                           at("o.ckpt");
  const CliResult r = run_cli(base + " --observe " + at("observe.jsonl") + " --machine");
  REQUIRE(r.code == 0);

  bool found = false;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    if (rec.at("id").get<std::string>() != "office_0") {
      CHECK_FALSE(rec.contains("observed"));
      continue;
    }
    found = true;
    CHECK(rec.at("observed").get<std::string>() == "scene");
    const auto& ranked = rec.at("layers").at("scene");
    // The observed positive label is pinned near 1, the other near 1/2.
    CHECK(ranked[0].at("label").get<std::string>() == "indoor");
    CHECK(ranked[0].at("prob").get<double>() > 0.99);
    CHECK(ranked[1].at("prob").get<double>() < 0.6);
  }
  CHECK(found);

  write_file(at("bad_layer.jsonl"), R"({"id": "office_0", "layer": "mood", "positive": []})"
                                    "\n");
  CHECK(run_cli(base + " --observe " + at("bad_layer.jsonl")).code == 2);
  write_file(at("bad_label.jsonl"),
             R"({"id": "office_0", "layer": "scene", "positive": ["castle"]})"
             "\n");
  CHECK(run_cli(base + " --observe " + at("bad_label.jsonl")).code == 2);
  write_file(at("dup.jsonl"), R"({"id": "office_0", "layer": "scene", "positive": []})"
                              "\n"
                              R"({"id": "office_0", "layer": "scene", "positive": []})"
                              "\n");
  CHECK(run_cli(base + " --observe " + at("dup.jsonl")).code == 2);
}

TEST_CASE("cli data and format errors exit two", "[cli]") {
  const std::string g = scenes_graph_file();
  CHECK(run_cli("synth --graph " + at("nope.graph") + " --out " + at("x.jsonl")).code == 2);

  write_file(at("broken.graph"), "layer scene indoor,outdoor\n");  // missing ':'
  CHECK(run_cli("synth --graph " + at("broken.graph") + " --out " + at("x.jsonl")).code == 2);

  REQUIRE(run_cli("synth --graph " + g + " --per-class 3 --dim 8 --seed 1 --out " +
                  at("err.jsonl"))
              .code == 0);
  REQUIRE(run_cli("train --graph " + g + " --data " + at("err.jsonl") +
                  " --variant logistic --epochs 1 --seed 1 --ckpt " + at("err.ckpt"))
              .code == 0);

  const std::string base = " --graph " + g + " --data " + at("err.jsonl") + " --ckpt ";
  CHECK(run_cli("eval" + base + at("err.ckpt") + " --observe mood").code == 2);

  write_file(at("garbage.ckpt"), "this is not a checkpoint");
  CHECK(run_cli("eval" + base + at("garbage.ckpt")).code == 2);

  // A graph file that disagrees with the dataset's header hash is rejected.
  sinn::LabelGraph other = testutil::scenes_graph();
  other.layers[1].labels.push_back("castle");
  write_file(at("other.graph"), sinn::serialize_graph(other));
  CHECK(run_cli("eval --graph " + at("other.graph") + " --data " + at("err.jsonl") +
                " --ckpt " + at("err.ckpt"))
            .code == 2);
}

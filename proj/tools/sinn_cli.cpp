// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synthesize datasets, train the model variants,
// evaluate checkpoints, and run (optionally observed) predictions.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sinn/sinn.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sinn::Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct SynthArgs {
  std::string graph, out;
  sinn::SynthSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  const sinn::LabelGraph g = sinn::parse_graph(read_file(a.graph));
  const sinn::Dataset ds = sinn::generate_synthetic(g, a.spec);
  sinn::save_dataset(ds, a.out);
  std::cout << "wrote " << ds.samples.size() << " samples (" << g.num_layers() << " layers, d="
            << ds.feature_dim << ") to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string graph, data, ckpt;
  std::string variant = "sinn";
  sinn::TrainConfig cfg;
  bool machine = false;
};

int cmd_train(const TrainArgs& a) {
  const sinn::LabelGraph g = sinn::parse_graph(read_file(a.graph));
  const sinn::MaskSet masks = sinn::compile_masks(g);
  const sinn::Dataset ds = sinn::load_dataset(a.data, g);
  sinn::ModelParams p = sinn::init_params(g, masks, ds.feature_dim,
                                          sinn::variant_from_string(a.variant), a.cfg.seed);
  sinn::fit(ds, p, masks, a.cfg, [&](const sinn::EpochRecord& r) {
    if (a.machine) {
      nlohmann::ordered_json rec;
      rec["epoch"] = r.epoch;
      rec["mean_loss"] = r.mean_loss;
      rec["lr"] = r.lr;
      rec["wall_time_s"] = r.wall_time_s;
      std::cout << rec.dump() << "\n";
    } else {
      std::printf("epoch %4d  loss %.6f  lr %.6f  %.2fs\n", r.epoch, r.mean_loss, r.lr,
                  r.wall_time_s);
    }
  });
  sinn::save_checkpoint(p, a.ckpt);
  if (!a.machine) std::cout << "checkpoint written to " << a.ckpt << "\n";
  return 0;
}

struct EvalArgs {
  std::string graph, data, ckpt;
  int splits = 0;
  double train_frac = 0.6;
  int topn = 3;
  std::string observe;  // layer name
  std::string observe_mode = "paper_formula";
  std::uint64_t seed = 1;
  bool machine = false;
};

void check_checkpoint_binding(const sinn::ModelParams& p, const sinn::LabelGraph& g,
                              const sinn::Dataset& ds) {
  if (p.graph_hash != sinn::graph_hash(g))
    throw sinn::Error("checkpoint was trained against a different graph");
  if (p.layer_sizes != g.layer_sizes())
    throw sinn::Error("checkpoint layer sizes do not match the graph");
  if (p.feature_dim != ds.feature_dim)
    throw sinn::Error("checkpoint feature dim does not match the dataset");
}

sinn::EvalResult mean_result(const std::vector<sinn::EvalResult>& rs) {
  sinn::EvalResult m = rs.front();
  auto acc = [&](auto get) {
    double s = 0.0;
    for (const auto& r : rs) s += get(r);
    return s / static_cast<double>(rs.size());
  };
  m.map_l = acc([](const sinn::EvalResult& r) { return r.map_l; });
  m.map_i = acc([](const sinn::EvalResult& r) { return r.map_i; });
  m.iou = acc([](const sinn::EvalResult& r) { return r.iou; });
  m.prec_l = acc([](const sinn::EvalResult& r) { return r.prec_l; });
  m.rec_l = acc([](const sinn::EvalResult& r) { return r.rec_l; });
  m.prec_i = acc([](const sinn::EvalResult& r) { return r.prec_i; });
  m.rec_i = acc([](const sinn::EvalResult& r) { return r.rec_i; });
  for (std::size_t t = 0; t < m.layers.size(); ++t) {
    m.layers[t].map_l = acc([&](const sinn::EvalResult& r) { return r.layers[t].map_l; });
    m.layers[t].map_i = acc([&](const sinn::EvalResult& r) { return r.layers[t].map_i; });
    m.layers[t].iou = acc([&](const sinn::EvalResult& r) { return r.layers[t].iou; });
    if (m.layers[t].mc)
      m.layers[t].mc = acc([&](const sinn::EvalResult& r) { return *r.layers[t].mc; });
  }
  return m;
}

void print_human(const sinn::EvalResult& r) {
  std::printf("  %-10s %.4f\n", "map_l", r.map_l);
  std::printf("  %-10s %.4f\n", "map_i", r.map_i);
  std::printf("  %-10s %.4f\n", "iou_acc", r.iou);
  std::printf("  %-10s %.4f\n", "prec_l", r.prec_l);
  std::printf("  %-10s %.4f\n", "rec_l", r.rec_l);
  std::printf("  %-10s %.4f\n", "prec_i", r.prec_i);
  std::printf("  %-10s %.4f\n", "rec_i", r.rec_i);
  for (const auto& le : r.layers) {
    std::printf("  layer %-12s map_l %.4f  map_i %.4f  iou %.4f", le.layer.c_str(), le.map_l,
                le.map_i, le.iou);
    if (le.mc) std::printf("  mc_acc %.4f", *le.mc);
    std::printf("\n");
  }
}

int cmd_eval(const EvalArgs& a) {
  const sinn::LabelGraph g = sinn::parse_graph(read_file(a.graph));
  const sinn::MaskSet masks = sinn::compile_masks(g);
  const sinn::Dataset ds = sinn::load_dataset(a.data, g);
  const sinn::ModelParams p = sinn::load_checkpoint_file(a.ckpt);
  check_checkpoint_binding(p, g, ds);

  sinn::EvalOptions opt;
  opt.topn = a.topn;
  opt.obs.mode = a.observe_mode == "true_logit" ? sinn::ObservationMode::true_logit
                                                : sinn::ObservationMode::paper_formula;
  if (!a.observe.empty()) {
    opt.observe_layer = g.layer_index(a.observe);
    if (opt.observe_layer < 0) throw sinn::Error("unknown layer '" + a.observe + "'");
  }

  if (a.splits <= 0) {
    const sinn::EvalResult r = sinn::evaluate(p, masks, ds, opt);
    if (a.machine) {
      std::cout << r.to_record();
    } else {
      std::printf("evaluation on %zu samples:\n", ds.samples.size());
      print_human(r);
    }
    return 0;
  }

  std::vector<sinn::EvalResult> results;
  for (int k = 0; k < a.splits; ++k) {
    const auto [train, test] = sinn::split(ds, a.train_frac, a.seed + static_cast<std::uint64_t>(k));
    results.push_back(sinn::evaluate(p, masks, test, opt));
    if (!a.machine) {
      std::printf("split %d (seed %llu, %zu test samples): map_l %.4f  map_i %.4f  iou %.4f\n",
                  k + 1, static_cast<unsigned long long>(a.seed + static_cast<std::uint64_t>(k)),
                  test.samples.size(), results.back().map_l, results.back().map_i,
                  results.back().iou);
    }
  }
  const sinn::EvalResult mean = mean_result(results);
  if (a.machine) {
    std::cout << mean.to_record();
    return 0;
  }
  auto std_of = [&](auto get) {
    double m = 0.0, s = 0.0;
    for (const auto& r : results) m += get(r);
    m /= static_cast<double>(results.size());
    for (const auto& r : results) s += (get(r) - m) * (get(r) - m);
    return std::sqrt(s / static_cast<double>(results.size()));
  };
  std::printf("mean over %d splits (+/- std):\n", a.splits);
  std::printf("  %-10s %.4f +/- %.4f\n", "map_l", mean.map_l,
              std_of([](const sinn::EvalResult& r) { return r.map_l; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "map_i", mean.map_i,
              std_of([](const sinn::EvalResult& r) { return r.map_i; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "iou_acc", mean.iou,
              std_of([](const sinn::EvalResult& r) { return r.iou; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "prec_l", mean.prec_l,
              std_of([](const sinn::EvalResult& r) { return r.prec_l; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "rec_l", mean.rec_l,
              std_of([](const sinn::EvalResult& r) { return r.rec_l; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "prec_i", mean.prec_i,
              std_of([](const sinn::EvalResult& r) { return r.prec_i; }));
  std::printf("  %-10s %.4f +/- %.4f\n", "rec_i", mean.rec_i,
              std_of([](const sinn::EvalResult& r) { return r.rec_i; }));
  for (const auto& le : mean.layers) {
    std::printf("  layer %-12s map_l %.4f  map_i %.4f  iou %.4f", le.layer.c_str(), le.map_l,
                le.map_i, le.iou);
    if (le.mc) std::printf("  mc_acc %.4f", *le.mc);
    std::printf("\n");
  }
  return 0;
}

struct PredictArgs {
  std::string graph, data, ckpt;
  std::string observe;  // path to an observation file
  bool machine = false;
};

struct ObservationEntry {
  int layer = -1;
  sinn::BinaryVec labels;
};

std::map<std::string, ObservationEntry> load_observations(const std::string& path,
                                                          const sinn::LabelGraph& g) {
  std::map<std::string, ObservationEntry> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sinn::Error("cannot open '" + path + "'");
  std::string line;
  int record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      ObservationEntry e;
      const std::string layer = rec.at("layer").get<std::string>();
      e.layer = g.layer_index(layer);
      if (e.layer < 0)
        throw sinn::ParseError("observation record " + std::to_string(record) +
                               ": unknown layer '" + layer + "'");
      e.labels.assign(static_cast<std::size_t>(g.layer_size(e.layer)), 0);
      for (const auto& name : rec.at("positive")) {
        const int li = g.label_index(e.layer, name.get<std::string>());
        if (li < 0)
          throw sinn::ParseError("observation record " + std::to_string(record) +
                                 ": unknown label '" + name.get<std::string>() + "'");
        e.labels[static_cast<std::size_t>(li)] = 1;
      }
      const std::string id = rec.at("id").get<std::string>();
      if (!out.emplace(id, std::move(e)).second)
        throw sinn::ParseError("observation record " + std::to_string(record) +
                               ": duplicate id '" + id + "'");
    } catch (const nlohmann::json::exception& ex) {
      throw sinn::ParseError("observation record " + std::to_string(record) + ": " + ex.what());
    }
  }
  return out;
}

int cmd_predict(const PredictArgs& a) {
  const sinn::LabelGraph g = sinn::parse_graph(read_file(a.graph));
  const sinn::MaskSet masks = sinn::compile_masks(g);
  const sinn::Dataset ds = sinn::load_dataset(a.data, g);
  const sinn::ModelParams p = sinn::load_checkpoint_file(a.ckpt);
  check_checkpoint_binding(p, g, ds);

  std::map<std::string, ObservationEntry> observations;
  if (!a.observe.empty()) observations = load_observations(a.observe, g);

  for (const sinn::Sample& s : ds.samples) {
    int observed_layer = -1;
    std::vector<sinn::Vector> probs;
    if (auto it = observations.find(s.id); it != observations.end()) {
      sinn::ObservationSet obs;
      obs.labels[it->second.layer] = it->second.labels;
      const sinn::ObservationPlan plan = sinn::plan_observation(g, obs);
      probs = sinn::predict(p, masks, s.feature, &plan);
      observed_layer = it->second.layer;
    } else {
      probs = sinn::predict(p, masks, s.feature);
    }

    if (a.machine) {
      nlohmann::ordered_json rec;
      rec["id"] = s.id;
      if (observed_layer >= 0) rec["observed"] = g.layers[observed_layer].name;
      nlohmann::ordered_json layers;
      for (int t = 0; t < g.num_layers(); ++t) {
        nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
        for (int j : sinn::detail::ranking(probs[static_cast<std::size_t>(t)])) {
          nlohmann::ordered_json item;
          item["label"] = g.layers[t].labels[static_cast<std::size_t>(j)];
          item["prob"] = probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
          ranked.push_back(std::move(item));
        }
        layers[g.layers[t].name] = std::move(ranked);
      }
      rec["layers"] = std::move(layers);
      std::cout << rec.dump() << "\n";
    } else {
      std::printf("%s\n", s.id.c_str());
      for (int t = 0; t < g.num_layers(); ++t) {
        std::printf("  %s%s:", g.layers[t].name.c_str(),
                    t == observed_layer ? " (observed)" : "");
        for (int j : sinn::detail::ranking(probs[static_cast<std::size_t>(t)]))
          std::printf(" %s=%.3f", g.layers[t].labels[static_cast<std::size_t>(j)].c_str(),
                      probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]);
        std::printf("\n");
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layered multi-label prediction over a label relation graph"};
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic layered dataset");
  synth->add_option("--graph", sa.graph, "label graph file")->required();
  synth->add_option("--out", sa.out, "dataset output path")->required();
  synth->add_option("--per-class", sa.spec.samples_per_class, "samples per bottom-layer class");
  synth->add_option("--dim", sa.spec.feature_dim, "feature dimension");
  synth->add_option("--noise-sigma", sa.spec.noise_sigma, "feature noise stddev");
  synth->add_option("--flip-prob", sa.spec.flip_prob, "label flip probability");
  synth->add_option("--seed", sa.spec.seed, "generator seed");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--graph", ta.graph, "label graph file")->required();
  train->add_option("--data", ta.data, "dataset file")->required();
  train->add_option("--ckpt", ta.ckpt, "checkpoint output path")->required();
  train->add_option("--variant", ta.variant, "model variant")
      ->check(CLI::IsMember({"logistic", "topdown", "binn", "sinn"}));
  train->add_option("--epochs", ta.cfg.epochs, "training epochs");
  train->add_option("--lr", ta.cfg.learning_rate, "learning rate");
  train->add_option("--momentum", ta.cfg.momentum, "momentum coefficient");
  train->add_option("--batch", ta.cfg.batch_size, "mini-batch size");
  train->add_option("--clip", ta.cfg.clip_threshold, "global gradient-norm clip");
  train->add_option("--wd", ta.cfg.weight_decay, "weight decay");
  train->add_option("--seed", ta.cfg.seed, "init and shuffle seed");
  train->add_flag("--machine", ta.machine, "line-delimited JSON log");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--graph", ea.graph, "label graph file")->required();
  eval->add_option("--data", ea.data, "dataset file")->required();
  eval->add_option("--ckpt", ea.ckpt, "checkpoint to evaluate")->required();
  eval->add_option("--splits", ea.splits, "evaluate k seeded test splits (0 = whole set)");
  eval->add_option("--train-frac", ea.train_frac, "train fraction per split");
  eval->add_option("--topn", ea.topn, "n for precision/recall at n");
  eval->add_option("--observe", ea.observe, "feed this layer's true labels at predict time");
  eval->add_option("--observe-mode", ea.observe_mode, "observed-activation formula")
      ->check(CLI::IsMember({"paper_formula", "true_logit"}));
  eval->add_option("--seed", ea.seed, "split seed base");
  eval->add_flag("--machine", ea.machine, "flat key-value record output");

  PredictArgs pa;
  CLI::App* predict = app.add_subcommand("predict", "rank labels for every sample");
  predict->add_option("--graph", pa.graph, "label graph file")->required();
  predict->add_option("--data", pa.data, "dataset file with samples to predict")->required();
  predict->add_option("--ckpt", pa.ckpt, "checkpoint to use")->required();
  predict->add_option("--observe", pa.observe, "observation file (JSONL)");
  predict->add_flag("--machine", pa.machine, "line-delimited JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa);
    if (train->parsed()) return cmd_train(ta);
    if (eval->parsed()) return cmd_eval(ea);
    if (predict->parsed()) return cmd_predict(pa);
  } catch (const sinn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const sinn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

// Copyright 2026 The restp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: architecture inspection, synthetic data, training,
// feature extraction, SVM classification, repeated-split evaluation, and the
// gradient-check battery.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "restp/restp.hpp"

namespace {

using namespace restp;

// --- key=value config files (one pair per line, '#' comments) --------------

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = s.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    return std::stoi(value);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' needs an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    return std::stod(value);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' needs a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("key '" + key + "' needs a boolean, got '" + value + "'");
}

struct TrainFileConfig {
  NetworkConfig net;
  TrainConfig train;
  NormalizeConfig norm;
  bool classes_pinned = false;
};

TrainFileConfig parse_train_config(const std::string& path) {
  TrainFileConfig out;
  for (const auto& [key, value] : read_kv_file(path)) {
    if (key == "depth") {
      out.net.depth = parse_int(key, value);
    } else if (key == "classes") {
      out.net.num_classes = parse_int(key, value);
      out.classes_pinned = true;
    } else if (key == "input") {
      const auto x = value.find('x');
      out.net.input_h = parse_int(key, x == std::string::npos ? value : value.substr(0, x));
      out.net.input_w = x == std::string::npos ? out.net.input_h
                                               : parse_int(key, value.substr(x + 1));
    } else if (key == "width") {
      out.net.width_multiplier = parse_double(key, value);
    } else if (key == "pathways") {
      out.net.pathways = parse_pathways(value);
    } else if (key == "batch_size") {
      out.train.batch_size = parse_int(key, value);
    } else if (key == "momentum") {
      out.train.momentum = parse_double(key, value);
    } else if (key == "lr0") {
      out.train.lr0 = parse_double(key, value);
    } else if (key == "lr_step") {
      out.train.lr_step = parse_int(key, value);
    } else if (key == "lr_factor") {
      out.train.lr_factor = parse_double(key, value);
    } else if (key == "weight_decay") {
      out.train.weight_decay = parse_double(key, value);
    } else if (key == "epochs") {
      out.train.epochs = parse_int(key, value);
    } else if (key == "seed") {
      out.train.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "freeze") {
      out.train.freeze = split_list(value);
    } else if (key == "rotations") {
      out.train.augment.rotations.clear();
      for (const auto& r : split_list(value)) {
        out.train.augment.rotations.push_back(parse_int(key, r));
      }
    } else if (key == "mirror") {
      out.train.augment.mirror = parse_bool(key, value);
    } else if (key == "scale_lo") {
      out.train.augment.scale_lo = parse_double(key, value);
    } else if (key == "scale_hi") {
      out.train.augment.scale_hi = parse_double(key, value);
    } else if (key == "norm_mean") {
      const auto parts = split_list(value);
      if (parts.size() == 1) {
        out.norm.mean.fill(static_cast<float>(parse_double(key, parts[0])));
      } else if (parts.size() == 3) {
        for (int c = 0; c < 3; ++c) out.norm.mean[c] = static_cast<float>(parse_double(key, parts[c]));
      } else {
        throw ConfigError("norm_mean needs 1 or 3 values");
      }
    } else if (key == "norm_std") {
      const auto parts = split_list(value);
      if (parts.size() == 1) {
        out.norm.stddev.fill(static_cast<float>(parse_double(key, parts[0])));
      } else if (parts.size() == 3) {
        for (int c = 0; c < 3; ++c) {
          out.norm.stddev[c] = static_cast<float>(parse_double(key, parts[c]));
        }
      } else {
        throw ConfigError("norm_std needs 1 or 3 values");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "' in " + path);
    }
  }
  return out;
}

Network network_from_checkpoint(const Checkpoint& ckpt) {
  auto it = ckpt.metadata.find("config");
  if (it == ckpt.metadata.end()) throw FormatError("checkpoint lacks config metadata");
  Network net(config_from_canonical(it->second));
  load_into(net, ckpt, /*strict=*/true);
  return net;
}

// --- subcommand bodies ------------------------------------------------------

int run_inspect(int depth, int input, int classes, double width, const std::string& pathways) {
  NetworkConfig cfg;
  cfg.depth = depth;
  cfg.input_h = cfg.input_w = input;
  cfg.num_classes = classes;
  cfg.width_multiplier = width;
  cfg.pathways = parse_pathways(pathways);
  std::cout << inspect(cfg).to_string();
  return 0;
}

int run_synth(const std::string& out_dir, int classes, int per_class, int size,
              std::uint64_t seed) {
  SynthConfig cfg;
  cfg.classes = classes;
  cfg.per_class = per_class;
  cfg.size = size;
  cfg.seed = seed;
  std::cout << synth_dataset(cfg, out_dir) << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data,
              const std::string& out_path, const std::string& metrics_path,
              const std::vector<std::string>& init_paths,
              const std::vector<std::string>& init_drops) {
  TrainFileConfig cfg = parse_train_config(config_path);

  DatasetManifest manifest = load_manifest(data);
  if (cfg.classes_pinned && cfg.net.num_classes != manifest.num_classes()) {
    throw ConfigError("config pins " + std::to_string(cfg.net.num_classes) +
                      " classes but the manifest has " +
                      std::to_string(manifest.num_classes()));
  }
  cfg.net.num_classes = manifest.num_classes();
  cfg.net.validate();

  Network net(cfg.net);
  Rng rng(cfg.train.seed);
  net.init(rng);
  for (const auto& path : init_paths) {
    Checkpoint ckpt = read_rtpc(path);
    for (const auto& prefix : init_drops) ckpt = drop_prefix(ckpt, prefix);
    load_into(net, ckpt, /*strict=*/false);
  }

  LoadedDataset ds = load_dataset(data, cfg.net.input_h, cfg.net.input_w, cfg.norm);
  std::cout << "epoch,lr,loss,train_acc\n";
  TrainResult result = train(net, ds, cfg.train, [](const EpochMetrics& m) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.8g,%.6f,%.4f\n", m.epoch, m.lr, m.loss, m.train_acc);
    std::cout << line << std::flush;
  });

  write_rtpc(out_path, result.checkpoint);
  if (!metrics_path.empty()) write_metrics_csv(metrics_path, result.history);
  if (result.diverged) {
    const std::string prefix = "numeric error: ";
    std::cerr << (result.error.rfind(prefix, 0) == 0 ? result.error : prefix + result.error)
              << " (last good checkpoint kept at " << out_path << ")\n";
    return 2;
  }
  std::cout << "checkpoint written to " << out_path << "\n";
  return 0;
}

int run_extract(const std::string& ckpt_path, const std::string& data,
                const std::string& out_path, bool l2) {
  Network net = network_from_checkpoint(read_rtpc(ckpt_path));
  LoadedDataset ds = load_dataset(data, net.config.input_h, net.config.input_w);
  std::vector<FeatureVector> feats = extract_features(net, ds);
  if (l2) {
    int zeros = 0;
    for (auto& f : feats) {
      if (!l2_normalize(f.values)) ++zeros;
    }
    if (zeros > 0) {
      std::cerr << "warning: " << zeros << " all-zero feature vector(s) left unnormalized\n";
    }
  }
  write_features_csv(out_path, feats);
  std::cout << feats.size() << " feature rows (" << feats[0].values.size()
            << " dims) written to " << out_path << "\n";
  return 0;
}

int run_classify(const std::string& features_path, const std::string& model_path, bool fit,
                 double C, std::uint64_t seed, const std::string& out_path) {
  std::vector<FeatureVector> feats = read_features_csv(features_path);
  SvmModel model;
  if (fit) {
    model = svm_train(feats, C, seed);
    write_svm_model(model_path, model);
    std::cout << "model with " << model.num_classes() << " classes written to " << model_path
              << "\n";
  } else {
    model = read_svm_model(model_path, static_cast<int>(feats[0].values.size()));
  }

  std::vector<int> pred = svm_predict_batch(model, feats);
  bool labeled = true;
  int correct = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].label < 0) labeled = false;
    if (feats[i].label == pred[i]) ++correct;
  }
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw IoError("cannot write predictions " + out_path);
    os << "index,label,pred\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
      os << i << "," << feats[i].label << "," << pred[i] << "\n";
    }
    std::cout << "predictions written to " << out_path << "\n";
  }
  if (labeled) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "accuracy %.2f%% (%d/%zu)\n",
                  100.0 * correct / static_cast<double>(feats.size()), correct, feats.size());
    std::cout << buf;
  }
  return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& data,
                 const std::string& out_dir, double ratio, int repeats, std::uint64_t seed,
                 double C) {
  Network net = network_from_checkpoint(read_rtpc(ckpt_path));
  LoadedDataset ds = load_dataset(data, net.config.input_h, net.config.input_w);
  SplitSpec spec;
  spec.training_ratio = ratio;
  spec.repeats = repeats;
  spec.base_seed = seed;
  EvalReport report = evaluate(net, ds, spec, C);
  report_emit(report, out_dir);
  for (std::size_t r = 0; r < report.accuracies.size(); ++r) {
    char line[64];
    std::snprintf(line, sizeof(line), "repeat %zu: %.2f%%\n", r, report.accuracies[r]);
    std::cout << line;
  }
  std::cout << "summary: " << format_mean_std(report.mean(), report.stddev()) << "\n";
  std::cout << "reports written to " << out_dir << "\n";
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  bool all_pass = true;
  for (const auto& report : standard_battery(seed)) {
    const bool ok = report.pass();
    all_pass = all_pass && ok;
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s max_rel_err %.3e  %s\n", report.op.c_str(),
                  report.max_rel_err, ok ? "PASS" : "FAIL");
    std::cout << line;
  }
  if (!all_pass) {
    std::cerr << "numeric error: gradient check failed\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-pathway residual network for scene classification"};
  app.require_subcommand(1);

  // inspect
  auto* cmd_inspect = app.add_subcommand("inspect", "Print the architecture table");
  int depth = 18, input = 224, classes = 1000;
  double width = 1.0;
  std::string pathways = "both";
  cmd_inspect->add_option("--depth", depth, "Network depth (18/34/50/101)");
  cmd_inspect->add_option("--input", input, "Input size (square)");
  cmd_inspect->add_option("--classes", classes, "Number of classes");
  cmd_inspect->add_option("--width", width, "Width multiplier in (0,1]");
  cmd_inspect->add_option("--pathways", pathways, "both, 5_1, or 5_2");

  // synth
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic grating corpus");
  std::string synth_out;
  int synth_classes = 5, synth_per_class = 50, synth_size = 64;
  std::uint64_t synth_seed = 1;
  cmd_synth->add_option("--out", synth_out, "Output directory")->required();
  cmd_synth->add_option("--classes", synth_classes, "Class count");
  cmd_synth->add_option("--per-class", synth_per_class, "Images per class");
  cmd_synth->add_option("--size", synth_size, "Image size (square)");
  cmd_synth->add_option("--seed", synth_seed, "Generator seed");

  // train
  auto* cmd_train = app.add_subcommand("train", "Train on a manifest dataset");
  std::string train_config, train_data, train_out, train_metrics;
  std::vector<std::string> train_inits, train_drops;
  cmd_train->add_option("--config", train_config, "key=value config file")->required();
  cmd_train->add_option("--data", train_data, "Manifest CSV")->required();
  cmd_train->add_option("--out", train_out, "Output checkpoint")->required();
  cmd_train->add_option("--metrics", train_metrics, "Per-epoch metrics CSV");
  cmd_train->add_option("--init", train_inits, "Checkpoint(s) to seed weights, non-strict");
  cmd_train->add_option("--init-drop", train_drops,
                        "Name prefix(es) dropped from every --init checkpoint");

  // extract
  auto* cmd_extract = app.add_subcommand("extract", "Extract GAP representations");
  std::string ex_ckpt, ex_data, ex_out;
  bool ex_l2 = false;
  cmd_extract->add_option("--ckpt", ex_ckpt, "Network checkpoint")->required();
  cmd_extract->add_option("--data", ex_data, "Manifest CSV")->required();
  cmd_extract->add_option("--out", ex_out, "Output feature CSV")->required();
  cmd_extract->add_flag("--l2", ex_l2, "L2-normalize each feature vector");

  // classify
  auto* cmd_classify = app.add_subcommand("classify", "Train or apply the linear SVM");
  std::string cl_features, cl_model, cl_out;
  bool cl_fit = false;
  double cl_C = 1.0;
  std::uint64_t cl_seed = 1;
  cmd_classify->add_option("--features", cl_features, "Feature CSV")->required();
  cmd_classify->add_option("--model", cl_model, "SVM model file")->required();
  cmd_classify->add_flag("--fit", cl_fit, "Fit the model on the features, then write it");
  cmd_classify->add_option("--C", cl_C, "SVM penalty");
  cmd_classify->add_option("--seed", cl_seed, "Coordinate-order seed");
  cmd_classify->add_option("--out", cl_out, "Prediction CSV");

  // evaluate
  auto* cmd_eval = app.add_subcommand("evaluate", "Repeated-split evaluation protocol");
  std::string ev_ckpt, ev_data, ev_out;
  double ev_ratio = 0.1, ev_C = 1.0;
  int ev_repeats = 10;
  std::uint64_t ev_seed = 1;
  cmd_eval->add_option("--ckpt", ev_ckpt, "Network checkpoint")->required();
  cmd_eval->add_option("--data", ev_data, "Manifest CSV")->required();
  cmd_eval->add_option("--out", ev_out, "Report directory")->required();
  cmd_eval->add_option("--ratio", ev_ratio, "Training ratio in (0,1)");
  cmd_eval->add_option("--repeats", ev_repeats, "Number of repeats");
  cmd_eval->add_option("--seed", ev_seed, "Split base seed");
  cmd_eval->add_option("--C", ev_C, "SVM penalty");

  // gradcheck
  auto* cmd_gc = app.add_subcommand("gradcheck", "Run the finite-difference battery");
  std::uint64_t gc_seed = 7;
  cmd_gc->add_option("--seed", gc_seed, "Battery seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "config error: " << e.what() << "\n";
    return 64;
  }

  try {
    if (app.got_subcommand(cmd_inspect)) {
      return run_inspect(depth, input, classes, width, pathways);
    }
    if (app.got_subcommand(cmd_synth)) {
      return run_synth(synth_out, synth_classes, synth_per_class, synth_size, synth_seed);
    }
    if (app.got_subcommand(cmd_train)) {
      return run_train(train_config, train_data, train_out, train_metrics, train_inits,
                       train_drops);
    }
    if (app.got_subcommand(cmd_extract)) {
      return run_extract(ex_ckpt, ex_data, ex_out, ex_l2);
    }
    if (app.got_subcommand(cmd_classify)) {
      return run_classify(cl_features, cl_model, cl_fit, cl_C, cl_seed, cl_out);
    }
    if (app.got_subcommand(cmd_eval)) {
      return run_evaluate(ev_ckpt, ev_data, ev_out, ev_ratio, ev_repeats, ev_seed, ev_C);
    }
    if (app.got_subcommand(cmd_gc)) {
      return run_gradcheck(gc_seed);
    }
  } catch (const restp::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

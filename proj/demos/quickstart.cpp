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

// Minimal library tour: build a small two-pathway net, train it briefly on a
// synthetic corpus, and run the repeated-split evaluation protocol.

#include <filesystem>
#include <iostream>

#include "restp/restp.hpp"

int main() {
  using namespace restp;

  // A desk-scale corpus of oriented gratings: 3 classes, 8 images each.
  SynthConfig synth;
  synth.classes = 3;
  synth.per_class = 8;
  synth.size = 64;
  synth.seed = 2024;
  const std::string dir =
      (std::filesystem::temp_directory_path() / "restp_quickstart").string();
  const std::string manifest = synth_dataset(synth, dir);
  LoadedDataset data = load_dataset(manifest, 64, 64);
  std::cout << "corpus: " << data.size() << " images, "
            << data.manifest.num_classes() << " classes\n";

  // A quarter-width depth-18 two-pathway network.
  NetworkConfig cfg;
  cfg.depth = 18;
  cfg.num_classes = data.manifest.num_classes();
  cfg.input_h = cfg.input_w = 64;
  cfg.width_multiplier = 0.25;
  std::cout << inspect(cfg).to_string() << "\n";

  Network net(cfg);
  Rng rng(7);
  net.init(rng);

  // A short training run with the stock optimizer settings.
  TrainConfig tc;
  tc.batch_size = 8;
  tc.epochs = 5;
  tc.seed = 7;
  tc.augment.rotations = {0, 90, 180, 270};
  tc.augment.mirror = true;
  TrainResult result = train(net, data, tc, [](const EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << ": loss " << m.loss << ", acc " << m.train_acc << "\n";
  });

  // GAP features -> linear SVM, over repeated stratified splits.
  SplitSpec spec;
  spec.training_ratio = 0.5;
  spec.repeats = 5;
  spec.base_seed = 3;
  EvalReport report = evaluate(net, data, spec);
  std::cout << "evaluation: " << format_mean_std(report.mean(), report.stddev()) << "\n";
  return 0;
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "smoe/adam.hpp"
#include "smoe/dataset.hpp"
#include "smoe/losses.hpp"
#include "smoe/random.hpp"
#include "smoe/unet.hpp"

namespace smoe {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 4;
  double lr = 1e-4;
  LossConfig loss;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  ModelConfig model;
  // Train on all four 90 degree rotations of every sample.
  bool augment_rotations = true;
  // When set, `epochs` train the U-Net on the composite loss alone, then
  // `distill_epochs` fit the fuzzy head to the frozen logits.
  bool two_phase = false;
  std::size_t distill_epochs = 10;

  void validate() const;
};

// Flat `key = value` text; blank lines and `#` comments are ignored. Keys:
// epochs, batch_size, lr, lambda, dice_eps, distill_weight, seed, out_dir,
// depth, base_channels, input_channels, smoe, tsk_rules, semantic_tap
// (head|decoder), standardize_input, augment, two_phase, distill_epochs.
// Booleans accept true/false/1/0. Unknown keys are rejected.
void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value);
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
// Inverse of parse_train_config; parsing the result reproduces the config.
std::string format_train_config(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double seconds = 0.0;
};

// `epoch,train_loss,val_loss,seconds`; a missing val loss is written empty.
std::string format_log_csv(const std::vector<EpochRecord>& log);

enum class StepObjective {
  joint,        // composite + distill_weight * distill
  composite,    // main head only
  distillation  // fuzzy head only
};

struct StepLosses {
  double total = 0.0;
  double composite = 0.0;
  double distill = 0.0;
};

// Equally sized images with their ground truth as tensors.
struct Batch {
  std::vector<Image> images;
  Tensor target;       // [N,1,H,W] soft consensus map, used by BCE
  Tensor dice_target;  // binarized at 0.5
};

// Centre-crops every sample to the smallest height and width in the group.
Batch make_batch(const std::vector<const Sample*>& samples);

// Loss of one batch under `objective` (the graph is recorded unless a
// NoGradGuard is active). Throws NumericError on a non-finite loss.
Tensor batch_loss(const Model& model, const Batch& batch, const LossConfig& cfg, StepObjective objective,
                  StepLosses* parts = nullptr);

// Forward, backward and one Adam step with the sigma clamp as post-step hook.
StepLosses train_step(Model& model, AdamState& state, const Batch& batch, const LossConfig& cfg,
                      StepObjective objective = StepObjective::joint);

// Mean joint loss over single-sample batches, without recording a graph.
double evaluate_loss(const Model& model, const std::vector<Sample>& samples, const LossConfig& cfg);

// Samples in fixed order, followed by their rot90/rot180/rot270 copies.
std::vector<Sample> expand_rotations(const std::vector<Sample>& samples);

// A fresh seeded permutation of [0, n) cut into consecutive batches; the
// last batch may be smaller.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng);

struct TrainResult {
  std::vector<EpochRecord> log;
  Model model;
  AdamState optimizer;
  std::size_t best_epoch = 0;
};

// Trains from Model(config.model, config.seed). When out_dir is set, writes
// log.csv and config.txt there, last.ckpt after every epoch and best.ckpt
// whenever the validation loss (training loss without a validation split)
// improves. Throws DataError on an empty training set and NumericError, with
// epoch and step, when a loss or gradient stops being finite.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace smoe

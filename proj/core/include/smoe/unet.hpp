#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "smoe/image.hpp"
#include "smoe/layers.hpp"
#include "smoe/smoe_block.hpp"
#include "smoe/tsk_head.hpp"

namespace smoe {

// Where the fuzzy head's semantic-confidence input x2 is taken from.
enum class SemanticTap {
  head,             // sigmoid of the main head logits
  decoder_features  // sigmoid of the channel mean of the last decoder block
};

struct ModelConfig {
  std::size_t depth = 4;
  std::size_t base_channels = 64;
  std::size_t input_channels = 1;
  bool smoe_enabled = true;
  std::size_t tsk_rules = 4;
  SemanticTap semantic_tap = SemanticTap::head;
  // Shift and scale each image to zero mean and unit variance before the
  // encoder. The guidance map is always computed from the raw pixels.
  bool standardize_input = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
  // Human-readable list of differing fields; empty when equal.
  std::string diff(const ModelConfig& other) const;
};

struct EncoderLevel {
  ConvParams conv1, conv2;
};

struct DecoderLevel {
  ConvParams up;  // after nearest-neighbour upsampling
  SmoeParams smoe;
  ConvParams conv1, conv2;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Every trainable tensor in a fixed order with stable names.
  std::vector<NamedParam> parameters() const;
  std::vector<NamedParam> unet_parameters() const;
  std::vector<NamedParam> tsk_parameters() const;
  std::size_t parameter_count() const;

  const std::vector<EncoderLevel>& encoder() const { return encoder_; }
  const EncoderLevel& bottleneck() const { return bottleneck_; }
  const std::vector<DecoderLevel>& decoder() const { return decoder_; }  // decoder_[l] serves skip level l
  const ConvParams& head() const { return head_; }
  FuzzyRuleParams& tsk() { return tsk_; }
  const FuzzyRuleParams& tsk() const { return tsk_; }

  std::size_t size_multiple() const { return std::size_t{1} << config_.depth; }

 private:
  ModelConfig config_;
  std::vector<EncoderLevel> encoder_;
  EncoderLevel bottleneck_;
  std::vector<DecoderLevel> decoder_;
  ConvParams head_;
  FuzzyRuleParams tsk_;
};

struct ForwardBundle {
  Tensor logits;               // [N,1,H,W] main head, pre-sigmoid
  Tensor semantic_confidence;  // [N,1,H,W] fuzzy-head input x2 (detached)
  Tensor guidance;             // [N,1,H,W] fuzzy-head input x1
  std::vector<GateMap> gate_maps;  // per skip level, 0 = full resolution; empty without sMoE
  Tensor tsk_output;           // [N,1,H,W]
  Tensor firing_maps;          // [N,R,H,W]
};

// Runs a batch of equally sized images (H x W x C in [0,1]). Inputs are
// reflect-padded to a multiple of 2^depth and every output is cropped back.
// Throws NumericError naming the first layer that produced a non-finite value.
ForwardBundle forward(const Model& model, const std::vector<Image>& images);
ForwardBundle forward(const Model& model, const Image& image);

// Closed-form trainable parameter count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);

}  // namespace smoe

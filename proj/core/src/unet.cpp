#include "smoe/unet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "smoe/sobel.hpp"

namespace smoe {

void ModelConfig::validate() const {
  if (depth < 1) throw Error("model depth must be >= 1");
  if (base_channels < 1) throw Error("base_channels must be >= 1");
  if (input_channels != 1 && input_channels != 3) throw Error("input_channels must be 1 or 3");
  if (tsk_rules < 1) throw Error("tsk_rules must be >= 1");
}

std::string ModelConfig::diff(const ModelConfig& other) const {
  std::ostringstream os;
  auto field = [&](const char* name, auto a, auto b) {
    if (a != b) os << (os.tellp() > 0 ? ", " : "") << name << ": " << a << " vs " << b;
  };
  field("depth", depth, other.depth);
  field("base_channels", base_channels, other.base_channels);
  field("input_channels", input_channels, other.input_channels);
  field("smoe_enabled", smoe_enabled, other.smoe_enabled);
  field("tsk_rules", tsk_rules, other.tsk_rules);
  field("semantic_tap", static_cast<int>(semantic_tap), static_cast<int>(other.semantic_tap));
  field("standardize_input", standardize_input, other.standardize_input);
  return os.str();
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto base = config_.base_channels;
  std::size_t in = config_.input_channels;
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const std::size_t c = base << l;
    EncoderLevel level;
    level.conv1 = ConvParams::he_uniform(c, in, 3, rng);
    level.conv2 = ConvParams::he_uniform(c, c, 3, rng);
    encoder_.push_back(std::move(level));
    in = c;
  }
  const std::size_t cb = base << config_.depth;
  bottleneck_.conv1 = ConvParams::he_uniform(cb, in, 3, rng);
  bottleneck_.conv2 = ConvParams::he_uniform(cb, cb, 3, rng);

  // Built deepest-first so the random stream follows execution order.
  decoder_.resize(config_.depth);
  std::size_t below = cb;
  for (std::size_t l = config_.depth; l-- > 0;) {
    const std::size_t c = base << l;
    DecoderLevel& level = decoder_[l];
    level.up = ConvParams::he_uniform(c, below, 3, rng);
    if (config_.smoe_enabled) level.smoe = SmoeParams::init(c, rng);
    level.conv1 = ConvParams::he_uniform(c, 2 * c, 3, rng);
    level.conv2 = ConvParams::he_uniform(c, c, 3, rng);
    below = c;
  }
  head_ = ConvParams::he_uniform(1, base, 1, rng);
  tsk_ = FuzzyRuleParams::init(config_.tsk_rules, rng);
}

std::vector<NamedParam> Model::unet_parameters() const {
  std::vector<NamedParam> out;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    const auto p = "enc" + std::to_string(l);
    append_params(out, p + ".conv1", encoder_[l].conv1);
    append_params(out, p + ".conv2", encoder_[l].conv2);
  }
  append_params(out, "bottleneck.conv1", bottleneck_.conv1);
  append_params(out, "bottleneck.conv2", bottleneck_.conv2);
  for (std::size_t l = decoder_.size(); l-- > 0;) {
    const auto p = "dec" + std::to_string(l);
    append_params(out, p + ".up", decoder_[l].up);
    if (config_.smoe_enabled) append_params(out, p + ".smoe", decoder_[l].smoe);
    append_params(out, p + ".conv1", decoder_[l].conv1);
    append_params(out, p + ".conv2", decoder_[l].conv2);
  }
  append_params(out, "head", head_);
  return out;
}

std::vector<NamedParam> Model::tsk_parameters() const {
  std::vector<NamedParam> out;
  append_params(out, "tsk", tsk_);
  return out;
}

std::vector<NamedParam> Model::parameters() const {
  auto out = unet_parameters();
  auto t = tsk_parameters();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

std::size_t expected_parameter_count(const ModelConfig& config) {
  auto conv = [](std::size_t cout, std::size_t cin, std::size_t k) { return cout * cin * k * k + cout; };
  const auto base = config.base_channels;
  std::size_t n = 0, in = config.input_channels;
  for (std::size_t l = 0; l < config.depth; ++l) {
    const auto c = base << l;
    n += conv(c, in, 3) + conv(c, c, 3);
    in = c;
  }
  const auto cb = base << config.depth;
  n += conv(cb, in, 3) + conv(cb, cb, 3);
  std::size_t below = cb;
  for (std::size_t l = config.depth; l-- > 0;) {
    const auto c = base << l;
    n += conv(c, below, 3) + conv(c, 2 * c, 3) + conv(c, c, 3);
    if (config.smoe_enabled) n += conv(1, 1, 1) + conv(c, c, 3) + conv(c, c, 1);
    below = c;
  }
  n += conv(1, base, 1);
  n += 7 * config.tsk_rules;
  return n;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

Tensor checked(Tensor t, const std::string& layer) {
  if (!all_finite(t.data())) throw NumericError("non-finite activations in layer " + layer);
  return t;
}

Image prepare_channels(const Image& image, std::size_t channels) {
  if (channels == 1) return to_luma(image);
  if (image.channels >= 3) {
    Image out(image.height, image.width, 3);
    for (std::size_t i = 0; i < image.height * image.width; ++i)
      for (std::size_t k = 0; k < 3; ++k) out.data[i * 3 + k] = image.data[i * image.channels + k];
    return out;
  }
  Image out(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.height * image.width; ++i)
    for (std::size_t k = 0; k < 3; ++k) out.data[i * 3 + k] = image.data[i * image.channels];
  return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

constexpr double kMinInputStd = 1e-3;

// Mean and standard deviation over all pixels and channels of the unpadded image.
std::pair<double, double> pixel_moments(const Image& img) {
  double mean = 0.0;
  for (double v : img.data) mean += v;
  mean /= static_cast<double>(img.data.size());
  double var = 0.0;
  for (double v : img.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(img.data.size());
  return {mean, std::max(std::sqrt(var), kMinInputStd)};
}

}  // namespace

ForwardBundle forward(const Model& model, const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("forward: empty batch");
  const auto& cfg = model.config();
  const auto h = images[0].height, w = images[0].width;
  const auto mult = model.size_multiple();
  const auto hp = ceil_div(h, mult) * mult, wp = ceil_div(w, mult) * mult;
  const auto nb = images.size(), cin = cfg.input_channels;

  std::vector<double> pixels;
  pixels.reserve(nb * cin * hp * wp);
  std::vector<GuidanceMap> guidance_maps;
  for (const auto& img : images) {
    if (img.height != h || img.width != w) throw ShapeError("forward: all images in a batch must share one size");
    if (!all_finite(img.data)) throw NumericError("non-finite input pixels");
    const Image prepared = prepare_channels(img, cin);
    const auto [shift, spread] = cfg.standardize_input ? pixel_moments(prepared) : std::pair{0.0, 1.0};
    Image padded = pad_reflect(prepared, hp - h, wp - w);
    guidance_maps.push_back(sobel_magnitude(padded));
    for (std::size_t k = 0; k < cin; ++k)
      for (std::size_t i = 0; i < hp * wp; ++i) pixels.push_back((padded.data[i * cin + k] - shift) / spread);
  }
  Tensor x = Tensor::from_data({nb, cin, hp, wp}, std::move(pixels));
  const Tensor guidance_full = guidance_tensor(guidance_maps);

  const Conv2dOptions same3{.stride = 1, .padding = 1, .dilation = 1};
  std::vector<Tensor> skips;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const auto& level = model.encoder()[l];
    const auto name = "enc" + std::to_string(l);
    x = checked(relu(apply_conv(x, level.conv1, same3)), name + ".conv1");
    x = checked(relu(apply_conv(x, level.conv2, same3)), name + ".conv2");
    skips.push_back(x);
    x = max_pool2d(x, 2, 2);
  }
  x = checked(relu(apply_conv(x, model.bottleneck().conv1, same3)), "bottleneck.conv1");
  x = checked(relu(apply_conv(x, model.bottleneck().conv2, same3)), "bottleneck.conv2");

  ForwardBundle out;
  std::vector<GateMap> gates(cfg.smoe_enabled ? cfg.depth : 0);
  for (std::size_t l = cfg.depth; l-- > 0;) {
    const auto& level = model.decoder()[l];
    const auto name = "dec" + std::to_string(l);
    x = checked(relu(apply_conv(upsample2x(x), level.up, same3)), name + ".up");
    Tensor skip = skips[l];
    if (cfg.smoe_enabled) {
      const auto lh = skip.dim(2), lw = skip.dim(3);
      std::vector<GuidanceMap> resized;
      for (const auto& g : guidance_maps) resized.push_back(resize_bilinear(g, lh, lw));
      auto moe = smoe_forward(skip, guidance_tensor(resized), level.smoe, l);
      skip = checked(moe.y, name + ".smoe");
      gates[l] = moe.gate;
    }
    x = concat_channels(skip, x);
    x = checked(relu(apply_conv(x, level.conv1, same3)), name + ".conv1");
    x = checked(relu(apply_conv(x, level.conv2, same3)), name + ".conv2");
  }
  Tensor logits = checked(apply_conv(x, model.head()), "head");

  out.logits = crop2d(logits, 0, 0, h, w);
  out.guidance = crop2d(guidance_full, 0, 0, h, w);
  for (auto& g : gates) {
    const auto scale_div = std::size_t{1} << g.level;
    g.values = crop2d(g.values, 0, 0, ceil_div(h, scale_div), ceil_div(w, scale_div));
  }
  out.gate_maps = std::move(gates);

  Tensor semantic;
  if (cfg.semantic_tap == SemanticTap::head) {
    semantic = sigmoid(out.logits);
  } else {
    Tensor avg = scale(sum_channels(x), 1.0 / static_cast<double>(x.dim(1)));
    semantic = sigmoid(crop2d(avg, 0, 0, h, w));
  }
  // The fuzzy head reads the backbone as a fixed signal: no gradient flows
  // from it back into the U-Net.
  out.semantic_confidence = semantic.detach();
  auto tsk = tsk_forward(out.guidance, out.semantic_confidence, model.tsk());
  out.tsk_output = checked(tsk.y, "tsk");
  out.firing_maps = tsk.firing;
  return out;
}

ForwardBundle forward(const Model& model, const Image& image) { return forward(model, std::vector<Image>{image}); }

}  // namespace smoe

#include "smoe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "smoe/checkpoint.hpp"
#include "smoe/errors.hpp"

namespace smoe {

void TrainConfig::validate() const {
  if (epochs == 0 && !(two_phase && distill_epochs > 0)) throw Error("epochs must be >= 1");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  if (!std::isfinite(lr) || lr < 0.0) throw Error("lr must be a finite value >= 0");
  loss.validate();
  model.validate();
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    n = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error("config key '" + key + "' expects a number, got '" + v + "'");
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "epochs") c.epochs = parse_size(key, v);
  else if (key == "batch_size") c.batch_size = parse_size(key, v);
  else if (key == "lr") c.lr = parse_double(key, v);
  else if (key == "lambda") c.loss.lambda = parse_double(key, v);
  else if (key == "dice_eps") c.loss.dice_eps = parse_double(key, v);
  else if (key == "distill_weight") c.loss.distill_weight = parse_double(key, v);
  else if (key == "seed") c.seed = parse_size(key, v);
  else if (key == "out_dir") c.out_dir = v;
  else if (key == "depth") c.model.depth = parse_size(key, v);
  else if (key == "base_channels") c.model.base_channels = parse_size(key, v);
  else if (key == "input_channels") c.model.input_channels = parse_size(key, v);
  else if (key == "smoe") c.model.smoe_enabled = parse_bool(key, v);
  else if (key == "tsk_rules") c.model.tsk_rules = parse_size(key, v);
  else if (key == "standardize_input") c.model.standardize_input = parse_bool(key, v);
  else if (key == "augment") c.augment_rotations = parse_bool(key, v);
  else if (key == "two_phase") c.two_phase = parse_bool(key, v);
  else if (key == "distill_epochs") c.distill_epochs = parse_size(key, v);
  else if (key == "semantic_tap") {
    if (v == "head") c.model.semantic_tap = SemanticTap::head;
    else if (v == "decoder") c.model.semantic_tap = SemanticTap::decoder_features;
    else throw Error("config key 'semantic_tap' expects head or decoder, got '" + v + "'");
  } else {
    throw Error("unknown config key '" + key + "'");
  }
}

TrainConfig parse_train_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), std::move(base));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "lr = " << format_double(c.lr) << "\n"
     << "lambda = " << format_double(c.loss.lambda) << "\n"
     << "dice_eps = " << format_double(c.loss.dice_eps) << "\n"
     << "distill_weight = " << format_double(c.loss.distill_weight) << "\n"
     << "seed = " << c.seed << "\n";
  if (!c.out_dir.empty()) os << "out_dir = " << c.out_dir.string() << "\n";
  os << "depth = " << c.model.depth << "\n"
     << "base_channels = " << c.model.base_channels << "\n"
     << "input_channels = " << c.model.input_channels << "\n"
     << "smoe = " << (c.model.smoe_enabled ? "true" : "false") << "\n"
     << "tsk_rules = " << c.model.tsk_rules << "\n"
     << "semantic_tap = " << (c.model.semantic_tap == SemanticTap::head ? "head" : "decoder") << "\n"
     << "standardize_input = " << (c.model.standardize_input ? "true" : "false") << "\n"
     << "augment = " << (c.augment_rotations ? "true" : "false") << "\n"
     << "two_phase = " << (c.two_phase ? "true" : "false") << "\n"
     << "distill_epochs = " << c.distill_epochs << "\n";
  return os.str();
}

std::string format_log_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,train_loss,val_loss,seconds\n";
  char buf[160];
  for (const auto& r : log) {
    if (std::isnan(r.val_loss)) {
      std::snprintf(buf, sizeof buf, "%zu,%.10g,,%.3f\n", r.epoch, r.train_loss, r.seconds);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.3f\n", r.epoch, r.train_loss, r.val_loss, r.seconds);
    }
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

Batch make_batch(const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw Error("make_batch: no samples");
  std::size_t h = samples[0]->image.height, w = samples[0]->image.width;
  for (const auto* s : samples) {
    h = std::min(h, s->image.height);
    w = std::min(w, s->image.width);
  }
  Batch b;
  std::vector<double> gt;
  gt.reserve(samples.size() * h * w);
  for (const auto* s : samples) {
    if (s->ground_truth.height != s->image.height || s->ground_truth.width != s->image.width) {
      throw DataError("sample '" + s->id + "': ground truth and image sizes differ");
    }
    b.images.push_back(center_fit(s->image, h, w));
    const Image g = center_fit(to_luma(s->ground_truth), h, w);
    gt.insert(gt.end(), g.data.begin(), g.data.end());
  }
  b.target = Tensor::from_data({samples.size(), 1, h, w}, std::move(gt));
  b.dice_target = binarize_target(b.target);
  return b;
}

Tensor batch_loss(const Model& model, const Batch& batch, const LossConfig& cfg, StepObjective objective,
                  StepLosses* parts) {
  const ForwardBundle out = forward(model, batch.images);
  Tensor composite, distill;
  if (objective != StepObjective::distillation) composite = composite_loss(out.logits, batch.target, batch.dice_target, cfg);
  if (objective != StepObjective::composite) distill = distill_mse(out.tsk_output, out.logits);

  Tensor total;
  switch (objective) {
    case StepObjective::joint:
      total = add(composite, scale(distill, cfg.distill_weight));
      break;
    case StepObjective::composite:
      total = composite;
      break;
    case StepObjective::distillation:
      total = distill;
      break;
  }
  if (!std::isfinite(total.item())) throw NumericError("loss is not finite");
  if (parts != nullptr) {
    parts->total = total.item();
    parts->composite = composite.defined() ? composite.item() : 0.0;
    parts->distill = distill.defined() ? distill.item() : 0.0;
  }
  return total;
}

StepLosses train_step(Model& model, AdamState& state, const Batch& batch, const LossConfig& cfg,
                      StepObjective objective) {
  const auto params = model.parameters();
  if (!state.matches(params)) state.reset(params);
  zero_grads(params);
  StepLosses parts;
  Tensor loss = batch_loss(model, batch, cfg, objective, &parts);
  backward(loss);
  adam_step(params, state, [&] { model.tsk().clamp_widths(); });
  return parts;
}

double evaluate_loss(const Model& model, const std::vector<Sample>& samples, const LossConfig& cfg) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : samples) total += batch_loss(model, make_batch({&s}), cfg, StepObjective::joint).item();
  return total / static_cast<double>(samples.size());
}

std::vector<Sample> expand_rotations(const std::vector<Sample>& samples) {
  std::vector<Sample> out = samples;
  for (auto rot : {Rotation::rot90, Rotation::rot180, Rotation::rot270})
    for (const auto& s : samples) out.push_back(augment(s, rot));
  return out;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");

  TrainResult result{{}, Model(config.model, config.seed), {}, 0};
  result.optimizer.lr = config.lr;
  result.optimizer.reset(result.model.parameters());

  const std::vector<Sample> pool = config.augment_rotations ? expand_rotations(train_set) : train_set;
  Rng shuffle_rng(config.seed + 1);

  const bool writing = !config.out_dir.empty();
  if (writing) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + config.out_dir.string() + ": " + ec.message());
    write_file(config.out_dir / "config.txt", format_train_config(config));
  }

  double best = std::numeric_limits<double>::infinity();
  const std::size_t total_epochs = config.epochs + (config.two_phase ? config.distill_epochs : 0);
  for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
    StepObjective objective = StepObjective::joint;
    if (config.two_phase) objective = epoch <= config.epochs ? StepObjective::composite : StepObjective::distillation;

    const auto start = std::chrono::steady_clock::now();
    double sum = 0.0;
    const auto batches = shuffled_batches(pool.size(), config.batch_size, shuffle_rng);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const Sample*> members;
      for (auto i : batches[bi]) members.push_back(&pool[i]);
      try {
        sum += train_step(result.model, result.optimizer, make_batch(members), config.loss, objective).total;
      } catch (const NumericError& e) {
        throw NumericError("training halted at epoch " + std::to_string(epoch) + ", step " + std::to_string(bi + 1) +
                           " (batch starting with '" + members.front()->id + "'): " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sum / static_cast<double>(batches.size());
    rec.val_loss = evaluate_loss(result.model, val_set, config.loss);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);

    const double score = std::isnan(rec.val_loss) ? rec.train_loss : rec.val_loss;
    const bool improved = score < best;
    if (improved) {
      best = score;
      result.best_epoch = epoch;
    }
    if (writing) {
      save_checkpoint(config.out_dir / "last.ckpt", result.model, &result.optimizer);
      if (improved) save_checkpoint(config.out_dir / "best.ckpt", result.model, &result.optimizer);
      write_file(config.out_dir / "log.csv", format_log_csv(result.log));
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace smoe

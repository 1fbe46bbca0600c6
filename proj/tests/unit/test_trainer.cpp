#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "smoe/checkpoint.hpp"
#include "smoe/errors.hpp"
#include "smoe/synthetic.hpp"
#include "smoe/trainer.hpp"
#include "test_support.hpp"

using namespace smoe;

namespace {

std::vector<Sample> synthetic_set(std::size_t n, std::uint64_t seed, std::size_t size = 16) {
  SyntheticOptions o;
  o.height = o.width = size;
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = make_synthetic_scene(seed + i, o);
    out.push_back({s.image, s.boundary, s.id});
  }
  return out;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 2;
  c.lr = 1e-3;
  c.seed = 3;
  c.model.depth = 2;
  c.model.base_channels = 4;
  c.augment_rotations = false;
  return c;
}

std::vector<double> flat_parameters(const Model& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST(TrainConfig, FormatParseRoundTrip) {
  TrainConfig c = tiny_config();
  c.lr = 0.1 + 0.2;
  c.loss.lambda = 0.3;
  c.out_dir = "/tmp/somewhere";
  c.model.semantic_tap = SemanticTap::decoder_features;
  c.model.smoe_enabled = false;
  c.two_phase = true;
  const auto text = format_train_config(c);
  const auto back = parse_train_config(text);
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.loss.lambda, c.loss.lambda);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.out_dir, c.out_dir);
  EXPECT_TRUE(back.two_phase);
  EXPECT_EQ(format_train_config(back), text);
}

TEST(TrainConfig, CommentsBlanksAndErrorsWithLineNumbers) {
  const auto c = parse_train_config("# comment\n\n  epochs = 7  \nsmoe = 0\n");
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_FALSE(c.model.smoe_enabled);
  try {
    parse_train_config("epochs = 2\nlearning_rate = 3\n");
    FAIL() << "unknown key accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_train_config("epochs 2\n"), Error);
  EXPECT_THROW(parse_train_config("epochs = -1\n"), Error);
  EXPECT_THROW(parse_train_config("lr = fast\n"), Error);
  EXPECT_THROW(parse_train_config("smoe = maybe\n"), Error);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = tiny_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config();
  c.lr = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config();
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(load_train_config("/nonexistent/config.txt"), DataError);
}

TEST(TrainLog, CsvFormat) {
  const std::vector<EpochRecord> log{{1, 0.5, 0.25, 1.0}, {2, 0.125, std::numeric_limits<double>::quiet_NaN(), 2.5}};
  EXPECT_EQ(format_log_csv(log), "epoch,train_loss,val_loss,seconds\n1,0.5,0.25,1.000\n2,0.125,,2.500\n");
}

TEST(Batching, ExpandRotationsOrder) {
  const auto set = synthetic_set(2, 1);
  const auto all = expand_rotations(set);
  ASSERT_EQ(all.size(), 8u);
  EXPECT_EQ(all[0].image, set[0].image);
  EXPECT_EQ(all[3].image, rotate(set[1].image, Rotation::rot90));
  EXPECT_EQ(all[6].ground_truth, rotate(set[0].ground_truth, Rotation::rot270));
}

TEST(Batching, ShuffledBatchesPartitionTheRange) {
  Rng rng(5);
  const auto batches = shuffled_batches(11, 4, rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[2].size(), 3u);
  std::vector<int> seen(11, 0);
  for (const auto& b : batches)
    for (auto i : b) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
  Rng again(5);
  EXPECT_EQ(shuffled_batches(11, 4, again), batches);
  EXPECT_THROW(shuffled_batches(3, 0, rng), Error);
}

TEST(Batching, MakeBatchCropsToSmallestSample) {
  auto a = synthetic_set(1, 1, 16)[0];
  auto b = synthetic_set(1, 2, 12)[0];
  const Batch batch = make_batch({&a, &b});
  EXPECT_EQ(batch.target.shape(), (std::vector<std::size_t>{2, 1, 12, 12}));
  EXPECT_EQ(batch.images[0], center_fit(a.image, 12, 12));
  for (double v : batch.dice_target.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  b.ground_truth = Image(3, 3);
  EXPECT_THROW(make_batch({&b}), DataError);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  TrainConfig c = tiny_config();
  c.lr = 0.0;
  const auto result = train(c, synthetic_set(2, 1), {});
  EXPECT_EQ(flat_parameters(result.model), flat_parameters(Model(c.model, c.seed)));
  EXPECT_EQ(result.optimizer.step, 1u);
}

TEST(Train, WritesLogConfigAndCheckpoints) {
  smoe::testing::TempDir dir("train");
  TrainConfig c = tiny_config();
  c.epochs = 2;
  c.out_dir = dir.path();
  std::vector<EpochRecord> seen;
  const auto result = train(c, synthetic_set(2, 1), synthetic_set(1, 50), [&](const EpochRecord& r) { seen.push_back(r); });
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[1].epoch, 2u);
  EXPECT_FALSE(std::isnan(seen[0].val_loss));
  const auto log = smoe::testing::read_text(dir / "log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
  EXPECT_EQ(parse_train_config(smoe::testing::read_text(dir / "config.txt")).model, c.model);
  const auto last = load_checkpoint(dir / "last.ckpt", c.model);
  EXPECT_EQ(flat_parameters(last.model), flat_parameters(result.model));
  ASSERT_TRUE(last.optimizer.has_value());
  EXPECT_EQ(last.optimizer->step, 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "best.ckpt"));
}

TEST(Train, SameSeedGivesByteIdenticalCheckpoints) {
  smoe::testing::TempDir a("det_a"), b("det_b");
  TrainConfig c = tiny_config();
  c.augment_rotations = true;
  c.out_dir = a.path();
  train(c, synthetic_set(3, 9), {});
  c.out_dir = b.path();
  train(c, synthetic_set(3, 9), {});
  EXPECT_EQ(smoe::testing::read_bytes(a / "last.ckpt"), smoe::testing::read_bytes(b / "last.ckpt"));
}

TEST(Train, CompositeLossFallsWhenOverfittingOneImage) {
  const auto set = synthetic_set(1, 7);
  const Batch batch = make_batch({&set[0]});
  ModelConfig mc = tiny_config().model;
  mc.base_channels = 8;
  Model model(mc, 0);
  AdamState state;
  state.lr = 1e-3;
  std::vector<double> losses;
  for (int step = 0; step < 60; ++step) losses.push_back(train_step(model, state, batch, {}).composite);
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    early += losses[i];
    late += losses[losses.size() - 10 + i];
  }
  EXPECT_LT(late, 0.5 * early);
}

TEST(Train, TwoPhaseRunsDistillationEpochs) {
  TrainConfig c = tiny_config();
  c.two_phase = true;
  c.distill_epochs = 2;
  EXPECT_EQ(train(c, synthetic_set(2, 1), {}).log.size(), 3u);
}

TEST(Train, EmptyTrainingSetIsADataError) { EXPECT_THROW(train(tiny_config(), {}, {}), DataError); }

TEST(Train, NonFiniteInputReportsEpochAndStep) {
  auto set = synthetic_set(1, 1);
  set[0].image.data[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(tiny_config(), set, {});
    FAIL() << "non-finite input accepted";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, step 1"), std::string::npos) << e.what();
  }
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "actc/context_store.hpp"
#include "actc/csv.hpp"
#include "actc/datasets.hpp"
#include "actc/error.hpp"
#include "actc/train_config.hpp"
#include "oracles.hpp"

namespace actc {
namespace {

namespace fs = std::filesystem;

void put_be32(std::ostream& o, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  o.write(b, 4);
}

TEST(Datasets, TwoGaussiansShapeAndBalance) {
  const Dataset d = two_gaussians(100, 3, 6.0, 1);
  EXPECT_EQ(d.inputs.shape(), (Shape{100, 3}));
  EXPECT_EQ(d.num_classes, 2u);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1), 50);
}

TEST(Datasets, GeneratorsAreDeterministic) {
  EXPECT_EQ(gaussian_blobs(64, 4, 3, 2.0, 5).inputs, gaussian_blobs(64, 4, 3, 2.0, 5).inputs);
  EXPECT_NE(gaussian_blobs(64, 4, 3, 2.0, 5).inputs, gaussian_blobs(64, 4, 3, 2.0, 6).inputs);
  EXPECT_EQ(two_moons(50, 2, 0.1, 3).inputs, two_moons(50, 2, 0.1, 3).inputs);
}

TEST(Datasets, TeacherRegressionHasTargets) {
  const Dataset d = teacher_regression(40, 5, 8, 2, 0.05, 1);
  EXPECT_FALSE(d.is_classification());
  EXPECT_EQ(d.targets.shape(), (Shape{40, 2}));
  const Batch b = d.batch({0, 3, 5});
  EXPECT_EQ(b.targets.shape(), (Shape{3, 2}));
  EXPECT_EQ(b.targets.at(1, 1), d.targets.at(3, 1));
}

TEST(Datasets, MakeDatasetRejectsUnknownKind) {
  DatasetSpec s;
  s.kind = "imagenet";
  EXPECT_THROW((void)make_dataset(s), ConfigError);
}

TEST(SampleRows, DistinctAndInRange) {
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto rows = sample_rows(100, 30, 7, t);
    ASSERT_EQ(rows.size(), 30u);
    EXPECT_EQ(std::set<std::size_t>(rows.begin(), rows.end()).size(), 30u);
    for (auto r : rows) EXPECT_LT(r, 100u);
  }
  EXPECT_EQ(sample_rows(100, 30, 7, 3), sample_rows(100, 30, 7, 3));
  EXPECT_THROW((void)sample_rows(5, 6, 1, 0), InvalidArgument);
}

TEST(Idx, LoadsHandWrittenFiles) {
  const fs::path dir = fs::temp_directory_path() / "actc_idx_test";
  fs::create_directories(dir);
  {
    std::ofstream fi(dir / "img", std::ios::binary), fl(dir / "lab", std::ios::binary);
    put_be32(fi, 0x803);
    put_be32(fi, 3);
    put_be32(fi, 2);
    put_be32(fi, 2);
    for (int i = 0; i < 12; ++i) fi.put(char(i * 20));
    put_be32(fl, 0x801);
    put_be32(fl, 3);
    fl.put(0);
    fl.put(2);
    fl.put(1);
  }
  const Dataset d = load_idx(dir / "img", dir / "lab", 0, Precision::dbl);
  EXPECT_EQ(d.inputs.shape(), (Shape{3, 4}));
  EXPECT_DOUBLE_EQ(d.inputs.at(1, 1), 100.0 / 255.0);
  EXPECT_EQ(d.labels, (std::vector<std::int64_t>{0, 2, 1}));
  EXPECT_EQ(d.num_classes, 3u);
  EXPECT_EQ(load_idx(dir / "img", dir / "lab", 2).size(), 2u);
  EXPECT_THROW((void)load_idx(dir / "lab", dir / "lab"), FormatError);
  fs::remove_all(dir);
}

TEST(Csv, ParsesHeaderAndRows) {
  std::stringstream ss("a,b\n1,2.5\n3,4\n");
  const CsvTable t = parse_csv(ss);
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_DOUBLE_EQ(t.number(0, "b"), 2.5);
  EXPECT_THROW((void)t.column("c"), FormatError);
  std::stringstream bad("a,b\n1\n");
  EXPECT_THROW((void)parse_csv(bad), FormatError);
}

constexpr const char* kMinimal = R"({"mode": "fp32", "steps": 10,
  "model": {"input_dim": 8, "nodes": [{"kind": "linear", "out": 2}, {"kind": "softmax_ce"}]}})";

TEST(Config, DefaultsAndInlineModel) {
  const TrainConfig c = parse_train_config(kMinimal);
  EXPECT_EQ(c.mode, TrainMode::fp32);
  EXPECT_EQ(c.steps, 10);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.n_pairs, 4u);
  EXPECT_DOUBLE_EQ(c.grad_ema_decay, 0.99);
  EXPECT_DOUBLE_EQ(c.sensitivity_ema_decay, 0.5);
  EXPECT_EQ(c.model().input_dim(), 8u);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW((void)parse_train_config(R"({"mode": "fp32", "bogus": 1})"), ConfigError);
  EXPECT_THROW((void)parse_train_config(R"({"dataset": {"kind": "two_gaussians", "colour": 1}})"), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"dataset.colour=2"}), ConfigError);
}

TEST(Config, OverridesApplyBeforeValidation) {
  const TrainConfig c = parse_train_config(kMinimal, {"steps=25", "dataset.samples=128", "mode=adaptive_b"});
  EXPECT_EQ(c.steps, 25);
  EXPECT_EQ(c.dataset.samples, 128u);
  EXPECT_EQ(c.mode, TrainMode::adaptive_b);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"steps=0"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"steps"}), ConfigError);
}

TEST(Config, RangeChecks) {
  EXPECT_THROW((void)parse_train_config(kMinimal, {"learning_rate=-1"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"momentum=1"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"mode=fixed_b", "avg_bits=3.5"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"mode=adaptive_b", "avg_bits=9"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"mode=warp"}), ConfigError);
  EXPECT_THROW((void)parse_train_config(kMinimal, {"precision=half"}), ConfigError);
  EXPECT_THROW((void)parse_train_config("{not json"), ConfigError);
}

TEST(Config, CheckpointedModeNeedsSegments) {
  EXPECT_THROW((void)parse_train_config(kMinimal, {"mode=checkpointed_adaptive"}), ConfigError);
}

TEST(Config, ResolvedJsonRoundTrips) {
  const TrainConfig c = parse_train_config(kMinimal, {"seed=9", "alert_threshold=0.25"});
  const TrainConfig back = parse_train_config(to_json_text(c));
  EXPECT_EQ(to_json_text(back), to_json_text(c));
  EXPECT_EQ(back.seed, 9u);
}

TEST(Config, ModelPathIsResolvedAgainstConfigFile) {
  const TrainConfig c = load_train_config(fs::path(ACTC_CONFIG_DIR) / "adaptive4.json");
  EXPECT_TRUE(c.model().has_segments());
  EXPECT_THROW((void)load_train_config("/nonexistent/config.json"), ConfigError);
}

SlotInfo activation(SlotId id, ValueToken tok, std::size_t n) {
  SlotInfo s;
  s.id = id;
  s.kind = SlotKind::activation;
  s.token = tok;
  s.shape = {n};
  s.dims = n;
  return s;
}

TEST(ContextStore, QuantizesActivationsAndAliasesDuplicates) {
  ContextStore st;
  const Tensor x = testing::random_tensor({512}, 1, 1.0, Precision::single);
  const SlotInfo a = activation(0, {ValueToken::Kind::value, 1, 0}, 512);
  st.offer(a, x, 4, 256, {1, 0});
  st.offer(a, x, 4, 256, {1, 0});
  EXPECT_EQ(st.alias_count(0), 1u);
  EXPECT_EQ(st.stored_bits(0), 4);
  const StoreAccounting acc = st.accounting();
  EXPECT_EQ(acc.payloads, 1u);
  EXPECT_EQ(acc.aliases, 1u);
  EXPECT_EQ(acc.activation_raw_bits, 512u * 32);
  EXPECT_EQ(acc.activation_stored_bits, 512u * 4 + 2 * 64 + kQuantHeaderBits);
  EXPECT_EQ(st.raw_view(0), nullptr);
  EXPECT_NE(st.load(0), x);
}

TEST(ContextStore, FootprintClashIsAnError) {
  ContextStore st;
  const SlotInfo a = activation(0, {ValueToken::Kind::value, 1, 0}, 8);
  st.offer(a, testing::random_tensor({8}, 1), 32, 256, {});
  EXPECT_THROW(st.offer(a, testing::random_tensor({8}, 2), 32, 256, {}), ContextError);
  EXPECT_THROW((void)st.load(5), ContextError);
}

TEST(ContextStore, FullPrecisionIsKeptVerbatim) {
  ContextStore st;
  const Tensor x = testing::random_tensor({16}, 3);
  st.offer(activation(2, {ValueToken::Kind::value, 0, 0}, 16), x, 32, 256, {});
  ASSERT_NE(st.raw_view(2), nullptr);
  EXPECT_EQ(st.load(2), x);
  EXPECT_EQ(st.accounting().compression_ratio(), 1.0);
  st.overwrite_activation(2, Tensor::full({16}, 1.0, Precision::dbl));
  EXPECT_EQ(st.load(2)[0], 1.0);
  EXPECT_THROW(st.overwrite_activation(2, Tensor::full({4}, 1.0)), Error);
}

TEST(ContextStore, IndexPayloads) {
  ContextStore st;
  SlotInfo s;
  s.id = 4;
  s.kind = SlotKind::state;
  s.token = {ValueToken::Kind::state, 3, 0};
  s.shape = {3};
  s.dims = 3;
  st.offer_indices(s, {1, 0, 2});
  EXPECT_EQ(st.indices(4), (IndexPayload{1, 0, 2}));
  EXPECT_THROW((void)st.load(4), ContextError);
}

}  // namespace
}  // namespace actc

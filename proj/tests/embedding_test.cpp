// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "wts/embedding.hpp"
#include "wts/teacher.hpp"

namespace wts {
namespace {

EmbeddingDataset tiny() {
  EmbeddingDataset ds;
  ds.image_embeddings = Matrix(3, 2, std::vector<double>{0.6, 0.8, 1.0, 0.0, 0.0, 1.0});
  ds.observed_labels = {0, 1, 1};
  ds.true_labels = Labels{0, 0, 1};
  ds.text_embeddings = Matrix(2, 2, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  ds.class_names = {"cat", "dög"};
  return ds;
}

void expect_error_containing(const std::string& bytes, const std::string& needle) {
  try {
    parse_dataset(bytes);
    FAIL() << "expected error containing '" << needle << "'";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

// Offsets inside a serialized tiny() image.
constexpr std::size_t kHeader = 8 + 4 * 3 + 1;
constexpr std::size_t kLabels = kHeader + 3 * 2 * 4;

TEST(NormalizeRows, Examples) {
  const auto m = normalize_rows(Matrix(1, 2, std::vector<double>{3.0, 4.0}));
  EXPECT_NEAR(m(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(m(0, 1), 0.8, 1e-12);
  const Matrix unit(2, 2, std::vector<double>{1.0, 0.0, 0.6, 0.8});
  const auto same = normalize_rows(unit);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(same.data()[k], unit.data()[k], 1e-12);
  EXPECT_THROW(normalize_rows(Matrix(1, 2)), Error);
}

TEST(DatasetFormat, HeaderLayout) {
  const std::string bytes = serialize_dataset(tiny());
  EXPECT_EQ(bytes.substr(0, 8), std::string("WTSEMB1\0", 8));
  std::uint32_t n, d, c;
  std::memcpy(&n, bytes.data() + 8, 4);
  std::memcpy(&d, bytes.data() + 12, 4);
  std::memcpy(&c, bytes.data() + 16, 4);
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(d, 2u);
  EXPECT_EQ(c, 2u);
  EXPECT_EQ(bytes[20], 1);
  // 3*2 f32 + 3 + 3 u32 + 2*2 f32 + names (2+3, 2+4 bytes for "dög")
  EXPECT_EQ(bytes.size(), kHeader + 24 + 12 + 12 + 16 + 5 + 6);
}

TEST(DatasetFormat, SaveLoadSaveIsByteIdentical) {
  const std::string first = serialize_dataset(tiny());
  const auto loaded = parse_dataset(first);
  EXPECT_EQ(serialize_dataset(loaded), first);
  EXPECT_EQ(loaded.class_names[1], "dög");
  EXPECT_EQ(*loaded.true_labels, (Labels{0, 0, 1}));
}

TEST(DatasetFormat, WithoutTrueLabels) {
  auto ds = tiny();
  ds.true_labels.reset();
  const auto loaded = parse_dataset(serialize_dataset(ds));
  EXPECT_FALSE(loaded.true_labels.has_value());
  EXPECT_EQ(serialize_dataset(loaded), serialize_dataset(ds));
}

TEST(DatasetFormat, SyntheticRoundTripIsByteIdentical) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.dim = 8;
  spec.samples_per_class = 20;
  spec.seed = 3;
  const auto ds = generate_synthetic(spec);
  const std::string bytes = serialize_dataset(ds);
  const auto loaded = parse_dataset(bytes);
  EXPECT_EQ(loaded.image_embeddings, ds.image_embeddings);
  EXPECT_EQ(serialize_dataset(loaded), bytes);
}

TEST(DatasetFormat, DistinctErrors) {
  const std::string good = serialize_dataset(tiny());

  std::string bad_magic = good;
  bad_magic[3] = 'X';
  expect_error_containing(bad_magic, "magic");

  expect_error_containing(good.substr(0, good.size() - 3), "truncated");
  expect_error_containing(good.substr(0, 14), "truncated");

  std::string empty = good;
  std::memset(empty.data() + 8, 0, 4);
  expect_error_containing(empty, "empty dataset");

  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + kHeader, &q, 4);
  expect_error_containing(nan, "non-finite");

  std::string label = good;
  const std::uint32_t two = 2;  // C = 2
  std::memcpy(label.data() + kLabels + 4, &two, 4);
  expect_error_containing(label, "label out of range");

  expect_error_containing(good + "x", "trailing");
}

TEST(DatasetValidation, ZeroPrototypeRejected) {
  auto ds = tiny();
  ds.text_embeddings(1, 0) = 0.0;
  ds.text_embeddings(1, 1) = 0.0;
  EXPECT_THROW(ds.validate(), Error);
}

TEST(Synthetic, DeterministicAndWellFormed) {
  SyntheticSpec spec;
  spec.classes = 5;
  spec.dim = 16;
  spec.samples_per_class = 30;
  spec.seed = 42;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.image_embeddings, b.image_embeddings);
  EXPECT_EQ(a.text_embeddings, b.text_embeddings);
  EXPECT_EQ(a.size(), 150u);
  ASSERT_TRUE(a.true_labels.has_value());
  EXPECT_EQ(*a.true_labels, a.observed_labels);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(norm2(a.image_embeddings.row(i)), 1.0, 1e-6);
  for (std::size_t c = 0; c < a.classes(); ++c) EXPECT_NEAR(norm2(a.text_embeddings.row(c)), 1.0, 1e-6);
  spec.seed = 43;
  EXPECT_NE(generate_synthetic(spec).image_embeddings, a.image_embeddings);
}

TEST(Synthetic, SplitSharesPrototypes) {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 4;
  spec.samples_per_class = 10;
  spec.seed = 1;
  const auto split = generate_synthetic_split(spec, 7);
  EXPECT_EQ(split.test.size(), 21u);
  EXPECT_EQ(split.train.text_embeddings, split.test.text_embeddings);
  EXPECT_EQ(split.train.image_embeddings, generate_synthetic(spec).image_embeddings);
}

double zero_shot_accuracy(const EmbeddingDataset& ds) {
  const auto pred = text_predicted_labels(similarities(TeacherHead(ds.text_embeddings), ds.image_embeddings));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hit += pred[i] == (*ds.true_labels)[i];
  return static_cast<double>(hit) / ds.size();
}

TEST(Synthetic, PerfectTeacherOnTightClusters) {
  SyntheticSpec spec;
  spec.classes = 10;
  spec.dim = 32;
  spec.samples_per_class = 50;
  spec.cluster_spread = 1e-6;
  spec.teacher_quality = 1.0;
  spec.seed = 5;
  EXPECT_DOUBLE_EQ(zero_shot_accuracy(generate_synthetic(spec)), 1.0);
}

TEST(Synthetic, HugeSpreadDrivesTeacherToChance) {
  SyntheticSpec spec;
  spec.classes = 10;
  spec.dim = 32;
  spec.samples_per_class = 1000;
  spec.cluster_spread = 10.0;
  spec.teacher_quality = 1.0;
  spec.seed = 6;
  EXPECT_NEAR(zero_shot_accuracy(generate_synthetic(spec)), 0.1, 0.05);
}

TEST(Synthetic, InvalidSpecRejected) {
  SyntheticSpec spec;
  spec.teacher_quality = 0.0;
  EXPECT_THROW(generate_synthetic(spec), Error);
  spec.teacher_quality = 1.5;
  EXPECT_THROW(generate_synthetic(spec), Error);
}

}  // namespace
}  // namespace wts

#include <gtest/gtest.h>

#include "hemaclass/classifiers/head.hpp"
#include "hemaclass/hash.hpp"
#include "test_support.hpp"

using namespace hemaclass;

namespace {

std::vector<HeadParams> all_heads() {
  SvmParams svm;
  svm.gamma = 0.25;
  svm.C = 3.0;
  ForestParams forest;
  forest.trees = 7;
  forest.seed = 5;
  GbtParams gbt;
  gbt.rounds = 4;
  gbt.max_depth = 3;
  return {KnnParams{3}, svm, forest, gbt};
}

}  // namespace

TEST(HeadIo, RoundTripIsByteStableForEveryKind) {
  const auto d = testing_support::gaussian_blobs(120, 4, 3, 2.0, 33);
  for (const auto& params : all_heads()) {
    auto head = fit_head(d.x, d.y, params, 3, 2);
    head.metadata = {{"params", params_to_json(params)}, {"cv_mean_accuracy", 0.93}};
    const auto bytes = encode_head(head);
    const auto back = decode_head(bytes);
    EXPECT_EQ(back.kind(), head.kind());
    EXPECT_EQ(back.standardizer, head.standardizer);
    EXPECT_EQ(back.metadata, head.metadata);
    EXPECT_EQ(sha256_hex(encode_head(back)), sha256_hex(bytes)) << head_kind_name(head.kind());
    EXPECT_EQ(predict_head(back, d.x), predict_head(head, d.x)) << head_kind_name(head.kind());
  }
}

TEST(HeadIo, FileRoundTrip) {
  testing_support::TempDir dir;
  const auto d = testing_support::gaussian_blobs(40, 3, 2, 2.0, 1);
  const auto head = fit_head(d.x, d.y, KnnParams{1}, 2);
  write_head(dir / "m.head", head);
  EXPECT_EQ(encode_head(read_head(dir / "m.head")), encode_head(head));
  EXPECT_THROW(read_head(dir / "missing.head"), IoError);
}

TEST(HeadIo, CorruptionIsDetected) {
  const auto d = testing_support::gaussian_blobs(40, 3, 2, 2.0, 1);
  const auto bytes = encode_head(fit_head(d.x, d.y, KnnParams{1}, 2));
  for (std::size_t pos : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    EXPECT_THROW(decode_head(bad), FormatError) << pos;
  }
  auto truncated = bytes;
  truncated.resize(20);
  EXPECT_THROW(decode_head(truncated), FormatError);
}

TEST(Head, StandardizationOnlyForDistanceHeads) {
  const auto d = testing_support::gaussian_blobs(60, 3, 2, 2.0, 1);
  for (const auto& params : all_heads()) {
    const auto head = fit_head(d.x, d.y, params, 2);
    if (uses_standardization(head.kind())) EXPECT_NE(head.standardizer, Standardizer::identity(3));
    else EXPECT_EQ(head.standardizer, Standardizer::identity(3));
  }
}

TEST(Head, WrongWidthIsDimensionMismatch) {
  const auto d = testing_support::gaussian_blobs(60, 3, 2, 2.0, 1);
  for (const auto& params : all_heads()) {
    const auto head = fit_head(d.x, d.y, params, 2);
    EXPECT_THROW(predict_head(head, Matrix(2, 4)), DimensionMismatch);
  }
}

TEST(Head, NamesAndAliases) {
  EXPECT_EQ(parse_head_kind("xgboost"), HeadKind::Gbt);
  EXPECT_EQ(parse_head_kind("rf"), HeadKind::Forest);
  EXPECT_THROW(parse_head_kind("mlp"), ParameterError);
  EXPECT_EQ(head_display_name(HeadKind::Gbt), "ResNet50-XGBoost");
  EXPECT_EQ(head_display_name(HeadKind::Forest), "ResNet50-RandomForest");
  EXPECT_EQ(head_display_name(HeadKind::Knn, "VGG16"), "VGG16-KNN");
}

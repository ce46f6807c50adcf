#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hemaclass/model_selection.hpp"
#include "test_support.hpp"

using namespace hemaclass;
using nlohmann::json;

namespace {

std::vector<Label> labels_with_sizes(const std::vector<std::size_t>& sizes) {
  std::vector<Label> y;
  for (std::size_t c = 0; c < sizes.size(); ++c) y.insert(y.end(), sizes[c], static_cast<Label>(c));
  return y;
}

// Two tight clusters, 90 + 30 points, far apart.
testing_support::Blobs imbalanced_clusters(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  testing_support::Blobs b{Matrix(120, 2), std::vector<Label>(120)};
  for (std::size_t i = 0; i < 120; ++i) {
    b.y[i] = i < 90 ? 0 : 1;
    b.x(i, 0) = g(rng) + (b.y[i] == 0 ? -5.0 : 5.0);
    b.x(i, 1) = g(rng);
  }
  return b;
}

}  // namespace

TEST(KFold, FoldSizesForSmallSplit) {
  const auto y = labels_with_sizes({33, 31, 12, 12, 14, 28, 15, 23});
  const auto folds = kfold_indices(y, 5, 42);
  std::vector<std::size_t> sizes;
  for (const auto& f : folds) sizes.push_back(f.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{34, 34, 34, 33, 33}));
}

TEST(KFold, TwoClassesTenSamples) {
  const auto y = labels_with_sizes({5, 5});
  const auto folds = kfold_indices(y, 5, 1);
  for (const auto& f : folds) {
    ASSERT_EQ(f.size(), 2u);
    EXPECT_NE(y[f[0]], y[f[1]]);
  }
}

TEST(KFold, TooFewMembersNamesClass) {
  const auto y = labels_with_sizes({10, 3});
  try {
    kfold_indices(y, 5, 1, {"big", "tiny"});
    FAIL() << "expected ParameterError";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos);
  }
  EXPECT_THROW(kfold_indices(y, 1, 1), ParameterError);
}

TEST(KFoldProperty, PartitionAndStratification) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng() % 9;
    std::vector<std::size_t> sizes(2 + rng() % 6);
    for (auto& s : sizes) s = k + rng() % 40;
    const auto y = labels_with_sizes(sizes);
    const auto folds = kfold_indices(y, k, rng());
    std::vector<int> seen(y.size(), 0);
    std::size_t lo = y.size();
    std::size_t hi = 0;
    for (const auto& f : folds) {
      for (auto i : f) ++seen[i];
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    EXPECT_LE(hi - lo, 1u);
    for (int s : seen) EXPECT_EQ(s, 1);
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      std::size_t clo = y.size();
      std::size_t chi = 0;
      for (const auto& f : folds) {
        const auto n = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [&](auto i) { return y[i] == c; }));
        clo = std::min(clo, n);
        chi = std::max(chi, n);
      }
      EXPECT_LE(chi - clo, 1u);
    }
  }
}

TEST(Grid, ExpansionOrderAndDefaults) {
  const auto g = grid_from_json(HeadKind::Gbt, json{{"rounds", {1, 2}}, {"eta", {0.1, 0.3}}}, 5, 0);
  const auto pts = expand_grid(g);
  ASSERT_EQ(pts.size(), 4u);
  // keys are sorted: eta varies slowest
  EXPECT_EQ(pts[1][0].second, 0.1);
  EXPECT_EQ(pts[1][1].second, 2);
  EXPECT_EQ(expand_grid(load_grid(json::object(), HeadKind::Svm, 5, 0)).size(), 32u);
  EXPECT_EQ(expand_grid(load_grid(json::object(), HeadKind::Knn, 5, 0)).size(), 6u);
  EXPECT_THROW(grid_from_json(HeadKind::Knn, json{{"k", json::array()}}, 5, 0), ParameterError);
}

TEST(Grid, ParamsFromPoint) {
  const auto p = std::get<SvmParams>(params_from_point(HeadKind::Svm, {{"kernel", "rbf"}, {"gamma", "1/D"}, {"C", 10}}, 2048, 0));
  EXPECT_DOUBLE_EQ(p.gamma, 1.0 / 2048.0);
  EXPECT_EQ(p.C, 10.0);
  const auto f = std::get<ForestParams>(params_from_point(HeadKind::Forest, {{"max_depth", "inf"}, {"trees", 300}}, 4, 7));
  EXPECT_EQ(f.max_depth, 0u);
  EXPECT_EQ(f.seed, 7u);
  EXPECT_THROW(params_from_point(HeadKind::Knn, {{"neighbours", 3}}, 4, 0), ParameterError);
  EXPECT_THROW(params_from_point(HeadKind::Knn, {{"k", 2.5}}, 4, 0), ParameterError);
}

TEST(GridSearch, SinglePointGrid) {
  const auto d = testing_support::gaussian_blobs(60, 3, 3, 3.0, 2);
  const auto g = grid_from_json(HeadKind::Knn, json{{"k", {3}}}, 5, 0);
  const auto r = grid_search(d.x, d.y, 3, g);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_EQ(r.points[0].rank, 1u);
  EXPECT_EQ(std::get<KnnModel>(r.model.model).params.k, 3u);
}

TEST(GridSearch, SmallKBeatsHugeK) {
  const auto d = imbalanced_clusters(5);
  const auto g = grid_from_json(HeadKind::Knn, json{{"k", {1, 101}}}, 10, 42);
  const auto r = grid_search(d.x, d.y, 2, g);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_FALSE(r.points[1].failed);
  EXPECT_EQ(r.points[0].mean_accuracy, 1.0);
  EXPECT_LT(r.points[1].mean_accuracy, 1.0);
  EXPECT_EQ(r.best, 0u);
}

TEST(GridSearch, FailedPointsExcluded) {
  const auto d = imbalanced_clusters(5);
  // With five folds each training fold has 96 rows, so k=101 cannot be fit.
  const auto g = grid_from_json(HeadKind::Knn, json{{"k", {1, 101}}}, 5, 42);
  const auto r = grid_search(d.x, d.y, 2, g);
  EXPECT_TRUE(r.points[1].failed);
  EXPECT_EQ(r.points[1].rank, 0u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_NE(cv_result_csv(r).find("failed: fold 1"), std::string::npos);
  const auto all_bad = grid_from_json(HeadKind::Knn, json{{"k", {500}}}, 5, 42);
  EXPECT_THROW(grid_search(d.x, d.y, 2, all_bad), TrainingError);
}

TEST(GridSearch, TiesPreferSimplerModel) {
  const auto d = testing_support::gaussian_blobs(100, 2, 2, 20.0, 3);
  const auto knn = grid_search(d.x, d.y, 2, grid_from_json(HeadKind::Knn, json{{"k", {1, 3, 5}}}, 5, 0));
  EXPECT_EQ(std::get<KnnModel>(knn.model.model).params.k, 5u);
  const auto svm = grid_search(d.x, d.y, 2,
                               grid_from_json(HeadKind::Svm, json{{"kernel", {"rbf", "linear"}}, {"C", {10, 1}}, {"gamma", {0.5}}}, 5, 0));
  const auto& sp = std::get<SvmModel>(svm.model.model).params;
  EXPECT_EQ(sp.kernel, KernelKind::Linear);
  EXPECT_EQ(sp.C, 1.0);
  // gamma is irrelevant for linear, so the duplicate linear points collapse.
  EXPECT_EQ(svm.points.size(), 4u);
}

TEST(GridSearchProperty, DeterministicAndJobIndependent) {
  const auto d = testing_support::gaussian_blobs(90, 4, 3, 1.0, 11);
  const auto g = grid_from_json(HeadKind::Forest, json{{"trees", {5, 10}}, {"max_depth", {2, "inf"}}}, 3, 17);
  const auto a = grid_search(d.x, d.y, 3, g, 1);
  const auto b = grid_search(d.x, d.y, 3, g, 4);
  EXPECT_EQ(cv_result_csv(a), cv_result_csv(b));
  EXPECT_EQ(encode_head(a.model), encode_head(b.model));
}

TEST(GridSearch, CsvShape) {
  const auto d = testing_support::gaussian_blobs(60, 3, 3, 3.0, 2);
  const auto r = grid_search(d.x, d.y, 3, grid_from_json(HeadKind::Knn, json{{"k", {1, 3}}}, 4, 0));
  const auto csv = cv_result_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "point,params,fold_1,fold_2,fold_3,fold_4,mean_accuracy,rank,status");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("chosen"), std::string::npos);
}

TEST(GridSearch, UndersizedClassIsTrainingError) {
  const auto d = testing_support::gaussian_blobs(23, 2, 2, 2.0, 1);
  Matrix x = d.x;
  std::vector<Label> y(23, 0);
  y[0] = y[1] = y[2] = 1;
  EXPECT_THROW(grid_search(x, y, 2, grid_from_json(HeadKind::Knn, json{{"k", {1}}}, 5, 0)), TrainingError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "neurosense/csv.hpp"
#include "neurosense/preprocess.hpp"
#include "support/oracles.hpp"

using namespace neurosense;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// counts[name] rows of class `name`, one feature holding the row index.
Dataset make_counts(const std::vector<std::pair<std::string, std::size_t>>& counts, std::size_t dim = 1) {
  std::vector<std::string> names;
  for (const auto& [n, c] : counts) names.push_back(n);
  Dataset ds;
  ds.encoding = LabelEncoding::from_names(names);
  ds.n_features = dim;
  for (std::size_t j = 0; j < dim; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  std::size_t row = 0;
  for (const auto& [n, c] : counts) {
    for (std::size_t i = 0; i < c; ++i, ++row) {
      for (std::size_t j = 0; j < dim; ++j) ds.features.push_back(static_cast<double>(row * dim + j));
      ds.labels.push_back(ds.encoding.encode(n));
      ds.sample_ids.push_back("s" + std::to_string(row));
    }
  }
  return ds;
}

std::vector<std::size_t> counts_of(const Dataset& ds) { return ds.class_counts(); }

}  // namespace

TEST(FilterRare, DropsBelowThresholdAndReencodes) {
  auto ds = make_counts({{"A", 5}, {"B", 1}});
  auto out = filter_rare_classes(ds, 2);
  EXPECT_EQ(out.encoding.names(), std::vector<std::string>{"A"});
  EXPECT_EQ(out.rows(), 5u);
  EXPECT_EQ(out.sample_ids.front(), "s0");
}

TEST(FilterRare, NoOpWhenAllSurvive) {
  auto ds = make_counts({{"A", 5}, {"B", 5}});
  EXPECT_EQ(filter_rare_classes(ds, 2), ds);
}

TEST(FilterRare, EmptyResult) {
  try {
    filter_rare_classes(make_counts({{"A", 1}, {"B", 1}}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_result);
  }
}

TEST(FilterRare, RemapsSurvivingIndices) {
  auto ds = make_counts({{"A", 1}, {"B", 3}, {"C", 2}});
  auto out = filter_rare_classes(ds, 2);
  EXPECT_EQ(out.encoding.names(), (std::vector<std::string>{"B", "C"}));
  EXPECT_EQ(out.labels, (std::vector<ClassIndex>{0, 0, 0, 1, 1}));
  EXPECT_EQ(out.row(0)[0], 1.0);
}

TEST(ImputeZero, ReplacesOnlyMissing) {
  Dataset ds = make_counts({{"A", 3}}, 3);
  ds.features = {1.0, kNaN, 3.0, 4.0, 5.0, 6.0, kNaN, kNaN, kNaN};
  auto out = impute_zero(ds);
  EXPECT_EQ(out.features, (std::vector<double>{1.0, 0.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0, 0.0}));
}

TEST(StratifiedSplit, ProportionalCounts) {
  auto ds = make_counts({{"A", 60}, {"B", 40}});
  auto split = stratified_split(ds, 0.2, 1);
  EXPECT_EQ(counts_of(split.holdout), (std::vector<std::size_t>{12, 8}));
  EXPECT_EQ(counts_of(split.train), (std::vector<std::size_t>{48, 32}));
}

TEST(StratifiedSplit, DeterministicAndDisjointCover) {
  auto ds = make_counts({{"A", 37}, {"B", 23}, {"C", 11}});
  auto a = stratified_split(ds, 0.2, 99);
  auto b = stratified_split(ds, 0.2, 99);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.holdout, b.holdout);
  std::vector<std::string> all = a.train.sample_ids;
  all.insert(all.end(), a.holdout.sample_ids.begin(), a.holdout.sample_ids.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_EQ(all.size(), ds.rows());
  auto c = stratified_split(ds, 0.2, 100);
  EXPECT_NE(a.holdout.sample_ids, c.holdout.sample_ids);
}

TEST(StratifiedSplit, AtLeastOne) {
  auto split = stratified_split(make_counts({{"A", 2}}), 0.2, 1);
  EXPECT_EQ(split.holdout.rows(), 1u);
  EXPECT_EQ(split.train.rows(), 1u);
}

TEST(StratifiedSplit, ClassTooSmall) {
  try {
    stratified_split(make_counts({{"A", 5}, {"B", 1}}), 0.2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::class_too_small);
  }
}

TEST(StratifiedSplit, ProportionsWithinOneSample) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::string, std::size_t>> counts;
    for (int c = 0; c < 4; ++c) counts.emplace_back("c" + std::to_string(c), 2 + rng() % 80);
    const double f = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    auto split = stratified_split(make_counts(counts), f, trial);
    auto hold = counts_of(split.holdout);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      EXPECT_LE(std::abs(static_cast<double>(hold[c]) - f * static_cast<double>(counts[c].second)), 1.0);
    }
  }
}

TEST(Smote, BalancesToMajorityAndAppends) {
  auto ds = make_counts({{"maj", 50}, {"min", 10}}, 2);
  auto out = smote_balance(ds, {5, 7});
  EXPECT_EQ(counts_of(out), (std::vector<std::size_t>{50, 50}));
  EXPECT_EQ(out.rows(), 100u);
  for (std::size_t i = 0; i < ds.rows(); ++i) EXPECT_EQ(out.sample_ids[i], ds.sample_ids[i]);
  for (std::size_t i = ds.rows(); i < out.rows(); ++i) EXPECT_EQ(out.labels[i], 1u);
}

TEST(Smote, SyntheticRowsLieOnNeighbourSegments) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset ds = make_counts({{"a", 30}, {"b", 9}}, 3);
  for (auto& v : ds.features) v = g(rng);
  const std::size_t k = 4;
  auto out = smote_balance(ds, {k, 3});

  std::vector<std::vector<double>> minority;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.labels[i] == 1) minority.emplace_back(ds.row(i).begin(), ds.row(i).end());
  }
  for (std::size_t i = ds.rows(); i < out.rows(); ++i) {
    const std::vector<double> s(out.row(i).begin(), out.row(i).end());
    bool found = false;
    for (std::size_t x = 0; x < minority.size() && !found; ++x) {
      for (std::size_t n : oracle::knn(minority, x, k)) {
        auto [delta, resid] = oracle::segment_fit(minority[x], minority[n], s);
        if (resid < 1e-9 && delta >= -1e-12 && delta <= 1 + 1e-12) {
          found = true;
          break;
        }
      }
    }
    EXPECT_TRUE(found) << "synthetic row " << i;
  }
}

TEST(Smote, DeterministicUnderSeed) {
  auto ds = make_counts({{"maj", 20}, {"min", 7}}, 2);
  EXPECT_EQ(smote_balance(ds, {3, 5}), smote_balance(ds, {3, 5}));
}

TEST(Smote, ClassSmallerThanK) {
  try {
    smote_balance(make_counts({{"maj", 20}, {"min", 5}}), {5, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::class_smaller_than_k);
  }
}

TEST(Smote, AlreadyBalancedIsUnchanged) {
  auto ds = make_counts({{"a", 10}, {"b", 10}});
  EXPECT_EQ(smote_balance(ds, {}), ds);
}

TEST(Standardize, FitExamples) {
  Dataset ds = make_counts({{"A", 3}}, 2);
  ds.features = {1, 7, 2, 7, 3, 7};
  auto s = standardize_fit(ds);
  EXPECT_DOUBLE_EQ(s.means[0], 2.0);
  EXPECT_NEAR(s.stddevs[0], 0.816496580927726, 1e-12);
  EXPECT_EQ(s.stddevs[1], 0.0);
  EXPECT_TRUE(s.zero_variance[1]);
  EXPECT_FALSE(s.zero_variance[0]);

  auto z = standardize_apply(s, ds);
  EXPECT_NEAR(z.row(0)[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(z.row(1)[0], 0.0, 1e-15);
  EXPECT_NEAR(z.row(2)[0], 1.224744871391589, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.row(i)[1], 0.0);
}

TEST(Standardize, TwoIdenticalRows) {
  Dataset ds = make_counts({{"A", 2}}, 1);
  ds.features = {4.0, 4.0};
  EXPECT_EQ(standardize_fit(ds).stddevs[0], 0.0);
}

TEST(Standardize, ZeroMeanUnitVarianceOnFittingData) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(5.0, 3.0);
  Dataset ds = make_counts({{"A", 200}}, 4);
  for (auto& v : ds.features) v = g(rng);
  auto z = standardize_apply(standardize_fit(ds), ds);
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) m += z.row(i)[j];
    m /= 200.0;
    for (std::size_t i = 0; i < z.rows(); ++i) v += (z.row(i)[j] - m) * (z.row(i)[j] - m);
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_LT(std::abs(std::sqrt(v / 200.0) - 1.0), 1e-9);
  }
}

TEST(Standardize, DimensionMismatch) {
  auto s = standardize_fit(make_counts({{"A", 3}}, 2));
  try {
    standardize_apply(s, make_counts({{"A", 3}}, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(Synthetic, ShapeAndDeterminism) {
  SyntheticConfig cfg;
  cfg.class_count = 3;
  cfg.samples_per_class = 1000;
  cfg.feature_dim = 8;
  cfg.class_means = axis_means(3, 8, 4.0);
  cfg.overlap_sigma = 1.0;
  auto a = generate_synthetic(cfg);
  EXPECT_EQ(a.rows(), 3000u);
  EXPECT_EQ(a.n_features, 8u);
  EXPECT_EQ(a.class_counts(), (std::vector<std::size_t>{1000, 1000, 1000}));
  EXPECT_EQ(generate_synthetic(cfg), a);
  cfg.seed = 43;
  EXPECT_NE(generate_synthetic(cfg), a);
}

TEST(Synthetic, TinySigmaCollapsesToMeans) {
  SyntheticConfig cfg;
  cfg.class_count = 2;
  cfg.samples_per_class = 10;
  cfg.feature_dim = 2;
  cfg.class_means = axis_means(2, 2, 1.0);
  cfg.overlap_sigma = 1e-12;
  auto ds = generate_synthetic(cfg);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ds.row(i)[j], cfg.class_means[ds.labels[i]][j], 1e-10);
  }
}

TEST(Synthetic, RejectsDuplicateMeans) {
  SyntheticConfig cfg;
  cfg.class_count = 2;
  cfg.feature_dim = 2;
  cfg.class_means = {{0, 0}, {0, 0}};
  EXPECT_THROW(generate_synthetic(cfg), Error);
}

TEST(Csv, ReadsMissingAndWritesRoundTrip) {
  std::istringstream in("a,b,what\n1.5,,Normal\n,2,DoS\n3,4e-3,Normal\n");
  auto ds = csv::read_dataset(in, {});
  EXPECT_EQ(ds.encoding.names(), (std::vector<std::string>{"DoS", "Normal"}));
  EXPECT_EQ(ds.labels, (std::vector<ClassIndex>{1, 0, 1}));
  EXPECT_TRUE(std::isnan(ds.row(0)[1]));
  EXPECT_EQ(ds.sample_ids[2], "row-2");

  std::ostringstream out;
  csv::write_dataset(out, ds);
  std::istringstream back(out.str());
  EXPECT_EQ(csv::read_dataset(back, {}), ds);
}

TEST(Csv, RejectsNonNumericFeatures) {
  std::istringstream in("a,what\nhello,Normal\n");
  try {
    csv::read_dataset(in, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
  }
}

TEST(Csv, MissingLabelColumn) {
  std::istringstream in("a,b\n1,2\n");
  EXPECT_THROW(csv::read_dataset(in, {}), Error);
}

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>

#include "neurosense/bundle.hpp"
#include "neurosense/forest.hpp"
#include "neurosense/logistic.hpp"
#include "neurosense/preprocess.hpp"

namespace fixtures {

// Directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("neurosense-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Deterministic fake clock advancing 1 ms per call.
struct StepClock {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1'700'000'000'000'000);
  std::int64_t operator()() const { return *now += 1000; }
};

inline neurosense::Dataset synthetic(double sigma, std::size_t per_class, std::uint64_t seed,
                                     std::size_t classes = 3, std::size_t dim = 4) {
  neurosense::SyntheticConfig cfg;
  cfg.class_count = classes;
  cfg.samples_per_class = per_class;
  cfg.feature_dim = dim;
  cfg.class_means = neurosense::axis_means(classes, dim, 2.0);
  cfg.overlap_sigma = sigma;
  cfg.seed = seed;
  return neurosense::generate_synthetic(cfg);
}

// Small trained bundle over 3 synthetic classes with a global 0.4 policy.
inline neurosense::ModelBundle small_bundle(double sigma = 0.8, std::uint64_t seed = 3) {
  using namespace neurosense;
  auto raw = synthetic(sigma, 60, seed);
  ModelBundle b;
  b.encoding = raw.encoding;
  b.feature_names = raw.feature_names;
  b.standardizer = standardize_fit(raw);
  auto z = standardize_apply(b.standardizer, raw);
  b.logistic = train_logistic(z, {.l2_lambda = 1e-3});
  b.forest = train_forest(z, {.n_trees = 10, .max_depth = 6, .seed = seed});
  b.policy = ThresholdPolicy::global(0.4);
  b.normal_class = "class_0";
  return b;
}

}  // namespace fixtures

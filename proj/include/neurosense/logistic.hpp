#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense {

// n / (C * n_c); classes absent from the data get weight 1.
inline std::vector<double> balanced_class_weights(const Dataset& ds) {
  const auto counts = ds.class_counts();
  const double n = static_cast<double>(ds.rows());
  const double c = static_cast<double>(counts.size());
  std::vector<double> w(counts.size(), 1.0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) w[k] = n / (c * static_cast<double>(counts[k]));
  }
  return w;
}

struct LogisticDiagnostics {
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_max_norm = 0.0;
  std::vector<double> loss_history;  // loss after each accepted step, starting with the initial loss
};

struct LogisticModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> weights;  // n_classes x n_features, row-major
  std::vector<double> biases;
  double l2_lambda = 0.0;
  std::vector<double> class_weights;
  LogisticDiagnostics diagnostics;

  ProbabilityVector predict_proba(std::span<const double> x) const {
    if (x.size() != n_features) {
      throw Error(Errc::dimension_mismatch, "logistic model expects " + std::to_string(n_features) +
                                                " features, got " + std::to_string(x.size()));
    }
    std::vector<double> z(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double s = biases[c];
      const double* w = weights.data() + c * n_features;
      for (std::size_t j = 0; j < n_features; ++j) s += w[j] * x[j];
      z[c] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    for (double& v : z) v = std::exp(v - mx);
    return normalize_scores(std::move(z));
  }
};

namespace logistic {

struct Objective {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Class-weighted mean cross-entropy plus (lambda/2)||W||^2; biases are not
// penalized. Parameters are packed as [W row-major | b].
inline Objective evaluate(std::span<const double> params, const Dataset& data, std::span<const double> class_weights,
                          double l2_lambda) {
  const std::size_t k = data.encoding.size();
  const std::size_t d = data.n_features;
  const std::size_t nw = k * d;
  Objective out;
  out.gradient.assign(params.size(), 0.0);
  std::vector<double> z(k);
  const double inv_n = 1.0 / static_cast<double>(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto x = data.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      double s = params[nw + c];
      for (std::size_t j = 0; j < d; ++j) s += params[c * d + j] * x[j];
      z[c] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - mx);
    const double log_sum = mx + std::log(sum);
    const ClassIndex y = data.labels[i];
    const double w = class_weights[y] * inv_n;
    out.loss += w * (log_sum - z[y]);
    for (std::size_t c = 0; c < k; ++c) {
      const double r = w * (std::exp(z[c] - log_sum) - (c == y ? 1.0 : 0.0));
      for (std::size_t j = 0; j < d; ++j) out.gradient[c * d + j] += r * x[j];
      out.gradient[nw + c] += r;
    }
  }
  for (std::size_t p = 0; p < nw; ++p) {
    out.loss += 0.5 * l2_lambda * params[p] * params[p];
    out.gradient[p] += l2_lambda * params[p];
  }
  return out;
}

inline double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace logistic

struct LogisticOptions {
  double l2_lambda = 1e-3;
  double tolerance = 1e-6;
  std::size_t max_iters = 1000;
  std::size_t history = 10;
};

// Limited-memory BFGS from zero initialization with Armijo backtracking. Every
// accepted step strictly decreases the objective.
inline LogisticModel train_logistic(const Dataset& train, const LogisticOptions& opt = {}) {
  if (opt.l2_lambda < 0.0) throw Error(Errc::invalid_argument, "l2_lambda must be >= 0");
  if (train.rows() == 0) throw Error(Errc::empty_input, "no training rows");
  train.check();
  const std::size_t k = train.encoding.size();
  const std::size_t d = train.n_features;

  LogisticModel model;
  model.n_classes = k;
  model.n_features = d;
  model.l2_lambda = opt.l2_lambda;
  model.class_weights = balanced_class_weights(train);

  std::vector<double> theta(k * d + k, 0.0);
  auto obj = logistic::evaluate(theta, train, model.class_weights, opt.l2_lambda);
  auto& diag = model.diagnostics;
  diag.loss_history.push_back(obj.loss);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  std::vector<double> dir(theta.size()), next(theta.size());
  std::vector<double> alpha_buf;

  while (true) {
    diag.gradient_max_norm = logistic::max_norm(obj.gradient);
    if (diag.gradient_max_norm < opt.tolerance) {
      diag.converged = true;
      break;
    }
    if (diag.iterations >= opt.max_iters) break;

    // Two-loop recursion.
    for (std::size_t i = 0; i < theta.size(); ++i) dir[i] = -obj.gradient[i];
    alpha_buf.assign(mem.size(), 0.0);
    for (std::size_t m = mem.size(); m-- > 0;) {
      alpha_buf[m] = mem[m].rho * logistic::dot(mem[m].s, dir);
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] -= alpha_buf[m] * mem[m].y[i];
    }
    if (!mem.empty()) {
      const auto& last = mem.back();
      const double gamma = logistic::dot(last.s, last.y) / logistic::dot(last.y, last.y);
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t m = 0; m < mem.size(); ++m) {
      const double beta = mem[m].rho * logistic::dot(mem[m].y, dir);
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] += (alpha_buf[m] - beta) * mem[m].s[i];
    }
    double slope = logistic::dot(obj.gradient, dir);
    if (!(slope < 0.0)) {
      mem.clear();
      for (std::size_t i = 0; i < theta.size(); ++i) dir[i] = -obj.gradient[i];
      slope = logistic::dot(obj.gradient, dir);
    }

    double step = mem.empty() ? std::min(1.0, 1.0 / logistic::max_norm(dir)) : 1.0;
    logistic::Objective trial;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < theta.size(); ++i) next[i] = theta[i] + step * dir[i];
      trial = logistic::evaluate(next, train, model.class_weights, opt.l2_lambda);
      if (trial.loss <= obj.loss + 1e-4 * step * slope && trial.loss < obj.loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent left

    Pair p{std::vector<double>(theta.size()), std::vector<double>(theta.size()), 0.0};
    for (std::size_t i = 0; i < theta.size(); ++i) {
      p.s[i] = next[i] - theta[i];
      p.y[i] = trial.gradient[i] - obj.gradient[i];
    }
    const double sy = logistic::dot(p.s, p.y);
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (mem.size() > opt.history) mem.pop_front();
    }
    theta.swap(next);
    obj = std::move(trial);
    ++diag.iterations;
    diag.loss_history.push_back(obj.loss);
  }

  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * d));
  model.biases.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * d), theta.end());
  return model;
}

}  // namespace neurosense

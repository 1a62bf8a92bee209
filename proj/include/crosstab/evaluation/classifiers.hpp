// Copyright 2026 The Crosstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "crosstab/core/error.hpp"
#include "crosstab/core/random.hpp"
#include "crosstab/nn/tensor.hpp"

namespace crosstab {

using Labels = std::vector<int>;

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  // x: rows x features; y in [0, classes).
  virtual void fit(const nn::MatD& x, const Labels& y, int classes) = 0;
  virtual Labels predict(const nn::MatD& x) const = 0;
};

namespace detail {

inline void check_fit(const nn::MatD& x, const Labels& y, int classes) {
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("classifier needs one label per row");
  if (classes < 1) throw DataError("classifier needs at least one class");
  for (int v : y) {
    if (v < 0 || v >= classes) throw DataError("label out of range");
  }
}

inline int argmax(const Eigen::RowVectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

inline Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& z) {
  const Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace detail

// Multinomial logistic regression with a small L2 penalty, fitted by full-batch
// gradient descent on standardized features.
class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(int iterations = 500, double l2 = 1e-3) : iterations_(iterations), l2_(l2) {}
  std::string name() const override { return "logistic_regression"; }

  void fit(const nn::MatD& x, const Labels& y, int classes) override {
    detail::check_fit(x, y, classes);
    mean_ = x.colwise().mean();
    scale_ = ((x.rowwise() - mean_).array().square().colwise().mean()).sqrt().max(1e-12).matrix();
    const nn::MatD z = standardize(x);
    const auto n = static_cast<double>(x.rows());
    w_ = nn::MatD::Zero(z.cols(), classes);
    b_ = Eigen::RowVectorXd::Zero(classes);
    nn::MatD onehot = nn::MatD::Zero(x.rows(), classes);
    for (nn::Index i = 0; i < x.rows(); ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
    const double lr = 0.5;
    for (int it = 0; it < iterations_; ++it) {
      nn::MatD p = (z * w_).rowwise() + b_;
      for (nn::Index i = 0; i < p.rows(); ++i) p.row(i) = detail::softmax(p.row(i));
      const nn::MatD g = (p - onehot) / n;
      w_ -= lr * (z.transpose() * g + l2_ * w_);
      b_ -= lr * g.colwise().sum();
    }
  }

  Labels predict(const nn::MatD& x) const override {
    const nn::MatD s = (standardize(x) * w_).rowwise() + b_;
    Labels out;
    for (nn::Index i = 0; i < s.rows(); ++i) out.push_back(detail::argmax(s.row(i)));
    return out;
  }

 private:
  nn::MatD standardize(const nn::MatD& x) const {
    return ((x.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
  }
  int iterations_;
  double l2_;
  Eigen::RowVectorXd mean_, scale_, b_;
  nn::MatD w_;
};

// Gaussian naive Bayes with variance smoothing relative to the largest
// feature variance.
class GaussianNaiveBayes final : public Classifier {
 public:
  std::string name() const override { return "naive_bayes"; }

  void fit(const nn::MatD& x, const Labels& y, int classes) override {
    detail::check_fit(x, y, classes);
    const nn::Index d = x.cols();
    mean_ = nn::MatD::Zero(classes, d);
    var_ = nn::MatD::Zero(classes, d);
    log_prior_ = Eigen::RowVectorXd::Constant(classes, -std::numeric_limits<double>::infinity());
    std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
    for (nn::Index i = 0; i < x.rows(); ++i) {
      mean_.row(y[static_cast<std::size_t>(i)]) += x.row(i);
      count[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int k = 0; k < classes; ++k) {
      if (count[static_cast<std::size_t>(k)] > 0) mean_.row(k) /= count[static_cast<std::size_t>(k)];
    }
    for (nn::Index i = 0; i < x.rows(); ++i) {
      const int k = y[static_cast<std::size_t>(i)];
      var_.row(k) += (x.row(i) - mean_.row(k)).array().square().matrix();
    }
    const double smoothing =
        1e-9 * std::max(1e-300, ((x.rowwise() - x.colwise().mean()).array().square().colwise().mean()).maxCoeff());
    for (int k = 0; k < classes; ++k) {
      const double c = count[static_cast<std::size_t>(k)];
      if (c == 0) continue;
      var_.row(k) = (var_.row(k) / c).array() + smoothing;
      log_prior_(k) = std::log(c / static_cast<double>(x.rows()));
    }
    var_ = var_.array().max(smoothing).matrix();
  }

  Labels predict(const nn::MatD& x) const override {
    Labels out;
    for (nn::Index i = 0; i < x.rows(); ++i) {
      Eigen::RowVectorXd score = log_prior_;
      for (nn::Index k = 0; k < mean_.rows(); ++k) {
        if (!std::isfinite(score(k))) continue;
        score(k) -= 0.5 * ((x.row(i) - mean_.row(k)).array().square() / var_.row(k).array() +
                           (2.0 * std::numbers::pi * var_.row(k).array()).log())
                              .sum();
      }
      out.push_back(detail::argmax(score));
    }
    return out;
  }

 private:
  nn::MatD mean_, var_;
  Eigen::RowVectorXd log_prior_;
};

// ---------------------------------------------------------------------------
// Trees

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  Eigen::RowVectorXd value;  // class distribution (classification) or one leaf value
};

struct TreeOptions {
  int max_depth = -1;  // -1: unlimited
  std::size_t min_leaf = 1;
  int max_features = -1;  // -1: all features
};

namespace detail {

// Best threshold split of `rows` on `feature` under an additive impurity
// score. `score(left_stats, right_stats)` is larger for better splits.
template <typename Stats, typename Add, typename Score>
bool best_split_on(const nn::MatD& x, std::vector<std::size_t>& rows, int feature, std::size_t min_leaf,
                   const Stats& zero, Add add, Score score, double& best_score, double& best_threshold) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<nn::Index>(a), feature) < x(static_cast<nn::Index>(b), feature);
  });
  Stats total = zero;
  for (std::size_t r : rows) add(total, r, 1.0);
  Stats left = zero;
  Stats right = total;
  bool found = false;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    add(left, rows[i], 1.0);
    add(right, rows[i], -1.0);
    const double a = x(static_cast<nn::Index>(rows[i]), feature);
    const double b = x(static_cast<nn::Index>(rows[i + 1]), feature);
    if (a == b || i + 1 < min_leaf || rows.size() - i - 1 < min_leaf) continue;
    const double s = score(left, right);
    if (s > best_score + 1e-12) {
      best_score = s;
      best_threshold = 0.5 * (a + b);
      found = true;
    }
  }
  return found;
}

}  // namespace detail

class DecisionTree final : public Classifier {
 public:
  explicit DecisionTree(TreeOptions opt = {}, std::uint64_t seed = 0) : opt_(opt), seed_(seed) {}
  std::string name() const override { return "decision_tree"; }

  void fit(const nn::MatD& x, const Labels& y, int classes) override {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    fit_rows(x, y, classes, rows);
  }

  void fit_rows(const nn::MatD& x, const Labels& y, int classes, std::vector<std::size_t> rows) {
    detail::check_fit(x, y, classes);
    nodes_.clear();
    classes_ = classes;
    Rng rng(derive_seed(seed_, "decision-tree"));
    grow(x, y, rows, 0, rng);
  }

  Eigen::RowVectorXd distribution(const nn::MatD& x, nn::Index i) const {
    int n = 0;
    while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
      const TreeNode& node = nodes_[static_cast<std::size_t>(n)];
      n = x(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(n)].value;
  }

  Labels predict(const nn::MatD& x) const override {
    Labels out;
    for (nn::Index i = 0; i < x.rows(); ++i) out.push_back(detail::argmax(distribution(x, i)));
    return out;
  }

 private:
  int grow(const nn::MatD& x, const Labels& y, std::vector<std::size_t>& rows, int depth, Rng& rng) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::RowVectorXd counts = Eigen::RowVectorXd::Zero(classes_);
    for (std::size_t r : rows) counts(y[r]) += 1.0;
    nodes_[static_cast<std::size_t>(id)].value = counts / static_cast<double>(rows.size());
    const bool pure = (counts.array() > 0).count() <= 1;
    if (pure || (opt_.max_depth >= 0 && depth >= opt_.max_depth) || rows.size() < 2 * opt_.min_leaf) return id;

    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), 0);
    if (opt_.max_features > 0 && opt_.max_features < x.cols()) {
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(static_cast<std::size_t>(opt_.max_features));
    }
    auto gini_mass = [](const Eigen::RowVectorXd& c) {
      const double n = c.sum();
      return n > 0 ? c.squaredNorm() / n : 0.0;  // n * (1 - gini)
    };
    auto add = [&](Eigen::RowVectorXd& s, std::size_t r, double w) { s(y[r]) += w; };
    auto score = [&](const Eigen::RowVectorXd& l, const Eigen::RowVectorXd& r) { return gini_mass(l) + gini_mass(r); };
    double best = gini_mass(counts), threshold = 0.0;
    int feature = -1;
    for (int f : features) {
      if (detail::best_split_on(x, rows, f, opt_.min_leaf, Eigen::RowVectorXd::Zero(classes_).eval(), add, score,
                                best, threshold)) {
        feature = f;
        nodes_[static_cast<std::size_t>(id)].threshold = threshold;
      }
    }
    if (feature < 0) return id;
    threshold = nodes_[static_cast<std::size_t>(id)].threshold;
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x(static_cast<nn::Index>(r), feature) <= threshold ? left : right).push_back(r);
    nodes_[static_cast<std::size_t>(id)].feature = feature;
    const int l = grow(x, y, left, depth + 1, rng);
    const int r = grow(x, y, right, depth + 1, rng);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  TreeOptions opt_;
  std::uint64_t seed_;
  int classes_ = 0;
  std::vector<TreeNode> nodes_;
};

class RandomForest final : public Classifier {
 public:
  explicit RandomForest(int trees = 100, std::uint64_t seed = 0) : trees_(trees), seed_(seed) {}
  std::string name() const override { return "random_forest"; }

  void fit(const nn::MatD& x, const Labels& y, int classes) override {
    detail::check_fit(x, y, classes);
    forest_.clear();
    TreeOptions opt;
    opt.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.cols()))));
    Rng rng(derive_seed(seed_, "random-forest"));
    std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(x.rows()) - 1);
    for (int t = 0; t < trees_; ++t) {
      std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
      for (auto& r : rows) r = pick(rng);
      DecisionTree tree(opt, derive_seed(seed_, "forest-tree", static_cast<std::uint64_t>(t)));
      tree.fit_rows(x, y, classes, rows);
      forest_.push_back(std::move(tree));
    }
  }

  Labels predict(const nn::MatD& x) const override {
    Labels out;
    for (nn::Index i = 0; i < x.rows(); ++i) {
      Eigen::RowVectorXd vote = forest_.front().distribution(x, i);
      for (std::size_t t = 1; t < forest_.size(); ++t) vote += forest_[t].distribution(x, i);
      out.push_back(detail::argmax(vote));
    }
    return out;
  }

 private:
  int trees_;
  std::uint64_t seed_;
  std::vector<DecisionTree> forest_;
};

struct BoostingOptions {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double l2 = 0.0;                 // leaf and split regularisation
  bool second_order_splits = false;  // choose splits by the Newton gain instead of squared error
  double row_subsample = 1.0;
  std::string name = "gradient_boosting";
};

// Softmax gradient boosting with one regression tree per class and round.
// Leaves take a Newton step on the multinomial deviance.
class GradientBoosting final : public Classifier {
 public:
  explicit GradientBoosting(BoostingOptions opt = {}, std::uint64_t seed = 0) : opt_(std::move(opt)), seed_(seed) {}
  std::string name() const override { return opt_.name; }

  void fit(const nn::MatD& x, const Labels& y, int classes) override {
    detail::check_fit(x, y, classes);
    classes_ = classes;
    trees_.clear();
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::RowVectorXd prior = Eigen::RowVectorXd::Constant(classes, 1e-12);
    for (int v : y) prior(v) += 1.0;
    base_ = (prior / static_cast<double>(n)).array().log();
    nn::MatD f = base_.replicate(x.rows(), 1);
    Rng rng(derive_seed(seed_, "boosting"));
    std::bernoulli_distribution keep(opt_.row_subsample);
    for (int round = 0; round < opt_.rounds; ++round) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n; ++i) {
        if (opt_.row_subsample >= 1.0 || keep(rng)) rows.push_back(i);
      }
      if (rows.size() < 2) continue;
      std::vector<std::vector<TreeNode>> round_trees;
      nn::MatD p(x.rows(), classes);
      for (nn::Index i = 0; i < x.rows(); ++i) p.row(i) = detail::softmax(f.row(i));
      for (int k = 0; k < classes; ++k) {
        std::vector<double> g(n), h(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double pk = p(static_cast<nn::Index>(i), k);
          g[i] = pk - (y[i] == k ? 1.0 : 0.0);
          h[i] = std::max(pk * (1.0 - pk), 1e-12);
        }
        std::vector<TreeNode> tree;
        std::vector<std::size_t> work = rows;
        grow(x, g, h, work, 0, tree);
        for (nn::Index i = 0; i < x.rows(); ++i) f(i, k) += opt_.learning_rate * leaf(tree, x, i);
        round_trees.push_back(std::move(tree));
      }
      trees_.push_back(std::move(round_trees));
    }
  }

  Labels predict(const nn::MatD& x) const override {
    Labels out;
    for (nn::Index i = 0; i < x.rows(); ++i) {
      Eigen::RowVectorXd f = base_;
      for (const auto& round : trees_) {
        for (int k = 0; k < classes_; ++k) f(k) += opt_.learning_rate * leaf(round[static_cast<std::size_t>(k)], x, i);
      }
      out.push_back(detail::argmax(f));
    }
    return out;
  }

 private:
  static double leaf(const std::vector<TreeNode>& tree, const nn::MatD& x, nn::Index i) {
    int n = 0;
    while (tree[static_cast<std::size_t>(n)].feature >= 0) {
      const TreeNode& node = tree[static_cast<std::size_t>(n)];
      n = x(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    return tree[static_cast<std::size_t>(n)].value(0);
  }

  int grow(const nn::MatD& x, const std::vector<double>& g, const std::vector<double>& h,
           std::vector<std::size_t>& rows, int depth, std::vector<TreeNode>& tree) const {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    double gs = 0.0, hs = 0.0;
    for (std::size_t r : rows) {
      gs += g[r];
      hs += h[r];
    }
    // Newton step scaled by (K - 1) / K for the multinomial deviance.
    const double shrink = classes_ > 1 ? static_cast<double>(classes_ - 1) / classes_ : 1.0;
    tree[static_cast<std::size_t>(id)].value = Eigen::RowVectorXd::Constant(1, -shrink * gs / (hs + opt_.l2));
    if (depth >= opt_.max_depth || rows.size() < 2) return id;

    using Stats = Eigen::Vector3d;  // (sum g, sum h, count)
    auto add = [&](Stats& s, std::size_t r, double w) {
      s(0) += w * g[r];
      s(1) += w * h[r];
      s(2) += w;
    };
    auto gain = [&](const Stats& s) {
      return opt_.second_order_splits ? s(0) * s(0) / (s(1) + opt_.l2) : (s(2) > 0 ? s(0) * s(0) / s(2) : 0.0);
    };
    auto score = [&](const Stats& l, const Stats& r) { return gain(l) + gain(r); };
    Stats total = Stats::Zero();
    for (std::size_t r : rows) add(total, r, 1.0);
    double best = gain(total), threshold = 0.0, chosen = 0.0;
    int feature = -1;
    for (int f = 0; f < x.cols(); ++f) {
      if (detail::best_split_on(x, rows, f, 1, Stats::Zero().eval(), add, score, best, threshold)) {
        feature = f;
        chosen = threshold;
      }
    }
    if (feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x(static_cast<nn::Index>(r), feature) <= chosen ? left : right).push_back(r);
    tree[static_cast<std::size_t>(id)].feature = feature;
    tree[static_cast<std::size_t>(id)].threshold = chosen;
    const int l = grow(x, g, h, left, depth + 1, tree);
    const int r = grow(x, g, h, right, depth + 1, tree);
    tree[static_cast<std::size_t>(id)].left = l;
    tree[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  BoostingOptions opt_;
  std::uint64_t seed_;
  int classes_ = 0;
  Eigen::RowVectorXd base_;
  std::vector<std::vector<std::vector<TreeNode>>> trees_;
};

inline std::vector<std::string> classifier_names() {
  return {"logistic_regression", "naive_bayes", "decision_tree", "random_forest", "gradient_boosting",
          "newton_boosting"};
}

inline std::unique_ptr<Classifier> make_classifier(const std::string& name, std::uint64_t seed) {
  if (name == "logistic_regression") return std::make_unique<LogisticRegression>();
  if (name == "naive_bayes") return std::make_unique<GaussianNaiveBayes>();
  if (name == "decision_tree") return std::make_unique<DecisionTree>(TreeOptions{}, seed);
  if (name == "random_forest") return std::make_unique<RandomForest>(100, seed);
  if (name == "gradient_boosting") return std::make_unique<GradientBoosting>(BoostingOptions{}, seed);
  if (name == "newton_boosting") {
    BoostingOptions o;
    o.rounds = 50;
    o.learning_rate = 0.3;
    o.max_depth = 4;
    o.l2 = 1.0;
    o.second_order_splits = true;
    o.row_subsample = 0.8;
    o.name = "newton_boosting";
    return std::make_unique<GradientBoosting>(o, seed);
  }
  throw ConfigError("unknown classifier '" + name + "'");
}

}  // namespace crosstab

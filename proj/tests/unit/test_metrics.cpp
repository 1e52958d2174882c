#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "asu/error.hpp"
#include "asu/metrics.hpp"
#include "asu/rng.hpp"

namespace asu {
namespace {

using Idx = std::vector<std::size_t>;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an asu::Error";
  return ErrorCode::io;
}

// Per-sample counting, no confusion matrix involved.
struct Oracle {
  double uar;
  double f1;
};

Oracle brute_force(const Idx& preds, const Idx& labels, std::size_t c) {
  double recall_sum = 0.0;
  int supported = 0;
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (labels[i] == k && preds[i] == k) ++tp;
      if (labels[i] != k && preds[i] == k) ++fp;
      if (labels[i] == k && preds[i] != k) ++fn;
    }
    if (tp + fn > 0) {
      recall_sum += static_cast<double>(tp) / (tp + fn);
      ++supported;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    f1_sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return {recall_sum / supported, f1_sum / static_cast<double>(c)};
}

TEST(Confusion, HandCounted) {
  const Idx labels{0, 0, 1};
  const Idx preds{0, 1, 1};
  const auto m = confusion_matrix(preds, labels, 2);
  ConfusionMatrix expected(2, 2);
  expected << 1, 1, 0, 1;
  EXPECT_EQ(m, expected);
  const Idx ident{0, 1, 2};
  const auto p = confusion_matrix(ident, ident, 3);
  EXPECT_EQ(p.trace(), 3);
  EXPECT_EQ(p.sum(), 3);
}

TEST(Confusion, EmptyAndErrors) {
  const auto z = confusion_matrix({}, {}, 4);
  EXPECT_EQ(z, ConfusionMatrix::Zero(4, 4));
  const Idx a{0, 1};
  const Idx b{0};
  const Idx bad{0, 4};
  EXPECT_EQ(code_of([&] { confusion_matrix(a, b, 2); }), ErrorCode::length_mismatch);
  EXPECT_EQ(code_of([&] { confusion_matrix(bad, a, 4); }), ErrorCode::out_of_range);
  EXPECT_EQ(code_of([&] { uar(z); }), ErrorCode::all_rows_zero);
  EXPECT_EQ(code_of([&] { macro_f1(z); }), ErrorCode::all_rows_zero);
}

TEST(Metrics, Examples) {
  const Idx four{0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_EQ(uar(confusion_matrix(four, four, 4)), 1.0);
  EXPECT_EQ(macro_f1(confusion_matrix(four, four, 4)), 1.0);
  const Idx constant(8, 2);
  EXPECT_DOUBLE_EQ(uar(confusion_matrix(constant, four, 4)), 0.25);
  const Idx labels{0, 0, 1, 1};
  const Idx half{0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(uar(confusion_matrix(half, labels, 2)), 0.75);
  const Idx l3{0, 0, 1};
  const Idx p3{0, 1, 1};
  EXPECT_NEAR(macro_f1(confusion_matrix(p3, l3, 2)), 2.0 / 3.0, 1e-15);
}

TEST(Metrics, ZeroSupportAndNeverPredicted) {
  // Class 2 has no true instances and is never predicted: excluded from UAR,
  // contributes F1 = 0.
  const Idx labels{0, 1};
  const Idx preds{0, 1};
  const auto m = confusion_matrix(preds, labels, 3);
  EXPECT_EQ(uar(m), 1.0);
  EXPECT_NEAR(macro_f1(m), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(compute_metrics(m).n, 2U);
  EXPECT_EQ(compute_metrics(m).accuracy, 1.0);
}

TEST(MetricsProperty, OracleEquivalence) {
  Engine rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = 1 + uniform_index(rng, 6);
    const auto n = 1 + uniform_index(rng, 50);
    Idx preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = uniform_index(rng, c);
      labels[i] = uniform_index(rng, c);
    }
    const auto o = brute_force(preds, labels, c);
    const auto m = compute_metrics(preds, labels, c);
    EXPECT_NEAR(m.uar, o.uar, 1e-12);
    EXPECT_NEAR(m.macro_f1, o.f1, 1e-12);
    for (double v : {m.uar, m.macro_f1, m.accuracy}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(m.confusion.sum(), static_cast<long long>(n));
    EXPECT_GE(m.confusion.minCoeff(), 0);
  }
}

TEST(MetricsProperty, JointPermutationInvariance) {
  Engine rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = 2 + uniform_index(rng, 5);
    const auto n = 1 + uniform_index(rng, 50);
    Idx preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = uniform_index(rng, c);
      labels[i] = uniform_index(rng, c);
    }
    const auto perm = permutation(n, rng);
    Idx p2(n), l2(n);
    for (std::size_t i = 0; i < n; ++i) {
      p2[i] = preds[perm[i]];
      l2[i] = labels[perm[i]];
    }
    const auto a = compute_metrics(preds, labels, c);
    const auto b = compute_metrics(p2, l2, c);
    EXPECT_EQ(a.uar, b.uar);
    EXPECT_EQ(a.macro_f1, b.macro_f1);
    EXPECT_EQ(a.confusion, b.confusion);
  }
}

Metrics with_uar(double u) {
  Metrics m;
  m.uar = u;
  m.macro_f1 = u / 2;
  m.accuracy = u;
  return m;
}

TEST(Aggregate, FoldStatistics) {
  const std::vector<Metrics> two{with_uar(0.6), with_uar(0.8)};
  const auto agg = aggregate_folds(two);
  EXPECT_NEAR(agg.uar.mean, 0.7, 1e-15);
  EXPECT_NEAR(agg.uar.std, 0.1, 1e-15);
  EXPECT_NEAR(agg.macro_f1.mean, 0.35, 1e-15);
  EXPECT_EQ(agg.folds, 2U);
  const std::vector<Metrics> one{with_uar(0.42)};
  EXPECT_EQ(aggregate_folds(one).uar.mean, 0.42);
  EXPECT_EQ(aggregate_folds(one).uar.std, 0.0);
  const std::vector<Metrics> five(5, with_uar(0.3));
  EXPECT_EQ(aggregate_folds(five).uar.std, 0.0);
  EXPECT_EQ(code_of([] { aggregate_folds({}); }), ErrorCode::empty_list);
  EXPECT_EQ(code_of([] { summarize({}); }), ErrorCode::empty_list);
}

TEST(Aggregate, PooledSumsConfusions) {
  const Idx l1{0, 0, 1};
  const Idx p1{0, 1, 1};
  const Idx l2{1, 1};
  const Idx p2{1, 0};
  const std::vector<Metrics> folds{compute_metrics(p1, l1, 2), compute_metrics(p2, l2, 2)};
  const auto pooled = pool_folds(folds);
  Idx all_l{0, 0, 1, 1, 1};
  Idx all_p{0, 1, 1, 1, 0};
  const auto direct = compute_metrics(all_p, all_l, 2);
  EXPECT_EQ(pooled.confusion, direct.confusion);
  EXPECT_EQ(pooled.uar, direct.uar);
  EXPECT_EQ(pooled.n, 5U);
}

}  // namespace
}  // namespace asu

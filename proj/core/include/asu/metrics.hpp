#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace asu {

/// Row = true class, column = predicted class.
using ConfusionMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

struct Metrics {
  double uar = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::size_t n = 0;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t n_classes);

/// Mean recall over classes with at least one true instance.
double uar(const ConfusionMatrix& confusion);

/// Mean per-class F1 over all classes; F1 is 0 when precision + recall is 0.
double macro_f1(const ConfusionMatrix& confusion);

double accuracy(const ConfusionMatrix& confusion);

Metrics compute_metrics(const ConfusionMatrix& confusion);
Metrics compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                        std::size_t n_classes);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

Summary summarize(std::span<const double> values);

struct FoldAggregate {
  Summary uar;
  Summary macro_f1;
  Summary accuracy;
  std::size_t folds = 0;
};

/// Unweighted mean and population standard deviation across folds.
FoldAggregate aggregate_folds(std::span<const Metrics> per_fold);

/// Metrics of the summed confusion matrix.
Metrics pool_folds(std::span<const Metrics> per_fold);

}  // namespace asu

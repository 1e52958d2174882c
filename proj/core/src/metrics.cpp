#include "asu/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace {

void require_support(const ConfusionMatrix& c) {
  if (c.size() == 0 || c.sum() == 0) throw Error(ErrorCode::all_rows_zero, "confusion matrix has no instances");
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t n_classes) {
  if (preds.size() != labels.size()) {
    throw Error(ErrorCode::length_mismatch,
                fmt::format("{} predictions for {} labels", preds.size(), labels.size()));
  }
  const auto c = static_cast<Eigen::Index>(n_classes);
  ConfusionMatrix m = ConfusionMatrix::Zero(c, c);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= n_classes || labels[i] >= n_classes) {
      throw Error(ErrorCode::out_of_range,
                  fmt::format("entry {} (label {}, pred {}) outside [0, {})", i, labels[i], preds[i], n_classes));
    }
    ++m(static_cast<Eigen::Index>(labels[i]), static_cast<Eigen::Index>(preds[i]));
  }
  return m;
}

double uar(const ConfusionMatrix& confusion) {
  require_support(confusion);
  double sum = 0.0;
  int classes = 0;
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    const auto support = confusion.row(i).sum();
    if (support == 0) continue;
    sum += static_cast<double>(confusion(i, i)) / static_cast<double>(support);
    ++classes;
  }
  return sum / classes;
}

double macro_f1(const ConfusionMatrix& confusion) {
  require_support(confusion);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    const auto tp = static_cast<double>(confusion(i, i));
    const auto predicted = static_cast<double>(confusion.col(i).sum());
    const auto actual = static_cast<double>(confusion.row(i).sum());
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = actual > 0 ? tp / actual : 0.0;
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(confusion.rows());
}

double accuracy(const ConfusionMatrix& confusion) {
  require_support(confusion);
  return static_cast<double>(confusion.trace()) / static_cast<double>(confusion.sum());
}

Metrics compute_metrics(const ConfusionMatrix& confusion) {
  Metrics m;
  m.confusion = confusion;
  m.n = static_cast<std::size_t>(confusion.sum());
  m.uar = uar(confusion);
  m.macro_f1 = macro_f1(confusion);
  m.accuracy = accuracy(confusion);
  return m;
}

Metrics compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                        std::size_t n_classes) {
  return compute_metrics(confusion_matrix(preds, labels, n_classes));
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_list, "nothing to summarize");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

FoldAggregate aggregate_folds(std::span<const Metrics> per_fold) {
  if (per_fold.empty()) throw Error(ErrorCode::empty_list, "no folds to aggregate");
  std::vector<double> u;
  std::vector<double> f;
  std::vector<double> a;
  for (const auto& m : per_fold) {
    u.push_back(m.uar);
    f.push_back(m.macro_f1);
    a.push_back(m.accuracy);
  }
  return {summarize(u), summarize(f), summarize(a), per_fold.size()};
}

Metrics pool_folds(std::span<const Metrics> per_fold) {
  if (per_fold.empty()) throw Error(ErrorCode::empty_list, "no folds to pool");
  ConfusionMatrix total = per_fold.front().confusion;
  for (std::size_t i = 1; i < per_fold.size(); ++i) {
    if (per_fold[i].confusion.rows() != total.rows()) {
      throw Error(ErrorCode::length_mismatch, "folds have different class counts");
    }
    total += per_fold[i].confusion;
  }
  return compute_metrics(total);
}

}  // namespace asu

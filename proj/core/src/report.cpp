#include <array>
#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "asu/error.hpp"
#include "asu/experiments.hpp"

namespace asu {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string confusion_text(const ConfusionMatrix& c) {
  std::string out;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (i > 0) out += '/';
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (j > 0) out += ' ';
      out += std::to_string(c(i, j));
    }
  }
  return out;
}

double primary(const GroupSummary& g, TaskKind task, bool std) {
  const Summary& s = task == TaskKind::emotion ? g.uar : g.macro_f1;
  return std ? s.std : s.mean;
}

void write_file(const fs::path& path, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", path.string()));
  out << text;
  written.push_back(path);
}

std::string metric_columns(const GroupSummary& g) {
  return fmt::format("{},{},{},{},{},{}", num(g.uar.mean), num(g.uar.std), num(g.macro_f1.mean), num(g.macro_f1.std),
                     num(g.accuracy.mean), num(g.accuracy.std));
}

constexpr const char* kMetricHeader = "uar_mean,uar_std,macro_f1_mean,macro_f1_std,accuracy_mean,accuracy_std";

std::string svg_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else if (c == '&') {
      out += "&amp;";
    } else {
      out += c;
    }
  }
  return out;
}

constexpr std::array<const char*, 4> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string render_comparison(const std::vector<GroupSummary>& rows, TaskKind task) {
  const double w = 120.0 * static_cast<double>(rows.size()) + 80.0;
  const double h = 320.0;
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n",
      w, h);
  s += fmt::format("<line x1=\"50\" y1=\"260\" x2=\"{}\" y2=\"260\" stroke=\"black\"/>\n", w - 20);
  s += "<line x1=\"50\" y1=\"20\" x2=\"50\" y2=\"260\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = 260.0 - 60.0 * t;
    s += fmt::format("<text x=\"45\" y=\"{}\" text-anchor=\"end\">{}</text>\n", y + 4, num(0.25 * t));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = primary(rows[i], task, false);
    const double x = 70.0 + 120.0 * static_cast<double>(i);
    const double bh = 240.0 * std::clamp(v, 0.0, 1.0);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"80\" height=\"{}\" fill=\"{}\"/>\n", x, 260.0 - bh, bh,
                     kColors[i % kColors.size()]);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.3f}</text>\n", x + 40, 255.0 - bh, v);
    s += fmt::format("<text x=\"{}\" y=\"280\" text-anchor=\"middle\">{}</text>\n", x + 40,
                     svg_escape(to_string(rows[i].regime)));
  }
  s += "</svg>\n";
  return s;
}

std::string render_curves(const std::map<Regime, std::vector<GroupSummary>>& curves, TaskKind task) {
  const double left = 50.0, right = 560.0, top = 20.0, bottom = 260.0;
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"340\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n";
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, bottom, right);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, bottom);
  auto px = [&](double r) { return left + (right - left) * r; };
  auto py = [&](double v) { return bottom - (bottom - top) * std::clamp(v, 0.0, 1.0); };
  for (int t = 0; t <= 4; ++t) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 5, py(0.25 * t) + 4,
                     num(0.25 * t));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(0.25 * t), bottom + 15,
                     num(0.25 * t));
  }
  std::size_t c = 0;
  for (const auto& [regime, rows] : curves) {
    const char* color = kColors[c % kColors.size()];
    std::string points;
    for (const auto& g : rows) {
      points += fmt::format("{},{} ", px(g.ratio), py(primary(g, task, false)));
      s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", px(g.ratio), py(primary(g, task, false)),
                       color);
    }
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\"/>\n", points, color);
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", left + 10, 295.0 + 14.0 * static_cast<double>(c),
                     color, svg_escape(to_string(regime)));
    ++c;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

std::vector<GroupSummary> summarize_groups(const std::vector<RunResult>& results, bool pooled) {
  std::map<std::pair<Regime, double>, std::vector<Metrics>> groups;
  for (const auto& r : results) groups[{r.key.regime, r.key.ratio}].push_back(r.metrics);
  std::vector<GroupSummary> out;
  for (const auto& [key, metrics] : groups) {
    GroupSummary g;
    g.regime = key.first;
    g.ratio = key.second;
    g.cells = metrics.size();
    if (pooled) {
      const Metrics m = pool_folds(metrics);
      g.uar = {m.uar, 0.0};
      g.macro_f1 = {m.macro_f1, 0.0};
      g.accuracy = {m.accuracy, 0.0};
    } else {
      const auto agg = aggregate_folds(metrics);
      g.uar = agg.uar;
      g.macro_f1 = agg.macro_f1;
      g.accuracy = agg.accuracy;
    }
    out.push_back(g);
  }
  return out;
}

std::vector<fs::path> emit_report(const std::vector<RunResult>& results, const fs::path& out_dir,
                                  const ReportOptions& options) {
  if (results.empty()) throw Error(ErrorCode::empty_results, "no results to report");
  fs::create_directories(out_dir);
  std::vector<RunResult> sorted = results;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  const auto groups = summarize_groups(sorted, options.pooled);
  std::vector<fs::path> written;

  std::string flat = "row_type,regime,fold,ratio,seed,cells,n,uar,uar_std,macro_f1,macro_f1_std,accuracy,accuracy_std,"
                     "confusion,checkpoint_ref\n";
  for (const auto& r : sorted) {
    flat += fmt::format("cell,{},{},{},{},1,{},{},,{},,{},,{},{}\n", to_string(r.key.regime), r.key.fold,
                        num(r.key.ratio), r.key.seed, r.metrics.n, num(r.metrics.uar), num(r.metrics.macro_f1),
                        num(r.metrics.accuracy), confusion_text(r.metrics.confusion), r.checkpoint_ref);
  }
  for (const auto& g : groups) {
    std::size_t n = 0;
    for (const auto& r : sorted) {
      if (r.key.regime == g.regime && r.key.ratio == g.ratio) n += r.metrics.n;
    }
    flat += fmt::format("{},{},*,{},*,{},{},{},{},{},{},{},{},,\n", options.pooled ? "pooled" : "aggregate",
                        to_string(g.regime), num(g.ratio), g.cells, n, num(g.uar.mean), num(g.uar.std),
                        num(g.macro_f1.mean), num(g.macro_f1.std), num(g.accuracy.mean), num(g.accuracy.std));
  }
  write_file(out_dir / "results.csv", flat, written);

  // Each regime at its largest ratio.
  std::map<Regime, GroupSummary> best_ratio;
  std::map<Regime, std::vector<GroupSummary>> curves;
  for (const auto& g : groups) {
    best_ratio[g.regime] = g;
    curves[g.regime].push_back(g);
  }
  std::vector<GroupSummary> comparison;
  std::string cmp = fmt::format("regime,ratio,cells,primary_mean,primary_std,{}\n", kMetricHeader);
  for (const auto& [regime, g] : best_ratio) {
    comparison.push_back(g);
    cmp += fmt::format("{},{},{},{},{},{}\n", to_string(regime), num(g.ratio), g.cells,
                       num(primary(g, options.task, false)), num(primary(g, options.task, true)), metric_columns(g));
  }
  write_file(out_dir / "regime_comparison.csv", cmp, written);

  for (const auto& [regime, rows] : curves) {
    std::string curve = fmt::format("ratio,cells,primary_mean,primary_std,{}\n", kMetricHeader);
    for (const auto& g : rows) {
      curve += fmt::format("{},{},{},{},{}\n", num(g.ratio), g.cells, num(primary(g, options.task, false)),
                           num(primary(g, options.task, true)), metric_columns(g));
    }
    write_file(out_dir / fmt::format("curve_{}.csv", to_string(regime)), curve, written);
  }

  if (options.render) {
    write_file(out_dir / "regime_comparison.svg", render_comparison(comparison, options.task), written);
    write_file(out_dir / "curves.svg", render_curves(curves, options.task), written);
  }
  return written;
}

}  // namespace asu

#include "riskbench/compare.hpp"

#include <stdexcept>

#include "riskbench/common.hpp"
#include "riskbench/csv.hpp"

namespace riskbench {

namespace {

std::string p_text(double p) {
  if (p < 0.005) return "<0.005*";
  std::string s = format_fixed(p, 2);
  if (p < 0.05) s += "*";
  return s;
}

}  // namespace

MarkerComparison compare_markers(const std::vector<GroupImportance>& importance,
                                 const std::vector<GroupCox>& cox_fits,
                                 const std::vector<std::string>& markers) {
  if (markers.empty()) throw std::invalid_argument("marker list is empty");
  MarkerComparison out;
  out.markers = markers;
  auto group_index = [&](const std::string& name) {
    for (size_t g = 0; g < out.groups.size(); ++g)
      if (out.groups[g] == name) return g;
    out.groups.push_back(name);
    return out.groups.size() - 1;
  };
  for (const auto& gi : importance) group_index(gi.group);
  for (const auto& gc : cox_fits) group_index(gc.group);
  if (out.groups.empty()) throw std::invalid_argument("no groups to compare");
  for (size_t g = 0; g + 1 < out.groups.size(); ++g)
    for (size_t h = g + 1; h < out.groups.size(); ++h)
      if (out.groups[g] == out.groups[h])
        throw std::invalid_argument("duplicate group '" + out.groups[g] + "'");

  out.cells.assign(markers.size(), std::vector<MarkerCell>(out.groups.size()));
  for (size_t m = 0; m < markers.size(); ++m) {
    for (size_t g = 0; g < out.groups.size(); ++g) {
      MarkerCell& cell = out.cells[m][g];
      for (const auto& gi : importance) {
        if (gi.group != out.groups[g]) continue;
        for (const auto& entry : gi.ranking) {
          if (entry.name != markers[m]) continue;
          cell.has_shap = true;
          cell.mean_abs_shap = entry.importance;
        }
      }
      for (const auto& gc : cox_fits) {
        if (gc.group != out.groups[g]) continue;
        for (size_t j = 0; j < gc.fit.names.size(); ++j) {
          if (gc.fit.names[j] != markers[m]) continue;
          cell.has_cox = true;
          cell.cox_p = gc.fit.p[j];
        }
      }
      cell.significant = cell.has_cox && cell.cox_p < 0.05;
      if (cell.has_shap && !cell.has_cox)
        out.warnings.push_back("marker '" + markers[m] + "' has no Cox covariate in group '" +
                               out.groups[g] + "'");
      if (!cell.has_shap && cell.has_cox)
        out.warnings.push_back("marker '" + markers[m] + "' has no SHAP column in group '" +
                               out.groups[g] + "'");
      if (!cell.has_shap && !cell.has_cox)
        out.warnings.push_back("marker '" + markers[m] + "' is absent from both sources in group '" +
                               out.groups[g] + "'");
    }
  }
  return out;
}

std::string comparison_to_markdown(const MarkerComparison& comparison) {
  std::string md = "| Risk marker |";
  for (const auto& g : comparison.groups)
    md += " " + g + " average SHAP | " + g + " Cox p-value |";
  md += "\n|---|";
  for (size_t g = 0; g < comparison.groups.size(); ++g) md += "---|---|";
  md += "\n";
  for (size_t m = 0; m < comparison.markers.size(); ++m) {
    md += "| " + comparison.markers[m] + " |";
    for (size_t g = 0; g < comparison.groups.size(); ++g) {
      const MarkerCell& cell = comparison.cells[m][g];
      md += cell.has_shap ? " " + format_fixed(cell.mean_abs_shap, 2) + " |" : " n/a |";
      md += cell.has_cox ? " " + p_text(cell.cox_p) + " |" : " n/a |";
    }
    md += "\n";
  }
  return md;
}

std::string comparison_to_csv(const MarkerComparison& comparison) {
  std::string csv = "marker";
  for (const auto& g : comparison.groups)
    csv += "," + csv_escape(g + " mean_abs_shap") + "," + csv_escape(g + " cox_p") + "," +
           csv_escape(g + " significant");
  csv += "\n";
  for (size_t m = 0; m < comparison.markers.size(); ++m) {
    csv += csv_escape(comparison.markers[m]);
    for (size_t g = 0; g < comparison.groups.size(); ++g) {
      const MarkerCell& cell = comparison.cells[m][g];
      csv += cell.has_shap ? "," + format_shortest(cell.mean_abs_shap) : ",";
      csv += cell.has_cox ? "," + format_shortest(cell.cox_p) : ",";
      csv += cell.has_cox ? (cell.significant ? ",1" : ",0") : ",";
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace riskbench

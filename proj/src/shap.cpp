#include "riskbench/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "riskbench/csv.hpp"
#include "riskbench/rng.hpp"

namespace riskbench {

namespace {

using nlohmann::json;

// C(n, k) rows up to n; values stay exact in a double for every depth and
// feature count accepted below.
std::vector<std::vector<double>> pascal_rows(size_t n) {
  std::vector<std::vector<double>> c(n + 1);
  for (size_t i = 0; i <= n; ++i) {
    c[i].assign(i + 1, 1.0);
    for (size_t k = 1; k < i; ++k) c[i][k] = c[i - 1][k - 1] + c[i - 1][k];
  }
  return c;
}

void check_background(const TrainedModel& model, const FeatureMatrix& background) {
  check_columns(model, background);
  if (background.n_rows == 0) throw std::invalid_argument("background sample is empty");
}

// FNV-1a over the standardized cells, so the attribution records which
// background it marginalized over.
std::string background_ref_of(const FeatureMatrix& background) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (double v : background.data) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  std::ostringstream out;
  out << "bg-" << std::hex << (h & 0xffffffffull) << std::dec << "-n" << background.n_rows;
  return out.str();
}

// Averaged ensemble value with out-of-mask columns taken from each background
// row in turn. `tmp` is caller-provided scratch of size p.
double masked_value(const TrainedModel& model, const std::vector<double>& x,
                    const FeatureMatrix& background, uint32_t mask, std::vector<double>& tmp) {
  const size_t p = x.size();
  double acc = 0.0;
  for (size_t b = 0; b < background.n_rows; ++b) {
    const double* row = &background.data[b * p];
    for (size_t j = 0; j < p; ++j) tmp[j] = (mask >> j) & 1u ? x[j] : row[j];
    acc += ensemble_value(model, tmp.data());
  }
  return acc / static_cast<double>(background.n_rows);
}

std::vector<double> all_mask_values(const TrainedModel& model, const std::vector<double>& x,
                                    const FeatureMatrix& background) {
  const size_t p = x.size();
  std::vector<double> val(size_t{1} << p);
  std::vector<double> tmp(p);
  for (uint32_t mask = 0; mask < val.size(); ++mask)
    val[mask] = masked_value(model, x, background, mask, tmp);
  return val;
}

std::vector<double> phi_from_mask_values(const std::vector<double>& val, size_t p) {
  auto binom = pascal_rows(p == 0 ? 1 : p);
  // Weight of a coalition of size k when adding one feature: 1 / (p * C(p-1, k)).
  std::vector<double> w(p);
  for (size_t k = 0; k < p; ++k) w[k] = 1.0 / (static_cast<double>(p) * binom[p - 1][k]);
  std::vector<double> phi(p, 0.0);
  for (uint32_t mask = 0; mask < val.size(); ++mask) {
    const size_t k = static_cast<size_t>(std::popcount(mask));
    for (size_t j = 0; j < p; ++j) {
      if ((mask >> j) & 1u) continue;
      phi[j] += w[k] * (val[mask | (1u << j)] - val[mask]);
    }
  }
  return phi;
}

struct PathState {
  const double* x = nullptr;
  const double* b = nullptr;
  double* phi = nullptr;
  const std::vector<std::vector<double>>* binom = nullptr;
  std::vector<int> role;  // 0 free, 1 pinned to x, 2 pinned to b
  std::vector<int> x_set, b_set;
};

// Walks every leaf reachable for some coalition. Features where x and b part
// ways split the walk: the x branch requires the feature in the coalition,
// the b branch requires it out. Leaf values then contribute closed-form
// coalition weights to each pinned feature.
void walk_tree(const Tree& tree, int node, double scale, PathState& st) {
  const TreeNode& nd = tree.nodes[node];
  if (nd.is_leaf()) {
    const double v = scale * nd.value;
    const size_t a = st.x_set.size(), d = st.b_set.size();
    const auto& c = *st.binom;
    if (a > 0) {
      const double w = v / (static_cast<double>(a) * c[a + d][d]);
      for (int j : st.x_set) st.phi[j] += w;
    }
    if (d > 0) {
      const double w = v / (static_cast<double>(d) * c[a + d][a]);
      for (int j : st.b_set) st.phi[j] -= w;
    }
    return;
  }
  const int f = nd.feature;
  const int x_child = st.x[f] < nd.threshold ? nd.left : nd.right;
  const int b_child = st.b[f] < nd.threshold ? nd.left : nd.right;
  if (x_child == b_child) {
    walk_tree(tree, x_child, scale, st);
    return;
  }
  switch (st.role[f]) {
    case 1:
      walk_tree(tree, x_child, scale, st);
      return;
    case 2:
      walk_tree(tree, b_child, scale, st);
      return;
    default:
      st.role[f] = 1;
      st.x_set.push_back(f);
      walk_tree(tree, x_child, scale, st);
      st.x_set.pop_back();
      st.role[f] = 2;
      st.b_set.push_back(f);
      walk_tree(tree, b_child, scale, st);
      st.b_set.pop_back();
      st.role[f] = 0;
  }
}

void tree_shap_row(const TrainedModel& model, const double* x, const FeatureMatrix& background,
                   const std::vector<std::vector<double>>& binom, std::vector<double>& phi) {
  const size_t p = model.n_features();
  std::fill(phi.begin(), phi.end(), 0.0);
  PathState st;
  st.x = x;
  st.phi = phi.data();
  st.binom = &binom;
  st.role.assign(p, 0);
  for (size_t b = 0; b < background.n_rows; ++b) {
    st.b = &background.data[b * p];
    for (const Tree& tree : model.ensemble.trees)
      if (!tree.nodes.empty()) walk_tree(tree, 0, tree.scale, st);
  }
  const double inv = 1.0 / static_cast<double>(background.n_rows);
  for (double& v : phi) v *= inv;
}

size_t max_tree_depth(const TrainedModel& model) {
  size_t d = 0;
  for (const Tree& t : model.ensemble.trees) d = std::max(d, static_cast<size_t>(t.depth()));
  return d;
}

double base_over_background(const TrainedModel& model, const FeatureMatrix& background) {
  double base = 0.0;
  for (size_t b = 0; b < background.n_rows; ++b)
    base += ensemble_value(model, &background.data[b * background.n_cols()]);
  return base / static_cast<double>(background.n_rows);
}

void fill_display_values(Attribution& out, const FeatureMatrix& matrix) {
  out.raw_values.assign(matrix.n_rows, std::vector<double>(matrix.n_cols()));
  for (size_t i = 0; i < matrix.n_rows; ++i)
    for (size_t j = 0; j < matrix.n_cols(); ++j) out.raw_values[i][j] = matrix.raw(i, j);
}

json parse_meta(const std::string& meta_json) {
  if (meta_json.empty()) return json::object();
  return json::parse(meta_json);
}

}  // namespace

FeatureMatrix sample_background(const FeatureMatrix& train, size_t size, uint64_t seed) {
  if (train.n_rows == 0) throw std::invalid_argument("background source matrix is empty");
  if (size == 0) throw std::invalid_argument("background size must be positive");
  if (train.n_rows <= size) return train;
  Rng rng(seed, "background");
  auto rows = rng.sample_without_replacement(train.n_rows, size);
  std::sort(rows.begin(), rows.end());
  return take_rows(train, rows);
}

std::pair<std::vector<double>, double> shapley_exact(const TrainedModel& model,
                                                     const std::vector<double>& x,
                                                     const FeatureMatrix& background) {
  check_background(model, background);
  const size_t p = model.n_features();
  if (x.size() != p) throw std::invalid_argument("row width does not match the model");
  if (p > 20)
    throw std::invalid_argument(
        "exact enumeration supports at most 20 features; use tree_shap for tree models");
  const auto val = all_mask_values(model, x, background);
  return {phi_from_mask_values(val, p), val[0]};
}

Attribution tree_shap(const TrainedModel& model, const FeatureMatrix& matrix,
                      const FeatureMatrix& background, int threads) {
  if (model.is_linear())
    throw std::invalid_argument("tree_shap needs a tree model; use shapley_exact");
  check_columns(model, matrix);
  check_background(model, background);
  const size_t p = model.n_features();
  const auto binom = pascal_rows(2 * max_tree_depth(model) + 2);

  Attribution out;
  out.column_names = matrix.column_names();
  out.row_ids = matrix.row_ids;
  out.base_value = base_over_background(model, background);
  out.background_ref = background_ref_of(background);
  out.background_size = background.n_rows;
  out.values.assign(matrix.n_rows, {});
  fill_display_values(out, matrix);
  parallel_for(matrix.n_rows, resolve_threads(threads), [&](size_t i) {
    std::vector<double> phi(p);
    tree_shap_row(model, &matrix.data[i * p], background, binom, phi);
    out.values[i] = std::move(phi);
  });
  return out;
}

Attribution attribute(const TrainedModel& model, const FeatureMatrix& matrix,
                      const FeatureMatrix& background, int threads) {
  if (!model.is_linear()) return tree_shap(model, matrix, background, threads);
  check_columns(model, matrix);
  check_background(model, background);
  const size_t p = model.n_features();
  std::vector<double> bg_mean(p, 0.0);
  for (size_t b = 0; b < background.n_rows; ++b)
    for (size_t j = 0; j < p; ++j) bg_mean[j] += background.at(b, j);
  for (double& m : bg_mean) m /= static_cast<double>(background.n_rows);

  Attribution out;
  out.column_names = matrix.column_names();
  out.row_ids = matrix.row_ids;
  out.base_value = ensemble_value(model, bg_mean.data());
  out.background_ref = background_ref_of(background);
  out.background_size = background.n_rows;
  out.values.assign(matrix.n_rows, std::vector<double>(p));
  fill_display_values(out, matrix);
  parallel_for(matrix.n_rows, resolve_threads(threads), [&](size_t i) {
    for (size_t j = 0; j < p; ++j)
      out.values[i][j] = model.linear.weights[j] * (matrix.at(i, j) - bg_mean[j]);
  });
  return out;
}

std::vector<std::vector<double>> interaction_values(const TrainedModel& model,
                                                    const std::vector<double>& x,
                                                    const FeatureMatrix& background) {
  check_background(model, background);
  const size_t p = model.n_features();
  if (x.size() != p) throw std::invalid_argument("row width does not match the model");
  if (p > 12)
    throw std::invalid_argument("interaction values support at most 12 features");
  const auto val = all_mask_values(model, x, background);
  const auto phi = phi_from_mask_values(val, p);
  std::vector<std::vector<double>> m(p, std::vector<double>(p, 0.0));
  if (p >= 2) {
    auto binom = pascal_rows(p);
    // Coalition weight for a pair: |S|! (p-|S|-2)! / (2 (p-1)!).
    std::vector<double> w(p - 1);
    for (size_t k = 0; k + 2 <= p; ++k)
      w[k] = 0.5 / (static_cast<double>(p - 1) * binom[p - 2][k]);
    for (size_t j = 0; j < p; ++j) {
      for (size_t k = j + 1; k < p; ++k) {
        const uint32_t bj = 1u << j, bk = 1u << k;
        double acc = 0.0;
        for (uint32_t mask = 0; mask < val.size(); ++mask) {
          if (mask & (bj | bk)) continue;
          const double delta =
              val[mask | bj | bk] - val[mask | bj] - val[mask | bk] + val[mask];
          acc += w[static_cast<size_t>(std::popcount(mask))] * delta;
        }
        m[j][k] = m[k][j] = acc;
      }
    }
  }
  for (size_t j = 0; j < p; ++j) {
    double off = 0.0;
    for (size_t k = 0; k < p; ++k)
      if (k != j) off += m[j][k];
    m[j][j] = phi[j] - off;
  }
  return m;
}

ImportanceRanking feature_importance(const Attribution& attribution) {
  const size_t p = attribution.n_cols();
  ImportanceRanking out(p);
  for (size_t j = 0; j < p; ++j) out[j] = {j, attribution.column_names[j], 0.0};
  if (!attribution.values.empty()) {
    for (const auto& row : attribution.values)
      for (size_t j = 0; j < p; ++j) out[j].importance += std::abs(row[j]);
    for (auto& e : out) e.importance /= static_cast<double>(attribution.values.size());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return a.importance > b.importance;
                   });
  return out;
}

std::vector<RowGroup> sex_groups(const FeatureMatrix& matrix) {
  RowGroup female{"female", {}}, male{"male", {}};
  for (size_t i = 0; i < matrix.row_sex.size(); ++i)
    (matrix.row_sex[i] == kFemale ? female : male).rows.push_back(i);
  return {female, male};
}

std::vector<RowGroup> age_bin_groups(const FeatureMatrix& matrix, const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("age bins need at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end()))
    throw std::invalid_argument("age bin edges must be increasing");
  std::vector<RowGroup> groups(edges.size() - 1);
  for (size_t g = 0; g + 1 < edges.size(); ++g)
    groups[g].name =
        "age[" + format_shortest(edges[g]) + "," + format_shortest(edges[g + 1]) + ")";
  for (size_t i = 0; i < matrix.row_age.size(); ++i) {
    const double age = matrix.row_age[i];
    if (std::isnan(age)) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), age);
    if (it == edges.begin() || it == edges.end()) continue;
    groups[static_cast<size_t>(it - edges.begin()) - 1].rows.push_back(i);
  }
  return groups;
}

std::vector<GroupImportance> subgroup_importance(const Attribution& attribution,
                                                 const std::vector<RowGroup>& groups,
                                                 WarningSink* warnings) {
  const size_t p = attribution.n_cols();
  std::vector<GroupImportance> out;
  for (const RowGroup& group : groups) {
    if (group.rows.empty()) {
      warn(warnings, "subgroup " + group.name + " has no rows; skipped");
      continue;
    }
    GroupImportance gi;
    gi.group = group.name;
    gi.n_rows = group.rows.size();
    gi.ranking.resize(p);
    for (size_t j = 0; j < p; ++j) gi.ranking[j] = {j, attribution.column_names[j], 0.0};
    for (size_t i : group.rows) {
      if (i >= attribution.n_rows()) throw std::out_of_range("subgroup row outside attribution");
      for (size_t j = 0; j < p; ++j) gi.ranking[j].importance += std::abs(attribution.values[i][j]);
    }
    for (auto& e : gi.ranking) e.importance /= static_cast<double>(group.rows.size());
    std::stable_sort(gi.ranking.begin(), gi.ranking.end(),
                     [](const ImportanceEntry& a, const ImportanceEntry& b) {
                       return a.importance > b.importance;
                     });
    out.push_back(std::move(gi));
  }
  return out;
}

std::vector<SummaryFeature> summary_data(const Attribution& attribution, size_t max_features) {
  const auto ranking = feature_importance(attribution);
  const size_t n = attribution.n_rows();
  const size_t keep =
      max_features == 0 ? ranking.size() : std::min(max_features, ranking.size());
  std::vector<SummaryFeature> out;
  out.reserve(keep);
  for (size_t r = 0; r < keep; ++r) {
    const size_t j = ranking[r].column;
    SummaryFeature sf;
    sf.column = j;
    sf.name = ranking[r].name;
    sf.importance = ranking[r].importance;
    double lo = 0.0, hi = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double v = attribution.raw_values[i][j];
      if (i == 0) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    sf.points.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double v = attribution.raw_values[i][j];
      sf.points[i].phi = attribution.values[i][j];
      sf.points[i].color = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      sf.points[i].row_id = attribution.row_ids[i];
    }
    out.push_back(std::move(sf));
  }
  return out;
}

namespace {

// Standardized coordinates back out of the display values, using the shared
// column statistics carried by the background.
std::vector<double> standardized_row(const Attribution& attribution,
                                     const FeatureMatrix& background, size_t i) {
  const size_t p = attribution.n_cols();
  std::vector<double> x(p);
  for (size_t j = 0; j < p; ++j) {
    const ColumnInfo& c = background.columns[j];
    x[j] = c.sd > 0.0 ? (attribution.raw_values[i][j] - c.mean) / c.sd : 0.0;
  }
  return x;
}

size_t exact_color_column(const Attribution& attribution, const TrainedModel& model,
                          const FeatureMatrix& background, size_t column, size_t sample_cap) {
  const size_t n = attribution.n_rows();
  const size_t p = attribution.n_cols();
  const size_t take = std::min(sample_cap, n);
  const size_t stride = std::max<size_t>(1, n / take);
  std::vector<double> score(p, 0.0);
  size_t used = 0;
  for (size_t i = 0; i < n && used < take; i += stride, ++used) {
    const auto m = interaction_values(model, standardized_row(attribution, background, i),
                                      background);
    for (size_t k = 0; k < p; ++k) score[k] += std::abs(m[column][k]);
  }
  size_t best = p;
  for (size_t k = 0; k < p; ++k) {
    if (k == column) continue;
    if (best == p || score[k] > score[best]) best = k;
  }
  if (score[best] <= 1e-9 * static_cast<double>(used)) {
    for (size_t k = 0; k < p; ++k)
      if (k != column) return k;
  }
  return best;
}

// Controls for the plotted feature's own effect by slicing rows into
// contiguous bins of its value, then scores each partner by how far the
// contribution moves across a median split of the partner inside each bin.
size_t binned_color_column(const Attribution& attribution, size_t column) {
  const size_t n = attribution.n_rows();
  const size_t p = attribution.n_cols();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return attribution.raw_values[a][column] < attribution.raw_values[b][column];
  });
  const size_t nbins = std::min<size_t>(10, std::max<size_t>(1, n));
  std::vector<double> score(p, 0.0);
  for (size_t bin = 0; bin < nbins; ++bin) {
    const size_t lo = bin * n / nbins, hi = (bin + 1) * n / nbins;
    if (hi - lo < 2) continue;
    for (size_t k = 0; k < p; ++k) {
      if (k == column) continue;
      std::vector<std::pair<double, double>> pts;  // (partner value, phi)
      pts.reserve(hi - lo);
      for (size_t t = lo; t < hi; ++t) {
        const size_t i = order[t];
        pts.emplace_back(attribution.raw_values[i][k], attribution.values[i][column]);
      }
      std::nth_element(pts.begin(), pts.begin() + pts.size() / 2, pts.end());
      const double median = pts[pts.size() / 2].first;
      double sum_lo = 0.0, sum_hi = 0.0;
      size_t cnt_lo = 0, cnt_hi = 0;
      for (const auto& [v, phi] : pts) {
        if (v < median) {
          sum_lo += phi;
          ++cnt_lo;
        } else {
          sum_hi += phi;
          ++cnt_hi;
        }
      }
      if (cnt_lo == 0 || cnt_hi == 0) continue;
      const double gap = std::abs(sum_hi / static_cast<double>(cnt_hi) -
                                  sum_lo / static_cast<double>(cnt_lo));
      score[k] += gap * static_cast<double>(hi - lo) / static_cast<double>(n);
    }
  }
  size_t best = column;
  for (size_t k = 0; k < p; ++k) {
    if (k == column) continue;
    if (best == column || score[k] > score[best]) best = k;
  }
  if (best == column || score[best] <= 1e-9) {
    for (size_t k = 0; k < p; ++k)
      if (k != column) return k;
  }
  return best;
}

}  // namespace

DependenceData dependence_data(const Attribution& attribution, const TrainedModel& model,
                               const FeatureMatrix& background, size_t column,
                               size_t sample_cap) {
  const size_t p = attribution.n_cols();
  if (column >= p) throw std::out_of_range("dependence feature index out of range");
  if (attribution.n_rows() == 0) throw std::invalid_argument("attribution has no rows");
  DependenceData out;
  out.feature = attribution.column_names[column];
  size_t color = column;
  if (p == 1) {
    out.method = "exact-interaction";
  } else if (p <= 12) {
    out.method = "exact-interaction";
    color = exact_color_column(attribution, model, background, column, sample_cap);
  } else {
    out.method = "variance-binning";
    color = binned_color_column(attribution, column);
  }
  out.color_feature = attribution.column_names[color];
  out.points.resize(attribution.n_rows());
  for (size_t i = 0; i < attribution.n_rows(); ++i) {
    out.points[i].x = attribution.raw_values[i][column];
    out.points[i].phi = attribution.values[i][column];
    out.points[i].color = attribution.raw_values[i][color];
  }
  return out;
}

Explanation force_explanation(const Attribution& attribution, size_t row) {
  if (row >= attribution.n_rows()) throw std::out_of_range("explanation row out of range");
  Explanation out;
  out.base_value = attribution.base_value;
  double sum = 0.0;
  for (size_t j = 0; j < attribution.n_cols(); ++j) {
    const double phi = attribution.values[row][j];
    sum += phi;
    if (phi != 0.0)
      out.items.push_back({attribution.column_names[j], attribution.raw_values[row][j], phi});
  }
  out.output_value = out.base_value + sum;
  std::stable_sort(out.items.begin(), out.items.end(), [](const ForceItem& a, const ForceItem& b) {
    return std::abs(a.phi) > std::abs(b.phi);
  });
  return out;
}

std::string attribution_to_csv(const Attribution& attribution, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "row_id,base_value";
  for (const auto& name : attribution.column_names) out << ',' << csv_escape(name);
  out << '\n';
  for (size_t i = 0; i < attribution.n_rows(); ++i) {
    out << csv_escape(attribution.row_ids[i]) << ',' << format_shortest(attribution.base_value);
    for (double phi : attribution.values[i]) out << ',' << format_shortest(phi);
    out << '\n';
  }
  return out.str();
}

std::string summary_to_json(const std::vector<SummaryFeature>& features,
                            const std::string& meta_json) {
  json doc;
  doc["meta"] = parse_meta(meta_json);
  doc["features"] = json::array();
  for (const auto& sf : features) {
    json f{{"name", sf.name}, {"column", sf.column}, {"importance", sf.importance}};
    f["points"] = json::array();
    for (const auto& pt : sf.points)
      f["points"].push_back({{"phi", pt.phi}, {"color", pt.color}, {"row_id", pt.row_id}});
    doc["features"].push_back(std::move(f));
  }
  return doc.dump(2) + "\n";
}

std::string dependence_to_json(const DependenceData& data, const std::string& meta_json) {
  json doc;
  doc["meta"] = parse_meta(meta_json);
  doc["feature"] = data.feature;
  doc["color_feature"] = data.color_feature;
  doc["method"] = data.method;
  doc["points"] = json::array();
  for (const auto& pt : data.points)
    doc["points"].push_back({{"x", pt.x}, {"phi", pt.phi}, {"color", pt.color}});
  return doc.dump(2) + "\n";
}

std::string explanation_to_json(const Explanation& explanation, const std::string& meta_json) {
  json doc;
  doc["meta"] = parse_meta(meta_json);
  doc["base_value"] = explanation.base_value;
  doc["output_value"] = explanation.output_value;
  doc["items"] = json::array();
  for (const auto& item : explanation.items)
    doc["items"].push_back({{"name", item.name}, {"value", item.value}, {"phi", item.phi}});
  return doc.dump(2) + "\n";
}

}  // namespace riskbench

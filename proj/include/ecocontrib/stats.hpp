#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecocontrib/features.hpp"

namespace ecocontrib {

/// Numeric design matrix with named columns.
struct NumericMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd data;  // rows x columns
  std::vector<bool> log_transformed;
  std::vector<std::string> diagnostics;

  Eigen::Index column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DataError("unknown column: " + name);
    return Eigen::Index(it - columns.begin());
  }

  NumericMatrix select(const std::vector<std::string>& names) const {
    NumericMatrix out;
    out.data.resize(data.rows(), Eigen::Index(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto src = column_index(names[j]);
      out.columns.push_back(names[j]);
      out.log_transformed.push_back(log_transformed[std::size_t(src)]);
      out.data.col(Eigen::Index(j)) = data.col(src);
    }
    return out;
  }
};

inline NumericMatrix raw_matrix(const std::vector<FeatureRow>& rows) {
  const auto& cols = feature_columns();
  NumericMatrix m;
  for (const auto& c : cols) m.columns.push_back(c.name);
  m.log_transformed.assign(cols.size(), false);
  m.data.resize(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = feature_values(rows[i]);
    for (std::size_t j = 0; j < v.size(); ++j) m.data(Eigen::Index(i), Eigen::Index(j)) = v[j];
  }
  return m;
}

/// x -> ln(x + 1) on long-tailed columns, then min-max scaling of every
/// column to [0, 1]. Constant columns become all zeros.
inline NumericMatrix transform_columns(NumericMatrix m, const std::vector<ColumnSpec>& specs) {
  if (m.data.rows() == 0) throw DataError("transform_matrix: no rows");
  for (Eigen::Index j = 0; j < m.data.cols(); ++j) {
    const auto& spec = specs[std::size_t(j)];
    auto col = m.data.col(j);
    if (spec.long_tailed) {
      col = col.array().log1p();
      m.log_transformed[std::size_t(j)] = true;
    }
    const double lo = col.minCoeff(), hi = col.maxCoeff();
    if (hi == lo) {
      col.setZero();
      m.diagnostics.push_back("constant column scaled to zero: " + spec.name);
    } else {
      col = (col.array() - lo) / (hi - lo);
    }
  }
  return m;
}

inline NumericMatrix transform_matrix(const std::vector<FeatureRow>& rows) {
  return transform_columns(raw_matrix(rows), feature_columns());
}

// ---------------------------------------------------------------------------
// Multicollinearity

/// Ranks with ties averaged, 1-based.
inline Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  const auto n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x[order[std::size_t(j + 1)]] == x[order[std::size_t(i)]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) ranks[order[std::size_t(k)]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return den == 0 ? 0.0 : ca.dot(cb) / den;
}

inline double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

/// VIF of column j: 1 / (1 - R^2) of regressing it on the other columns plus
/// an intercept. Infinite when the fit is perfect or the column is constant.
inline double variance_inflation(const Eigen::MatrixXd& x, Eigen::Index j) {
  const auto n = x.rows(), k = x.cols();
  Eigen::MatrixXd design(n, k);
  design.col(0).setOnes();
  for (Eigen::Index c = 0, d = 1; c < k; ++c)
    if (c != j) design.col(d++) = x.col(c);
  const Eigen::VectorXd y = x.col(j);
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst == 0) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
  const double ssr = (y - design * beta).squaredNorm();
  const double r2 = 1.0 - ssr / sst;
  if (r2 >= 1.0 - 1e-10) return std::numeric_limits<double>::infinity();
  return 1.0 / (1.0 - r2);
}

struct CollinearPartner {
  std::string column;
  double rho;
};

struct ScreenReport {
  std::vector<std::string> columns;
  std::vector<double> vif;
  /// For every column with VIF >= threshold, the columns it correlates with.
  std::map<std::string, std::vector<CollinearPartner>> flagged;
  std::vector<std::string> retained;
  std::vector<std::string> dropped;
};

/// Keeps issues_submitted for the intra-project group and prs_submitted for
/// every ecosystem-level group; other contribution columns are dropped.
inline bool retained_by_group_rule(const std::string& column) {
  for (auto b : kAllBuckets) {
    const std::string prefix = std::string(bucket_name(b)) + "_";
    if (column.rfind(prefix, 0) != 0) continue;
    const std::string type = column.substr(prefix.size());
    return b == Bucket::Intra ? type == "issues_submitted" : type == "prs_submitted";
  }
  return true;
}

inline ScreenReport multicollinearity_screen(const NumericMatrix& m, double vif_threshold,
                                             double spearman_threshold) {
  ScreenReport rep;
  rep.columns = m.columns;
  const auto k = m.data.cols();
  std::vector<Eigen::VectorXd> ranks;
  for (Eigen::Index j = 0; j < k; ++j) ranks.push_back(average_ranks(m.data.col(j)));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double v = variance_inflation(m.data, j);
    rep.vif.push_back(v);
    if (!(v >= vif_threshold)) continue;
    auto& partners = rep.flagged[m.columns[std::size_t(j)]];
    for (Eigen::Index o = 0; o < k; ++o) {
      if (o == j) continue;
      const double rho = pearson(ranks[std::size_t(j)], ranks[std::size_t(o)]);
      if (std::abs(rho) >= spearman_threshold) partners.push_back({m.columns[std::size_t(o)], rho});
    }
  }
  for (const auto& c : m.columns)
    (retained_by_group_rule(c) ? rep.retained : rep.dropped).push_back(c);
  return rep;
}

// ---------------------------------------------------------------------------
// Cook's distance on a fixed-effects logistic fit

struct ConvergenceError : DataError {
  using DataError::DataError;
};

struct CooksResult {
  std::vector<double> distance;
  double threshold = 0;
  std::vector<std::size_t> retained;
  std::vector<std::size_t> dropped;
  int iterations = 0;
  Eigen::VectorXd coefficients;  // intercept first

  double drop_fraction() const {
    const auto n = retained.size() + dropped.size();
    return n ? double(dropped.size()) / double(n) : 0.0;
  }
};

inline double cooks_threshold(std::size_t n, std::size_t k, double multiplier = 4) {
  if (n <= k + 1) throw DataError("Cook's threshold needs n > k + 1");
  return multiplier / double(n - k - 1);
}

inline double logistic(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

/// Fits y ~ 1 + x by IRLS and drops rows whose Cook's distance exceeds
/// multiplier / (n - k - 1), with k = x.cols().
inline CooksResult cooks_outlier_filter(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        double multiplier, const std::string& model_name,
                                        int max_iterations = 100) {
  const auto n = x.rows(), k = x.cols();
  CooksResult res;
  res.threshold = cooks_threshold(std::size_t(n), std::size_t(k), multiplier);

  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = x;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd mu(n), w(n);
  auto update = [&] {
    const Eigen::VectorXd eta = design * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = std::clamp(logistic(eta[i]), 1e-12, 1.0 - 1e-12);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
  };
  auto deviance = [&] {
    double d = 0;
    for (Eigen::Index i = 0; i < n; ++i) d -= 2 * (y[i] * std::log(mu[i]) + (1 - y[i]) * std::log(1 - mu[i]));
    return d;
  };

  update();
  double dev = deviance();
  bool converged = false;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::VectorXd z = design * beta + ((y - mu).array() / w.array()).matrix();
    const Eigen::MatrixXd wx = sw.asDiagonal() * design;
    beta = wx.colPivHouseholderQr().solve((sw.array() * z.array()).matrix());
    update();
    const double next = deviance();
    res.iterations = it;
    if (std::abs(next - dev) / (std::abs(next) + 0.1) < 1e-10) {
      converged = true;
      dev = next;
      break;
    }
    dev = next;
  }
  if (!converged || !beta.allFinite())
    throw ConvergenceError("logistic fit did not converge: " + model_name);
  res.coefficients = beta;

  // Leverage from the final weighted least-squares step.
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd wx = sw.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wx);
  const auto rank = qr.rank();
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
  res.distance.resize(std::size_t(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::min(q.row(i).squaredNorm(), 1.0 - 1e-15);
    const double pearson_resid = (y[i] - mu[i]) / sw[i];
    const double d = pearson_resid * pearson_resid * h / (double(rank) * (1 - h) * (1 - h));
    res.distance[std::size_t(i)] = d;
    (d > res.threshold ? res.dropped : res.retained).push_back(std::size_t(i));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Cap sampling

namespace detail {

/// Uniform integer in [0, n) from a 64-bit engine, independent of the
/// standard library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do r = rng(); while (r >= limit);
  return r % n;
}

}  // namespace detail

struct CapReport {
  std::vector<std::string> capped_projects;
  std::size_t top_projects = 0;
};

/// Row indices kept after subsampling the largest projects. The top
/// ceil(cap_fraction * #projects) projects by row count (ties by name) are
/// reduced to `cap` rows uniformly without replacement; others are kept.
/// Indices are returned in ascending order.
inline std::vector<std::size_t> cap_sampling_indices(const std::vector<std::string>& project_of_row,
                                                     std::int64_t cap, double cap_fraction,
                                                     std::uint64_t seed,
                                                     CapReport* report = nullptr) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < project_of_row.size(); ++i) groups[project_of_row[i]].push_back(i);

  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> ranked;
  for (const auto& g : groups) ranked.push_back(&g);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](auto a, auto b) { return a->second.size() > b->second.size(); });
  const auto top = std::min(ranked.size(),
                            std::size_t(std::ceil(cap_fraction * double(ranked.size()) - 1e-9)));

  std::vector<bool> keep(project_of_row.size(), true);
  std::mt19937_64 rng(seed);
  CapReport local;
  local.top_projects = top;
  for (std::size_t r = 0; r < top; ++r) {
    auto rows = ranked[r]->second;
    if (std::int64_t(rows.size()) <= cap) continue;
    local.capped_projects.push_back(ranked[r]->first);
    // Partial Fisher-Yates: the first `cap` slots become the sample.
    for (std::size_t i = 0; i < std::size_t(cap); ++i)
      std::swap(rows[i], rows[i + detail::uniform_below(rng, rows.size() - i)]);
    for (std::size_t i = std::size_t(cap); i < rows.size(); ++i) keep[rows[i]] = false;
  }
  if (report) *report = local;

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

inline std::vector<FeatureRow> cap_sampling(const std::vector<FeatureRow>& rows, std::int64_t cap,
                                            double cap_fraction, std::uint64_t seed,
                                            CapReport* report = nullptr) {
  std::vector<std::string> projects;
  projects.reserve(rows.size());
  for (const auto& r : rows) projects.push_back(r.project.str());
  std::vector<FeatureRow> out;
  for (auto i : cap_sampling_indices(projects, cap, cap_fraction, seed, report))
    out.push_back(rows[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Regression variable sets

enum class ModelVariant { Ecosystem, Dependency, Collaborative };

inline constexpr const char* variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Ecosystem: return "ecosystem";
    case ModelVariant::Dependency: return "dependency";
    case ModelVariant::Collaborative: return "collaborative";
  }
  return "?";
}

/// Predictors of each regression variant. Integrator experience is left out
/// of every regression; the collaborative variant also omits the newcomer
/// and self-integrated controls.
inline std::vector<std::string> variant_columns(ModelVariant v) {
  std::vector<std::string> cols = {"ctrl_self_integrated", "ctrl_has_comments",
                                   "ctrl_external_comment", "ctrl_has_hash_reference",
                                   "ctrl_is_newcomer",     "ctrl_age_minutes",
                                   "ctrl_commit_count",    "intra_issues_submitted"};
  switch (v) {
    case ModelVariant::Ecosystem:
      cols.push_back("ecosystem_prs_submitted");
      break;
    case ModelVariant::Dependency:
      cols.insert(cols.end(), {"nondependency_prs_submitted", "downstream_prs_submitted",
                               "upstream_prs_submitted"});
      break;
    case ModelVariant::Collaborative:
      std::erase(cols, "ctrl_self_integrated");
      std::erase(cols, "ctrl_is_newcomer");
      cols.insert(cols.end(), {"centrality", "direct_collab"});
      break;
  }
  return cols;
}

}  // namespace ecocontrib

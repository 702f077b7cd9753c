#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "margmc/rng.hpp"

namespace margmc {

/// Row reordering of an MCMC sample: uniform random permutation or every K-th row.
struct Reorder {
  enum class Mode { permute, thin } mode = Mode::permute;
  int thin = 1;

  /// "permute" or "thin:K".
  static Reorder parse(const std::string& text);
  std::string to_string() const;
};

/// Row indices selected by `r` for a sample of n rows. Thinning keeps rows
/// K-1, 2K-1, ..., so the result has floor(n/K) entries.
std::vector<int> reorder_indices(int n, const Reorder& r, Philox& rng);

Eigen::MatrixXd reorder(const Eigen::MatrixXd& trace, const Reorder& r, Philox& rng);

struct EssResult {
  double ess = 0.0;
  bool constant = false;  // autocorrelations undefined; ess reported as n
};

/// n / (1 + 2 sum rho_k) with Geyer's initial positive sequence truncation,
/// clamped to [1, n]. Requires at least 10 values.
EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series);

enum class BatchStatistic { mean, sd };

/// sd of the per-batch statistic divided by sqrt(n_batches); the trailing
/// remainder of the series is dropped.
double mce_batch_means(const Eigen::Ref<const Eigen::VectorXd>& series, int n_batches = 50,
                       BatchStatistic statistic = BatchStatistic::mean);

/// Linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double q);

struct SummaryRow {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double mce_mean = 0.0;
  double mce_sd = 0.0;
  double ess = 0.0;
  double ess_per_second = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

/// One row per column of `draws`.
std::vector<SummaryRow> summarize(const Eigen::MatrixXd& draws,
                                  const std::vector<std::string>& labels, double wall_seconds,
                                  int n_batches = 50);

/// Trace CSV: one column per label, then optional extra columns
/// (logpost, accepted). Values written with 17 significant digits.
struct TraceTable {
  std::vector<std::string> labels;        // parameter columns
  Eigen::MatrixXd draws;
  std::vector<std::string> extra_labels;  // e.g. logpost, accepted
  Eigen::MatrixXd extra;
};

void write_trace_csv(std::ostream& out, const TraceTable& t);
/// Columns named `logpost` or `accepted` go to `extra`. Throws InputError on
/// malformed input or an empty trace.
TraceTable read_trace_csv(std::istream& in);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace margmc

#include "margmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "margmc/csv.hpp"
#include "margmc/error.hpp"

namespace margmc {

Reorder Reorder::parse(const std::string& text) {
  if (text == "permute") return {};
  if (text.rfind("thin:", 0) == 0) {
    Reorder r;
    r.mode = Mode::thin;
    try {
      std::size_t pos = 0;
      r.thin = std::stoi(text.substr(5), &pos);
      if (pos != text.size() - 5) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("reorder '" + text + "': expected thin:K with integer K");
    }
    if (r.thin < 1) throw InputError("reorder '" + text + "': K must be at least 1");
    return r;
  }
  throw InputError("reorder '" + text + "': expected 'permute' or 'thin:K'");
}

std::string Reorder::to_string() const {
  return mode == Mode::permute ? "permute" : "thin:" + std::to_string(thin);
}

std::vector<int> reorder_indices(int n, const Reorder& r, Philox& rng) {
  std::vector<int> idx;
  if (r.mode == Reorder::Mode::thin) {
    if (r.thin < 1) throw InputError("thinning interval must be at least 1");
    for (int i = r.thin - 1; i < n; i += r.thin) idx.push_back(i);
    return idx;
  }
  idx.resize(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Fisher-Yates on the raw stream so the permutation is platform independent.
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Eigen::MatrixXd reorder(const Eigen::MatrixXd& trace, const Reorder& r, Philox& rng) {
  const auto idx = reorder_indices(static_cast<int>(trace.rows()), r, rng);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), trace.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = trace.row(idx[i]);
  return out;
}

EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series) {
  const auto n = series.size();
  if (n < 10) throw InputError("ess needs at least 10 values");
  const double mean = series.mean();
  const Eigen::VectorXd x = series.array() - mean;
  const double c0 = x.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0) || c0 < 1e-300) return {static_cast<double>(n), true};

  auto rho = [&](Eigen::Index k) {
    if (k >= n) return 0.0;
    return x.head(n - k).dot(x.tail(n - k)) / static_cast<double>(n) / c0;
  };
  // tau = -1 + 2 * sum of the initial positive pair sums Gamma_m = rho_2m + rho_2m+1
  double tau = -1.0;
  for (Eigen::Index m = 0; 2 * m < n; ++m) {
    const double gamma = rho(2 * m) + rho(2 * m + 1);
    if (!(gamma > 0.0)) break;
    tau += 2.0 * gamma;
  }
  const double value = static_cast<double>(n) / tau;
  return {std::clamp(value, 1.0, static_cast<double>(n)), false};
}

double mce_batch_means(const Eigen::Ref<const Eigen::VectorXd>& series, int n_batches,
                       BatchStatistic statistic) {
  if (n_batches < 2) throw InputError("batch means need at least 2 batches");
  const Eigen::Index size = series.size() / n_batches;
  if (size < 1 || (statistic == BatchStatistic::sd && size < 2)) {
    throw InputError("series too short for " + std::to_string(n_batches) + " batches");
  }
  Eigen::VectorXd stat(n_batches);
  for (int b = 0; b < n_batches; ++b) {
    const auto seg = series.segment(b * size, size);
    const double m = seg.mean();
    stat[b] = statistic == BatchStatistic::mean
                  ? m
                  : std::sqrt((seg.array() - m).square().sum() / static_cast<double>(size - 1));
  }
  const double sm = stat.mean();
  const double var = (stat.array() - sm).square().sum() / static_cast<double>(n_batches - 1);
  return std::sqrt(var) / std::sqrt(static_cast<double>(n_batches));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const Eigen::MatrixXd& draws,
                                  const std::vector<std::string>& labels, double wall_seconds,
                                  int n_batches) {
  const auto n = draws.rows();
  if (n < 2) throw InputError("summary needs at least 2 draws");
  if (static_cast<std::size_t>(draws.cols()) != labels.size()) {
    throw InputError("label count does not match trace columns");
  }
  // keep at least two rows per batch so the batch sd is defined
  const int batches = static_cast<int>(std::max<Eigen::Index>(2, std::min<Eigen::Index>(n_batches, n / 2)));
  std::vector<SummaryRow> rows;
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    const Eigen::VectorXd col = draws.col(c);
    SummaryRow r;
    r.label = labels[static_cast<std::size_t>(c)];
    r.mean = col.mean();
    r.sd = std::sqrt((col.array() - r.mean).square().sum() / static_cast<double>(n - 1));
    if (n >= 2 * batches) {
      r.mce_mean = mce_batch_means(col, batches, BatchStatistic::mean);
      r.mce_sd = mce_batch_means(col, batches, BatchStatistic::sd);
    }
    r.ess = n >= 10 ? ess(col).ess : static_cast<double>(n);
    r.ess_per_second = wall_seconds > 0.0 ? r.ess / wall_seconds : 0.0;
    std::vector<double> v(col.data(), col.data() + n);
    r.q025 = quantile(v, 0.025);
    r.q50 = quantile(v, 0.5);
    r.q975 = quantile(v, 0.975);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- CSV

namespace {

double parse_number(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InputError("trace line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
}

}  // namespace

void write_trace_csv(std::ostream& out, const TraceTable& t) {
  std::vector<std::string> header = t.labels;
  header.insert(header.end(), t.extra_labels.begin(), t.extra_labels.end());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << csv::quote(header[i]);
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < t.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.draws.cols(); ++c) out << (c ? "," : "") << t.draws(r, c);
    for (Eigen::Index c = 0; c < t.extra.cols(); ++c) out << ',' << t.extra(r, c);
    out << '\n';
  }
}

TraceTable read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw InputError("trace file is empty");
  const auto header = csv::split(line);
  std::vector<int> param_cols;
  std::vector<int> extra_cols;
  TraceTable t;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c].empty()) throw InputError("trace header has an empty column name");
    if (header[c] == "logpost" || header[c] == "accepted") {
      extra_cols.push_back(c);
      t.extra_labels.push_back(header[c]);
    } else {
      param_cols.push_back(c);
      t.labels.push_back(header[c]);
    }
  }
  if (param_cols.empty()) throw InputError("trace has no parameter columns");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw InputError("trace line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_number(fields[c], line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("trace has no draws");
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.draws.resize(n, static_cast<Eigen::Index>(param_cols.size()));
  t.extra.resize(n, static_cast<Eigen::Index>(extra_cols.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < param_cols.size(); ++c) {
      t.draws(r, static_cast<Eigen::Index>(c)) = rows[r][param_cols[c]];
    }
    for (std::size_t c = 0; c < extra_cols.size(); ++c) {
      t.extra(r, static_cast<Eigen::Index>(c)) = rows[r][extra_cols[c]];
    }
  }
  return t;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "label,mean,sd,mce_mean,mce_sd,ess,ess_per_sec,q2.5,q50,q97.5\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << csv::quote(r.label) << ',' << r.mean << ',' << r.sd << ',' << r.mce_mean << ',' << r.mce_sd << ','
        << r.ess << ',' << r.ess_per_second << ',' << r.q025 << ',' << r.q50 << ',' << r.q975
        << '\n';
  }
}

}  // namespace margmc

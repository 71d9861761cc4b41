#include "t3time/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "t3time/errors.hpp"

namespace t3time {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Days since 1970-01-01 of a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month, day;
};

Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2), m, d};
}

bool read_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
  if (pos + len > s.size()) return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc() && p == s.data() + pos + len;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

SeriesTable SeriesTable::slice_rows(std::size_t start, std::size_t count) const {
  if (start + count > rows()) {
    throw DataError("row range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                    ") exceeds " + std::to_string(rows()) + " rows");
  }
  SeriesTable out;
  out.names = names;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(start),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(start + count));
  const std::size_t n = variables();
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(start * n),
                    values.begin() + static_cast<std::ptrdiff_t>((start + count) * n));
  return out;
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.size() < 10 || text[4] != '-') {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
    return v;
  }
  unsigned year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_uint(text, 0, 4, year) || text[7] != '-' || !read_uint(text, 5, 2, month) ||
      !read_uint(text, 8, 2, day)) {
    return std::nullopt;
  }
  if (text.size() > 10) {
    if (text[10] != ' ' && text[10] != 'T') return std::nullopt;
    if (text.size() < 16 || text[13] != ':' || !read_uint(text, 11, 2, hour) || !read_uint(text, 14, 2, minute)) {
      return std::nullopt;
    }
    if (text.size() > 16) {
      if (text[16] != ':' || text.size() < 19 || !read_uint(text, 17, 2, second)) return std::nullopt;
      // Fractional seconds and a trailing 'Z' are accepted and ignored.
      std::string_view rest = text.substr(19);
      if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
      }
      if (rest == "Z") rest = {};
      if (!rest.empty()) return std::nullopt;
    }
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    return std::nullopt;
  }
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t seconds) {
  const std::int64_t days = floor_div(seconds, 86400);
  const std::int64_t rem = seconds - days * 86400;
  const Civil c = civil_from_days(days);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld", static_cast<long long>(c.year), c.month,
                c.day, static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

SeriesTable parse_csv(std::string_view text, const std::string& source) {
  SeriesTable table;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields.size() < 2) throw DataError(source + ": header needs a timestamp column and at least one value column");
      for (std::size_t i = 1; i < fields.size(); ++i) table.names.emplace_back(fields[i]);
      header_seen = true;
      continue;
    }
    const std::size_t n = table.names.size();
    if (fields.size() != n + 1) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " columns, expected " + std::to_string(n + 1));
    }
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) {
      throw DataError(source + ": row " + std::to_string(line_no) + ", column 1: unparseable timestamp '" +
                      std::string(fields[0]) + "'");
    }
    if (!table.timestamps.empty() && *ts <= table.timestamps.back()) {
      throw DataError(source + ": row " + std::to_string(line_no) + ": timestamp " + std::string(fields[0]) +
                      " does not increase");
    }
    table.timestamps.push_back(*ts);
    for (std::size_t i = 1; i <= n; ++i) {
      double v = 0;
      const auto f = fields[i];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v)) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                        " (" + table.names[i - 1] + "): unparseable value '" + std::string(f) + "'");
      }
      table.values.push_back(v);
    }
  }
  if (!header_seen) throw DataError(source + ": empty file");
  return table;
}

SeriesTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path.string());
}

std::string to_csv(const SeriesTable& table) {
  std::ostringstream os;
  os << "date";
  for (const auto& n : table.names) os << ',' << n;
  os << '\n';
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    os << format_timestamp(table.timestamps[r]);
    for (std::size_t v = 0; v < table.variables(); ++v) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), table.at(r, v));
      os << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    os << '\n';
  }
  return os.str();
}

std::array<double, kMarkerDim> time_marker(std::int64_t seconds) {
  const std::int64_t days = floor_div(seconds, 86400);
  const std::int64_t rem = seconds - days * 86400;
  const Civil c = civil_from_days(days);
  // 1970-01-01 was a Thursday; weekday counts from Monday = 0.
  const std::int64_t weekday = ((days % 7) + 7 + 3) % 7;
  return {
      (static_cast<double>(c.month) - 1.0) / 11.0 - 0.5,
      (static_cast<double>(c.day) - 1.0) / 30.0 - 0.5,
      static_cast<double>(weekday) / 6.0 - 0.5,
      static_cast<double>(rem / 3600) / 23.0 - 0.5,
      static_cast<double>(rem / 60 % 60) / 59.0 - 0.5,
  };
}

// ------------------------------------------------------------ splits

SplitCounts split_by_ratio(std::size_t total_rows, double train_ratio, double test_ratio) {
  if (!(train_ratio > 0.0) || !(test_ratio >= 0.0) || train_ratio + test_ratio > 1.0) {
    throw ConfigError("split ratios must be positive and sum to at most 1");
  }
  const double t = static_cast<double>(total_rows);
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::floor(train_ratio * t + 1e-9));
  c.test = static_cast<std::size_t>(std::floor(test_ratio * t + 1e-9));
  c.val = total_rows - c.train - c.test;
  return c;
}

SplitCounts standard_split(const std::string& dataset, std::size_t total_rows) {
  std::string key = dataset;
  for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  constexpr std::size_t kMonth = 30 * 24;
  if (key.rfind("etth", 0) == 0) return {12 * kMonth, 4 * kMonth, 4 * kMonth};
  if (key.rfind("ettm", 0) == 0) return {12 * kMonth * 4, 4 * kMonth * 4, 4 * kMonth * 4};
  return split_by_ratio(total_rows, 0.7, 0.2);
}

std::array<Segment, 3> split(const SeriesTable& table, const SplitCounts& counts, std::size_t lookback,
                             bool share_context) {
  const std::size_t total = counts.train + counts.val + counts.test;
  if (total > table.rows()) {
    throw DataError("split needs " + std::to_string(total) + " rows, table has " + std::to_string(table.rows()));
  }
  if (share_context && lookback > counts.train) {
    throw InsufficientDataError("training segment (" + std::to_string(counts.train) +
                                " rows) is shorter than the lookback " + std::to_string(lookback));
  }
  const std::size_t ctx_val = share_context ? std::min(lookback, counts.train) : 0;
  const std::size_t ctx_test = share_context ? std::min(lookback, counts.train + counts.val) : 0;
  std::array<Segment, 3> out;
  out[0] = {table.slice_rows(0, counts.train), 0};
  out[1] = {table.slice_rows(counts.train - ctx_val, counts.val + ctx_val), ctx_val};
  out[2] = {table.slice_rows(counts.train + counts.val - ctx_test, counts.test + ctx_test), ctx_test};
  return out;
}

std::size_t anchor_count(std::size_t rows, std::size_t lookback) {
  return rows >= lookback ? rows - lookback + 1 : 0;
}

std::size_t window_count(std::size_t rows, std::size_t lookback, std::size_t horizon) {
  return rows >= lookback + horizon ? rows - lookback - horizon + 1 : 0;
}

std::size_t few_shot_steps(std::size_t train_rows, std::size_t lookback, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("few-shot fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t anchors = anchor_count(train_rows, lookback);
  return std::min(anchors, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(anchors) + 1e-9)));
}

SeriesTable few_shot_subset(const SeriesTable& train, double fraction, std::size_t lookback, std::size_t horizon) {
  const std::size_t steps = few_shot_steps(train.rows(), lookback, fraction);
  const std::size_t rows = steps == 0 ? 0 : steps + lookback - 1;
  if (rows < lookback + horizon) {
    throw InsufficientDataError("few-shot fraction " + std::to_string(fraction) + " keeps " + std::to_string(steps) +
                                " training steps (" + std::to_string(rows) + " rows); a window needs " +
                                std::to_string(lookback + horizon));
  }
  return train.slice_rows(0, rows);
}

// ------------------------------------------------------------ normalization

NormMode parse_norm_mode(const std::string& text) {
  if (text == "instance") return NormMode::instance;
  if (text == "global") return NormMode::global;
  throw ConfigError("normalization must be 'instance' or 'global', got '" + text + "'");
}

std::string norm_mode_name(NormMode mode) { return mode == NormMode::instance ? "instance" : "global"; }

void normalize_window(std::span<double> window, std::size_t variables, std::size_t lookback, std::span<double> mean,
                      std::span<double> std_dev) {
  if (window.size() != variables * lookback || mean.size() != variables || std_dev.size() != variables) {
    throw DataError("normalize_window: buffer sizes do not match " + std::to_string(variables) + " x " +
                    std::to_string(lookback));
  }
  for (std::size_t v = 0; v < variables; ++v) {
    auto row = window.subspan(v * lookback, lookback);
    double m = 0;
    for (double x : row) m += x;
    m /= static_cast<double>(lookback);
    double var = 0;
    for (double x : row) var += (x - m) * (x - m);
    var /= static_cast<double>(lookback);
    double s = std::sqrt(var);
    if (!(s > 1e-12 * std::max(1.0, std::abs(m)))) s = 1.0;
    for (double& x : row) x = (x - m) / s;
    mean[v] = m;
    std_dev[v] = s;
  }
}

std::vector<double> denormalize_forecast(std::span<const double> y_norm, std::size_t batch, std::size_t horizon,
                                         std::size_t variables, std::span<const double> mean,
                                         std::span<const double> std_dev) {
  if (y_norm.size() != batch * horizon * variables || mean.size() != batch * variables ||
      std_dev.size() != batch * variables) {
    throw DataError("denormalize_forecast: statistics do not match a (" + std::to_string(batch) + ", " +
                    std::to_string(horizon) + ", " + std::to_string(variables) + ") forecast");
  }
  std::vector<double> out(y_norm.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t v = 0; v < variables; ++v) {
        const std::size_t i = (b * horizon + t) * variables + v;
        out[i] = y_norm[i] * std_dev[b * variables + v] + mean[b * variables + v];
      }
    }
  }
  return out;
}

GlobalStats column_stats(const SeriesTable& table) {
  const std::size_t n = table.variables(), rows = table.rows();
  GlobalStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
  if (rows == 0) return s;
  for (std::size_t v = 0; v < n; ++v) {
    double m = 0;
    for (std::size_t r = 0; r < rows; ++r) m += table.at(r, v);
    m /= static_cast<double>(rows);
    double var = 0;
    for (std::size_t r = 0; r < rows; ++r) var += (table.at(r, v) - m) * (table.at(r, v) - m);
    const double sd = std::sqrt(var / static_cast<double>(rows));
    s.mean[v] = m;
    s.std_dev[v] = sd > 0 ? sd : 1.0;
  }
  return s;
}

// ------------------------------------------------------------ windows

template <typename T>
Tensor<T> WindowBatch::x_tensor() const {
  return Tensor<T>({batch, variables, lookback}, std::vector<T>(x_norm.begin(), x_norm.end()));
}

template <typename T>
Tensor<T> WindowBatch::target_tensor() const {
  return Tensor<T>({batch, horizon, variables}, std::vector<T>(target_norm.begin(), target_norm.end()));
}

template Tensor<float> WindowBatch::x_tensor<float>() const;
template Tensor<double> WindowBatch::x_tensor<double>() const;
template Tensor<float> WindowBatch::target_tensor<float>() const;
template Tensor<double> WindowBatch::target_tensor<double>() const;

WindowDataset::WindowDataset(SeriesTable table, std::size_t lookback, std::size_t horizon, NormMode mode,
                             std::optional<GlobalStats> stats)
    : table_(std::move(table)),
      lookback_(lookback),
      horizon_(horizon),
      count_(window_count(table_.rows(), lookback, horizon)),
      mode_(mode) {
  if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be positive");
  if (mode_ == NormMode::global) {
    stats_ = stats ? std::move(*stats) : column_stats(table_);
    if (stats_.mean.size() != table_.variables()) throw DataError("global statistics do not match the table");
  }
  if (count_ == 0) {
    std::clog << "warning: segment of " << table_.rows() << " rows holds no window of " << lookback << " + "
              << horizon << " steps\n";
  }
}

WindowBatch WindowDataset::range(std::size_t start, std::size_t count) const {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
  return batch(idx);
}

WindowBatch WindowDataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t n = table_.variables(), l = lookback_, lp = horizon_, b = indices.size();
  WindowBatch wb;
  wb.batch = b;
  wb.variables = n;
  wb.lookback = l;
  wb.horizon = lp;
  wb.x_norm.resize(b * n * l);
  wb.target_norm.resize(b * lp * n);
  wb.target_raw.resize(b * lp * n);
  wb.mean.resize(b * n);
  wb.std_dev.resize(b * n);
  wb.time_markers.resize(b * l * kMarkerDim);
  wb.window_indices.assign(indices.begin(), indices.end());
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t w = indices[i];
    if (w >= count_) {
      throw std::out_of_range("window " + std::to_string(w) + " outside [0, " + std::to_string(count_) + ")");
    }
    auto x = std::span<double>(wb.x_norm).subspan(i * n * l, n * l);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t t = 0; t < l; ++t) x[v * l + t] = table_.at(w + t, v);
    }
    auto mean = std::span<double>(wb.mean).subspan(i * n, n);
    auto sd = std::span<double>(wb.std_dev).subspan(i * n, n);
    if (mode_ == NormMode::instance) {
      normalize_window(x, n, l, mean, sd);
    } else {
      for (std::size_t v = 0; v < n; ++v) {
        mean[v] = stats_.mean[v];
        sd[v] = stats_.std_dev[v];
        for (std::size_t t = 0; t < l; ++t) x[v * l + t] = (x[v * l + t] - mean[v]) / sd[v];
      }
    }
    for (std::size_t t = 0; t < lp; ++t) {
      for (std::size_t v = 0; v < n; ++v) {
        const double y = table_.at(w + l + t, v);
        wb.target_raw[(i * lp + t) * n + v] = y;
        wb.target_norm[(i * lp + t) * n + v] = (y - mean[v]) / sd[v];
      }
    }
    for (std::size_t t = 0; t < l; ++t) {
      const auto m = time_marker(table_.timestamps[w + t]);
      std::copy(m.begin(), m.end(), wb.time_markers.begin() + static_cast<std::ptrdiff_t>((i * l + t) * kMarkerDim));
    }
  }
  return wb;
}

}  // namespace t3time

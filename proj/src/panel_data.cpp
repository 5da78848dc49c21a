#include "panelkern/panel_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <system_error>

#include "panelkern/errors.hpp"

namespace panelkern {

int at_risk(const Subject& subject, double t) {
  return subject.censor_time >= t ? 1 : 0;
}

long long count_at(const Subject& subject, double t) {
  const auto it = std::upper_bound(subject.visit_times.begin(), subject.visit_times.end(), t);
  if (it == subject.visit_times.begin()) return 0;
  const auto idx = static_cast<std::size_t>(it - subject.visit_times.begin()) - 1;
  return subject.cumulative_counts[idx];
}

int has_visit_at(const Subject& subject, double t) {
  return std::binary_search(subject.visit_times.begin(), subject.visit_times.end(), t) ? 1 : 0;
}

std::string to_string(const Violation& violation) {
  std::string out = violation.rule;
  if (!violation.subject_id.empty()) out += " [subject " + violation.subject_id + "]";
  if (!violation.detail.empty()) out += ": " + violation.detail;
  return out;
}

std::vector<Violation> validate(const PanelDataset& dataset) {
  std::vector<Violation> out;
  const auto flag = [&out](const std::string& id, const std::string& rule,
                           const std::string& detail) {
    out.push_back({id, rule, detail});
  };

  if (!(dataset.tau > 0.0) || !std::isfinite(dataset.tau)) {
    flag("", "horizon", "tau must be positive and finite");
  }
  if (dataset.subjects.size() < 2) {
    flag("", "dataset size", "need at least 2 subjects");
  }

  for (const Subject& s : dataset.subjects) {
    if (s.visit_times.empty()) {
      flag(s.id, "visits", "subject has no visits");
      continue;
    }
    if (s.visit_times.size() != s.cumulative_counts.size()) {
      flag(s.id, "visits", "visit_times and cumulative_counts differ in length");
      continue;
    }
    if (!std::isfinite(s.covariate)) flag(s.id, "covariate", "not finite");
    if (!std::isfinite(s.censor_time) || s.censor_time < 0.0) {
      flag(s.id, "censor time", "must be finite and nonnegative");
    }
    for (std::size_t k = 0; k < s.visit_times.size(); ++k) {
      const double t = s.visit_times[k];
      if (!std::isfinite(t) || t <= 0.0) {
        flag(s.id, "visit times", "visit " + std::to_string(k) + " must be positive and finite");
        break;
      }
      if (k > 0 && !(t > s.visit_times[k - 1])) {
        flag(s.id, "visit times",
             "must be strictly increasing (tie or inversion at visit " + std::to_string(k) + ")");
        break;
      }
      if (std::isfinite(dataset.tau) && t > dataset.tau) {
        flag(s.id, "visit times", "visit at " + std::to_string(t) + " lies beyond tau");
        break;
      }
    }
    for (std::size_t k = 0; k < s.cumulative_counts.size(); ++k) {
      if (s.cumulative_counts[k] < 0) {
        flag(s.id, "counts", "negative count at visit " + std::to_string(k));
        break;
      }
      if (k > 0 && s.cumulative_counts[k] < s.cumulative_counts[k - 1]) {
        flag(s.id, "counts", "cumulative count drops at visit " + std::to_string(k));
        break;
      }
    }
  }

  if (dataset.subjects.size() >= 2) {
    const double first = dataset.subjects.front().covariate;
    const bool all_equal =
        std::all_of(dataset.subjects.begin(), dataset.subjects.end(),
                    [first](const Subject& s) { return s.covariate == first; });
    if (all_equal) flag("", "distinct covariates", "all subjects share one covariate value");
  }
  return out;
}

void require_valid(const PanelDataset& dataset) {
  const std::vector<Violation> violations = validate(dataset);
  if (violations.empty()) return;
  std::string message = "invalid dataset (" + std::to_string(violations.size()) + " violations):";
  for (const Violation& v : violations) message += "\n  " + to_string(v);
  throw ValidationError(message);
}

namespace {

double parse_double_field(const std::string& field, std::size_t line, const char* name) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw CsvParseError(line, std::string(name) + " is not a number: '" + field + "'");
  }
  return value;
}

long long parse_count_field(const std::string& field, std::size_t line) {
  long long value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw CsvParseError(line, "cumulative_count is not an integer: '" + field + "'");
  }
  return value;
}

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<std::string> fields;
  std::string current;
  for (const char c : row) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

constexpr const char* kHeader = "subject_id,visit_time,cumulative_count,covariate,censor_time";

struct RawRow {
  double time;
  long long count;
  std::size_t line;
};

struct RawSubject {
  std::vector<RawRow> rows;
  double covariate = 0.0;
  std::optional<double> censor;
  std::size_t order = 0;
};

}  // namespace

PanelDataset ingest_csv(std::istream& in, std::optional<double> tau) {
  std::map<std::string, RawSubject> by_id;
  std::size_t order = 0;
  std::size_t line_no = 0;
  std::string row;
  bool header_seen = false;

  while (std::getline(in, row)) {
    ++line_no;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    if (row[0] == '#') continue;
    if (!header_seen) {
      if (row != kHeader) {
        throw CsvParseError(line_no, std::string("expected header '") + kHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = split_csv_row(row);
    if (fields.size() != 5) {
      throw CsvParseError(line_no,
                          "expected 5 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw CsvParseError(line_no, "empty subject_id");

    RawRow raw;
    raw.time = parse_double_field(fields[1], line_no, "visit_time");
    raw.count = parse_count_field(fields[2], line_no);
    raw.line = line_no;
    const double covariate = parse_double_field(fields[3], line_no, "covariate");
    std::optional<double> censor;
    if (!fields[4].empty()) censor = parse_double_field(fields[4], line_no, "censor_time");

    auto [it, inserted] = by_id.try_emplace(fields[0]);
    RawSubject& rs = it->second;
    if (inserted) {
      rs.order = order++;
      rs.covariate = covariate;
      rs.censor = censor;
    } else {
      if (rs.covariate != covariate) {
        throw CsvParseError(line_no, "covariate differs from earlier rows of this subject");
      }
      if (rs.censor.has_value() != censor.has_value() ||
          (censor.has_value() && *rs.censor != *censor)) {
        throw CsvParseError(line_no, "censor_time differs from earlier rows of this subject");
      }
    }
    rs.rows.push_back(raw);
  }
  if (!header_seen) throw CsvParseError(line_no, "missing header row");

  PanelDataset dataset;
  dataset.subjects.resize(by_id.size());
  for (auto& [id, rs] : by_id) {
    std::sort(rs.rows.begin(), rs.rows.end(),
              [](const RawRow& a, const RawRow& b) { return a.time < b.time; });
    Subject s;
    s.id = id;
    s.covariate = rs.covariate;
    for (const RawRow& r : rs.rows) {
      s.visit_times.push_back(r.time);
      s.cumulative_counts.push_back(r.count);
    }
    s.censor_time = rs.censor.value_or(s.visit_times.back());
    dataset.subjects[rs.order] = std::move(s);
  }

  if (tau.has_value()) {
    dataset.tau = *tau;
  } else {
    double max_time = 0.0;
    for (const Subject& s : dataset.subjects) {
      max_time = std::max(max_time, s.censor_time);
      if (!s.visit_times.empty()) max_time = std::max(max_time, s.visit_times.back());
    }
    dataset.tau = max_time;
  }

  require_valid(dataset);
  return dataset;
}

PanelDataset ingest_csv_file(const std::string& path, std::optional<double> tau) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  return ingest_csv(in, tau);
}

PanelDataset ingest_csv_string(const std::string& text, std::optional<double> tau) {
  std::istringstream in(text);
  return ingest_csv(in, tau);
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] =
      std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::general, 17);
  return std::string(buffer, ptr);
}

void emit_csv(const PanelDataset& dataset, std::ostream& out) {
  out << kHeader << '\n';
  for (const Subject& s : dataset.subjects) {
    for (std::size_t k = 0; k < s.visit_times.size(); ++k) {
      out << s.id << ',' << format_double(s.visit_times[k]) << ',' << s.cumulative_counts[k]
          << ',' << format_double(s.covariate) << ',' << format_double(s.censor_time) << '\n';
    }
  }
}

std::string emit_csv_string(const PanelDataset& dataset) {
  std::ostringstream out;
  emit_csv(dataset, out);
  return out.str();
}

}  // namespace panelkern

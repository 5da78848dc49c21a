#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace panelkern {

// One subject's panel record: the event count is seen only at the listed
// visit times, as a cumulative total.  Counts between visits are unknown.
struct Subject {
  std::string id;
  std::vector<double> visit_times;             // strictly increasing, > 0
  std::vector<long long> cumulative_counts;    // nondecreasing, >= 0
  double covariate = 0.0;
  double censor_time = 0.0;
};

// Treat as immutable once built; all estimation code only reads it, so a
// dataset can be shared across threads freely.
struct PanelDataset {
  std::vector<Subject> subjects;
  double tau = 0.0;  // end of the observation horizon
};

// 1 while the subject is still under observation at t.
int at_risk(const Subject& subject, double t);

// Cumulative count at the last visit at or before t (0 before the first visit).
long long count_at(const Subject& subject, double t);

// 1 if the subject has a visit exactly at t.
int has_visit_at(const Subject& subject, double t);

struct Violation {
  std::string subject_id;  // empty for dataset-level rules
  std::string rule;
  std::string detail;
};

std::string to_string(const Violation& violation);

// Returns every invariant violation found; empty means the dataset is valid.
std::vector<Violation> validate(const PanelDataset& dataset);

// Throws ValidationError listing all violations when the dataset is invalid.
void require_valid(const PanelDataset& dataset);

// Reads the panel CSV schema
//   subject_id,visit_time,cumulative_count,covariate,censor_time
// Lines starting with '#' are skipped.  Rows of one subject may appear in any
// order and are sorted by visit time; covariate and censor_time must be
// constant within a subject, and censor_time may be left empty, in which case
// it defaults to the subject's last visit.  tau defaults to the largest visit
// or censor time unless overridden.  Throws CsvParseError / ValidationError.
PanelDataset ingest_csv(std::istream& in, std::optional<double> tau = std::nullopt);
PanelDataset ingest_csv_file(const std::string& path, std::optional<double> tau = std::nullopt);
PanelDataset ingest_csv_string(const std::string& text, std::optional<double> tau = std::nullopt);

// Writes the same schema with 17 significant digits, one row per visit.
void emit_csv(const PanelDataset& dataset, std::ostream& out);
std::string emit_csv_string(const PanelDataset& dataset);

// Locale-independent numeric formatting shared by all CSV writers.
std::string format_double(double value);

}  // namespace panelkern

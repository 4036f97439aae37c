#pragma once

#include <Eigen/Core>
#include <string>

#include "gmom/bench.hpp"
#include "gmom/model.hpp"
#include "gmom/recovery.hpp"

namespace gmom {

// Raised on malformed input files; the message carries a line/field
// diagnostic where one applies.
struct InputFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// MixtureParams JSON: {"k", "d", "weights": [...], "means": [[...] per
// component], "covariances": [row-major d*d array per component]}.
std::string params_to_json(const MixtureParams& p);
MixtureParams params_from_json(const std::string& text);

// MomentSets JSON: {"mV1": [...], "mV2": [[...]], "mV3": [{"index": [...],
// "value": v}], "method": "k"|"low"}.
std::string moment_sets_to_json(const MomentSets& m);
MomentSets moment_sets_from_json(const std::string& text);

std::string report_to_json(const SolveReport& r);

// Experiment config JSON; unknown keys are rejected to catch typos.
ExperimentConfig config_from_json(const std::string& text);

// CSV sample matrix, rows = samples, columns = dimensions. A single leading
// non-numeric row is treated as a header. transpose flips the orientation
// after reading.
Eigen::MatrixXd read_csv_matrix(const std::string& path, bool transpose = false);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials);
void write_summary_csv(const std::string& path, const std::vector<CellSummary>& summary);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace gmom

#include "gmom/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace gmom {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InputFormatError(std::string(what) + ": invalid JSON");
  return j;
}

}  // namespace

std::string params_to_json(const MixtureParams& p) {
  json j;
  j["k"] = p.k;
  j["d"] = p.d;
  j["weights"] = p.weights;
  json means = json::array();
  for (const auto& m : p.means) {
    json row = json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) row.push_back(m(i));
    means.push_back(std::move(row));
  }
  j["means"] = std::move(means);
  json covs = json::array();
  for (const auto& c : p.covariances) {
    json flat = json::array();
    for (Eigen::Index r = 0; r < c.rows(); ++r)
      for (Eigen::Index q = 0; q < c.cols(); ++q) flat.push_back(c(r, q));
    covs.push_back(std::move(flat));
  }
  j["covariances"] = std::move(covs);
  return j.dump(2);
}

MixtureParams params_from_json(const std::string& text) {
  json j = parse_json(text, "params");
  MixtureParams p;
  try {
    p.k = j.at("k").get<int>();
    p.d = j.at("d").get<int>();
    p.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& row : j.at("means")) {
      std::vector<double> v = row.get<std::vector<double>>();
      p.means.emplace_back(Eigen::Map<Eigen::VectorXd>(v.data(), v.size()));
    }
    for (const auto& flat : j.at("covariances")) {
      std::vector<double> v = flat.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != p.d * p.d)
        throw InputFormatError("params: covariance is not a d*d row-major array");
      Eigen::MatrixXd c(p.d, p.d);
      for (int r = 0; r < p.d; ++r)
        for (int q = 0; q < p.d; ++q) c(r, q) = v[r * p.d + q];
      p.covariances.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InputFormatError(std::string("params: ") + e.what());
  }
  return p;
}

std::string moment_sets_to_json(const MomentSets& m) {
  json j;
  j["mV1"] = m.mV1;
  j["mV2"] = m.mV2;
  json v3 = json::array();
  for (const auto& [idx, val] : m.mV3) v3.push_back({{"index", idx}, {"value", val}});
  j["mV3"] = std::move(v3);
  j["method"] = to_string(m.method);
  return j.dump(2);
}

MomentSets moment_sets_from_json(const std::string& text) {
  json j = parse_json(text, "moments");
  MomentSets m;
  try {
    m.mV1 = j.at("mV1").get<std::vector<double>>();
    m.mV2 = j.at("mV2").get<std::vector<std::vector<double>>>();
    for (const auto& entry : j.at("mV3"))
      m.mV3[entry.at("index").get<std::vector<int>>()] = entry.at("value").get<double>();
    m.method = v3_method_from_string(j.at("method").get<std::string>());
  } catch (const json::exception& e) {
    throw InputFormatError(std::string("moments: ") + e.what());
  }
  return m;
}

std::string report_to_json(const SolveReport& r) {
  json j;
  j["stage_failed"] = to_string(r.stage_failed);
  j["candidates_found"] = r.candidates_found;
  j["residuals"] = r.residuals;
  j["elapsed_s"] = r.elapsed_s;
  j["params_recovered"] = r.params.has_value();
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j = parse_json(text, "config");
  ExperimentConfig c;
  static const std::set<std::string> known = {
      "d_values", "k",      "sample_sizes", "exact_moments",          "trials", "known_weights",
      "method",   "seed",   "time_budget_s", "shared_known_covariance", "diagonal_only"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw InputFormatError("config: unknown key '" + it.key() + "'");
  }
  try {
    c.d_values = j.at("d_values").get<std::vector<int>>();
    c.k = j.at("k").get<int>();
    if (j.contains("sample_sizes")) c.sample_sizes = j["sample_sizes"].get<std::vector<long long>>();
    if (j.contains("exact_moments")) c.exact_moments = j["exact_moments"].get<bool>();
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("known_weights")) c.known_weights = j["known_weights"].get<bool>();
    if (j.contains("shared_known_covariance"))
      c.shared_known_covariance = j["shared_known_covariance"].get<bool>();
    if (j.contains("diagonal_only")) c.diagonal_only = j["diagonal_only"].get<bool>();
    if (j.contains("method")) c.method = v3_method_from_string(j["method"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("time_budget_s")) c.time_budget_s = j["time_budget_s"].get<double>();
  } catch (const json::exception& e) {
    throw InputFormatError(std::string("config: ") + e.what());
  }
  if (!c.exact_moments && c.sample_sizes.empty())
    throw InputFormatError("config: sample_sizes required unless exact_moments is true");
  return c;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path, bool transpose) {
  std::ifstream in(path);
  if (!in) throw InputFormatError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    int fieldno = 0;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      ++fieldno;
      // Trim whitespace and a trailing carriage return.
      size_t b = field.find_first_not_of(" \t\r");
      size_t e = field.find_last_not_of(" \t\r");
      if (b == std::string::npos) {
        numeric = false;
        break;
      }
      field = field.substr(b, e - b + 1);
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        if (lineno == 1 && rows.empty()) {
          numeric = false;  // header row
          break;
        }
        std::ostringstream os;
        os << path << ": line " << lineno << ", field " << fieldno << ": not a number ('"
           << field << "')";
        throw InputFormatError(os.str());
      }
      row.push_back(value);
    }
    if (!numeric) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream os;
      os << path << ": line " << lineno << ": expected " << rows.front().size()
         << " fields, got " << row.size();
      throw InputFormatError(os.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputFormatError(path + ": no data rows");

  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  if (transpose) return m.transpose();
  return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ",";
      out << m(r, c);
    }
    out << "\n";
  }
}

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& trials) {
  std::ofstream out(path);
  out << std::setprecision(12);
  out << "d,k,n_samples,seed,passed,stage_failed,weight_error,mean_error,covariance_error,"
         "elapsed_s\n";
  for (const TrialRecord& t : trials) {
    out << t.d << "," << t.k << ",";
    if (t.n_samples < 0) out << "exact";
    else out << t.n_samples;
    out << "," << t.seed << "," << (t.passed ? 1 : 0) << ","
        << (t.timeout ? "timeout" : t.stage_failed) << ",";
    if (t.passed)
      out << t.weight_error << "," << t.mean_error << "," << t.covariance_error;
    else
      out << ",,";
    out << "," << t.elapsed_s << "\n";
  }
}

void write_summary_csv(const std::string& path, const std::vector<CellSummary>& summary) {
  // One row per (metric, N), one column per d, mirroring the appendix
  // table layout.
  std::vector<int> ds;
  std::vector<long long> ns;
  for (const CellSummary& s : summary) {
    if (std::find(ds.begin(), ds.end(), s.d) == ds.end()) ds.push_back(s.d);
    if (std::find(ns.begin(), ns.end(), s.n_samples) == ns.end()) ns.push_back(s.n_samples);
  }
  auto cell = [&](int d, long long n) -> const CellSummary* {
    for (const CellSummary& s : summary)
      if (s.d == d && s.n_samples == n) return &s;
    return nullptr;
  };

  std::ofstream out(path);
  out << std::setprecision(8);
  out << "metric,n_samples";
  for (int d : ds) out << ",d=" << d;
  out << "\n";
  const char* metrics[] = {"median_weight_error", "median_mean_error", "median_covariance_error",
                           "pass_rate", "dim1_failures", "median_elapsed_s"};
  for (const char* metric : metrics) {
    for (long long n : ns) {
      out << metric << ",";
      if (n < 0) out << "exact";
      else out << n;
      for (int d : ds) {
        out << ",";
        const CellSummary* s = cell(d, n);
        if (!s) continue;
        std::string m(metric);
        if (m == "median_weight_error") out << s->median_weight_error;
        else if (m == "median_mean_error") out << s->median_mean_error;
        else if (m == "median_covariance_error") out << s->median_covariance_error;
        else if (m == "pass_rate") out << static_cast<double>(s->passes) / s->trials;
        else if (m == "dim1_failures") out << s->dim1_failures;
        else out << s->median_elapsed_s;
      }
      out << "\n";
    }
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormatError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputFormatError("cannot write '" + path + "'");
  out << text;
}

}  // namespace gmom

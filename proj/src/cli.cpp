#include "gmom/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "gmom/bench.hpp"
#include "gmom/io.hpp"
#include "gmom/moments.hpp"
#include "gmom/recovery.hpp"

namespace gmom {

namespace {

std::string sibling_path(const std::string& output, const std::string& suffix) {
  std::filesystem::path p(output);
  std::filesystem::path q = p.parent_path() / (p.stem().string() + suffix);
  return q.string();
}

std::vector<double> weights_from_json_file(const std::string& path, int k) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw InputFormatError(path + ": invalid JSON");
  std::vector<double> w;
  if (j.is_array()) w = j.get<std::vector<double>>();
  else if (j.contains("weights")) w = j["weights"].get<std::vector<double>>();
  else throw InputFormatError(path + ": expected an array or an object with \"weights\"");
  if (static_cast<int>(w.size()) != k)
    throw InputFormatError(path + ": expected " + std::to_string(k) + " weights");
  return w;
}

Eigen::MatrixXd matrix_from_json_file(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw InputFormatError(path + ": invalid JSON");
  nlohmann::json rows = j.is_array() ? j : j.value("matrix", nlohmann::json());
  if (!rows.is_array() || rows.empty())
    throw InputFormatError(path + ": expected a nested array of matrix rows");
  auto data = rows.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(data.size(), data.front().size());
  for (size_t r = 0; r < data.size(); ++r) {
    if (data[r].size() != data.front().size())
      throw InputFormatError(path + ": ragged matrix rows");
    for (size_t c = 0; c < data[r].size(); ++c) m(r, c) = data[r][c];
  }
  return m;
}

struct EstimateArgs {
  int k = 0;
  std::string from_moments, input, known_weights_path, shared_cov_path, output = "params.json";
  std::string method = "k";
  bool cycle = false;
  bool transpose = false;
  std::uint64_t seed = 0x676d6f6dULL;
  double time_budget = 0.0;  // 0 = unlimited
};

int cmd_estimate(const EstimateArgs& a) {
  EstimateOptions eopts;
  eopts.tracker.seed = a.seed;
  eopts.repair_seed = mix_seed(a.seed, 0x726570ULL);

  SolveReport report;
  if (!a.shared_cov_path.empty()) {
    // Algorithm 3: uniform mixture, shared known covariance.
    Eigen::MatrixXd sigma = matrix_from_json_file(a.shared_cov_path);
    SharedCovarianceMoments m;
    int d = 0;
    if (!a.input.empty()) {
      Eigen::MatrixXd samples = read_csv_matrix(a.input, a.transpose);
      d = static_cast<int>(samples.cols());
      m = shared_covariance_sample_moments(samples, a.k);
    } else {
      MomentSets ms = moment_sets_from_json(read_text_file(a.from_moments));
      if (ms.method != V3Method::k)
        throw InputFormatError(
            "shared-covariance estimation from a moments file needs method \"k\" (it reads the "
            "cross moments m_{t e_1 + e_i})");
      d = ms.dimension();
      if (static_cast<int>(ms.mV1.size()) < a.k + 1)
        throw InputFormatError("moments file lacks orders 1..k in mV1");
      m.mV1.assign(ms.mV1.begin() + 1, ms.mV1.begin() + 1 + a.k);
      m.cross.assign(std::max(0, d - 1), std::vector<double>(a.k));
      for (int i = 1; i < d; ++i) {
        m.cross[i - 1][0] = ms.mV2.at(i - 1).at(0);
        for (int t = 1; t < a.k; ++t) {
          std::vector<int> idx(d, 0);
          idx[0] = t;
          idx[i] = 1;
          auto it = ms.mV3.find(idx);
          if (it == ms.mV3.end())
            throw InputFormatError("moments file lacks the cross moment m_{t e_1 + e_i} for t=" +
                                   std::to_string(t) + ", i=" + std::to_string(i + 1));
          m.cross[i - 1][t] = it->second;
        }
      }
    }
    if (sigma.rows() != d)
      throw InputFormatError("shared covariance matrix dimension does not match the data");
    report = estimate_shared_known_covariance(d, a.k, sigma, m.mV1, m.cross, eopts);
  } else if (a.cycle) {
    if (a.input.empty())
      throw InputFormatError(
          "--cycle requires --input samples (a moments file cannot serve dimensions n >= 2 in "
          "the leading role)");
    Eigen::MatrixXd samples = read_csv_matrix(a.input, a.transpose);
    SampleMomentProvider provider(samples, a.k, v3_method_from_string(a.method));
    std::optional<std::vector<double>> known;
    if (!a.known_weights_path.empty()) known = weights_from_json_file(a.known_weights_path, a.k);
    report = estimate_with_cycling(provider, known, eopts);
  } else {
    MomentSets moments;
    if (!a.input.empty()) {
      Eigen::MatrixXd samples = read_csv_matrix(a.input, a.transpose);
      moments = sample_moments(samples, a.k, v3_method_from_string(a.method));
    } else {
      moments = moment_sets_from_json(read_text_file(a.from_moments));
    }
    int d = moments.dimension();
    std::optional<std::vector<double>> known;
    if (!a.known_weights_path.empty()) known = weights_from_json_file(a.known_weights_path, a.k);
    report = estimate_parameters(d, a.k, moments, known, eopts);
  }

  write_text_file(sibling_path(a.output, ".report.json"), report_to_json(report));
  if (report.params) {
    write_text_file(a.output, params_to_json(*report.params));
    std::cout << "wrote " << a.output << " (candidates: " << report.candidates_found
              << ", elapsed " << report.elapsed_s << " s)\n";
  } else {
    std::cerr << "estimation failed at stage " << to_string(report.stage_failed)
              << " (report written alongside)\n";
    return kExitNoSolution;
  }
  if (a.time_budget > 0.0 && report.elapsed_s > a.time_budget) {
    std::cerr << "time budget exceeded (" << report.elapsed_s << " s > " << a.time_budget
              << " s)\n";
    return kExitTimeout;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian mixture parameter recovery from moments"};
  app.require_subcommand(1);

  // --- moments
  auto* cmd_m = app.add_subcommand("moments", "compute sample moments from a CSV sample matrix");
  std::string m_input, m_output = "moments.json", m_method = "k";
  int m_k = 0;
  bool m_transpose = false;
  cmd_m->add_option("--input", m_input, "CSV of samples (rows = samples)")->required();
  cmd_m->add_option("--k", m_k, "number of mixture components")->required();
  cmd_m->add_option("--method", m_method, "off-diagonal moment selection: k or low");
  cmd_m->add_flag("--transpose", m_transpose, "input is d x n instead of n x d");
  cmd_m->add_option("--output", m_output, "output JSON path");

  // --- estimate
  auto* cmd_e = app.add_subcommand("estimate", "recover mixture parameters from moments");
  EstimateArgs e;
  cmd_e->add_option("--k", e.k, "number of mixture components")->required();
  auto* opt_fm = cmd_e->add_option("--from-moments", e.from_moments, "MomentSets JSON input");
  auto* opt_in = cmd_e->add_option("--input", e.input, "CSV of samples (rows = samples)");
  opt_fm->excludes(opt_in);
  cmd_e->add_option("--method", e.method, "off-diagonal moment selection: k or low");
  cmd_e->add_option("--known-weights", e.known_weights_path, "JSON with known mixing weights");
  cmd_e->add_option("--shared-covariance", e.shared_cov_path,
                    "JSON with the shared known covariance (uniform mixture pipeline)");
  cmd_e->add_flag("--cycle", e.cycle, "cycle the leading dimension on stage failure");
  cmd_e->add_flag("--transpose", e.transpose, "input CSV is d x n instead of n x d");
  cmd_e->add_option("--seed", e.seed, "tracker seed");
  cmd_e->add_option("--time-budget", e.time_budget, "seconds; exit 4 when exceeded");
  cmd_e->add_option("--output", e.output, "output params JSON path");

  // --- bench
  auto* cmd_b = app.add_subcommand("bench", "run a benchmark experiment grid");
  std::string b_config, b_output = "results.csv";
  cmd_b->add_option("--config", b_config, "experiment config JSON")->required();
  cmd_b->add_option("--output", b_output, "trial CSV output path");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (cmd_m->parsed()) {
      if (m_k < 1) throw InputFormatError("--k must be >= 1");
      Eigen::MatrixXd samples = read_csv_matrix(m_input, m_transpose);
      MomentSets ms = sample_moments(samples, m_k, v3_method_from_string(m_method));
      write_text_file(m_output, moment_sets_to_json(ms));
      std::cout << "wrote " << m_output << " (" << samples.rows() << " samples, d = "
                << samples.cols() << ")\n";
      return kExitOk;
    }
    if (cmd_e->parsed()) {
      if (e.k < 1) throw InputFormatError("--k must be >= 1");
      if (e.from_moments.empty() && e.input.empty())
        throw InputFormatError("estimate needs --from-moments or --input");
      return cmd_estimate(e);
    }
    if (cmd_b->parsed()) {
      ExperimentConfig cfg = config_from_json(read_text_file(b_config));
      ExperimentResult result = run_experiment(cfg);
      write_trials_csv(b_output, result.trials);
      write_summary_csv(sibling_path(b_output, "_summary.csv"), result.summary);
      std::cout << "wrote " << b_output << " and " << sibling_path(b_output, "_summary.csv")
                << "\n";
      return kExitOk;
    }
  } catch (const InputFormatError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace gmom

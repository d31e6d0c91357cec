// mmar — simulate multifractal return series, estimate scaling spectra,
// and test observed series against simulated null clouds.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmar/io.hpp"
#include "mmar/longmem.hpp"
#include "mmar/mctest.hpp"
#include "mmar/parallel.hpp"
#include "mmar/scaling.hpp"
#include "mmar/stats.hpp"

namespace {

std::vector<std::pair<int, double>> parse_ar_coefficients(
    const std::string& text) {
  std::vector<std::pair<int, double>> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--ar", "expected lag:value, got '" + item + "'");
    out.emplace_back(std::stoi(item.substr(0, colon)),
                     std::stod(item.substr(colon + 1)));
    pos = comma + 1;
  }
  return out;
}

void print_estimate(const std::string& name, const mmar::EstimateResult& est) {
  std::printf("%s\n", name.c_str());
  std::printf("  H         %10.6f\n", est.spectrum.H);
  std::printf("  lambda    %10.6f\n", est.spectrum.lambda);
  std::printf("  tau1      %10.6f\n", est.fit.tau1);
  std::printf("  tau2      %10.6f\n", est.fit.tau2);
  std::printf("  alpha0    %10.6f\n", est.spectrum.alpha0);
  std::printf("  alpha1    %10.6f\n", est.spectrum.alpha1);
  std::printf("  support   [%.6f, %.6f]\n", est.spectrum.alpha_min,
              est.spectrum.alpha_max);
  for (const auto& w : est.warnings) std::printf("  warning: %s\n", w.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multifractal scaling estimation and Monte Carlo tests"};
  app.require_subcommand(1);

  // --- simulate ------------------------------------------------------------
  double sim_H = 0.5, sim_lambda = 1.0, sim_p0 = 100.0;
  std::size_t sim_T = 5000;
  std::uint64_t sim_seed = 1, sim_stream = 1;
  int sim_trunc = mmar::kDefaultTruncation;
  std::string sim_out, sim_start = "2000-01-03";
  auto* simulate = app.add_subcommand(
      "simulate", "write a simulated price CSV (date,price)");
  simulate->add_option("--H", sim_H, "self-affinity exponent in (0,1)");
  simulate->add_option("--lambda", sim_lambda, "intermittency >= 1");
  simulate->add_option("-T,--length", sim_T, "number of returns");
  simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--stream", sim_stream, "replication stream index");
  simulate->add_option("--p0", sim_p0, "initial price level");
  simulate->add_option("--start-date", sim_start, "date of the first price");
  simulate->add_option("--truncation", sim_trunc, "moving-average horizon");
  simulate->add_option("--out", sim_out, "output CSV path")->required();

  // --- estimate ------------------------------------------------------------
  std::string est_input, est_from, est_to, est_spectrum_out;
  std::vector<double> est_q;
  std::vector<int> est_n;
  std::size_t est_T = 0;
  auto* estimate_cmd = app.add_subcommand(
      "estimate", "scaling estimates for one price series");
  estimate_cmd->add_option("--input", est_input, "price CSV")->required();
  estimate_cmd->add_option("--date-from", est_from, "first date (inclusive)");
  estimate_cmd->add_option("--date-to", est_to, "last date (inclusive)");
  estimate_cmd->add_option("--q-grid", est_q, "moment grid")->delimiter(',');
  estimate_cmd->add_option("--n-grid", est_n, "scale grid")->delimiter(',');
  estimate_cmd->add_option("-T,--length", est_T, "use only the first T returns");
  estimate_cmd->add_option("--spectrum-out", est_spectrum_out,
                           "write the fitted spectrum CSV here");

  // --- test ----------------------------------------------------------------
  mmar::RunConfig config;
  std::string test_mode = "filtered-niid";
  auto* test = app.add_subcommand(
      "test", "run the full pipeline: filter, estimate, Monte Carlo tests");
  test->add_option("--input", config.inputs, "price CSV (repeatable)")
      ->required();
  test->add_option("--mode", test_mode,
                   "null model: filtered-niid or unfiltered-ar")
      ->check(CLI::IsMember({"filtered-niid", "unfiltered-ar"}));
  test->add_option("--reps", config.reps, "cloud replications");
  test->add_option("--seed", config.master_seed, "cloud master seed");
  test->add_option("-T,--length", config.T, "use only the first T returns");
  test->add_option("--date-from", config.date_from, "first date (inclusive)");
  test->add_option("--date-to", config.date_to, "last date (inclusive)");
  test->add_option("--q-grid", config.q_grid, "moment grid")->delimiter(',');
  test->add_option("--n-grid", config.n_grid, "scale grid")->delimiter(',');
  test->add_option("--max-lag", config.max_lag, "candidate AR lags");
  test->add_option("--alpha", config.ar_alpha, "AR lag significance level");
  test->add_flag("--kurtosis", config.kurtosis,
                 "simulate the 95% kurtosis bound per series");
  test->add_option("--kurtosis-reps", config.kurtosis_reps,
                   "replications for the kurtosis bound");
  test->add_option("--out-dir", config.output_dir, "artifact directory");
  test->add_option("--cache-dir", config.cache_dir,
                   "cloud cache directory (default $MMAR_CACHE_DIR)");
  test->add_option("--threads", config.threads,
                   "worker threads (default $MMAR_THREADS or hardware)");

  // --- power ---------------------------------------------------------------
  double pow_H = 0.5, pow_lambda = 1.0;
  std::size_t pow_T = 2500;
  int pow_outer = 2000, pow_cloud_reps = 5000, pow_threads = 0;
  std::uint64_t pow_seed = 2, pow_cloud_seed = 1;
  std::vector<double> pow_levels{0.10, 0.05, 0.01};
  std::vector<double> pow_q;
  std::vector<int> pow_n;
  std::string pow_cache;
  auto* power = app.add_subcommand(
      "power", "rejection rates against the NIID cloud for simulated data");
  power->add_option("--H", pow_H, "simulated H");
  power->add_option("--lambda", pow_lambda, "simulated lambda");
  power->add_option("-T,--length", pow_T, "sample length");
  power->add_option("--outer", pow_outer, "outer replications");
  power->add_option("--cloud-reps", pow_cloud_reps, "cloud replications");
  power->add_option("--seed", pow_seed, "outer simulation master seed");
  power->add_option("--cloud-seed", pow_cloud_seed, "cloud master seed");
  power->add_option("--levels", pow_levels, "test levels")->delimiter(',');
  power->add_option("--q-grid", pow_q, "moment grid")->delimiter(',');
  power->add_option("--n-grid", pow_n, "scale grid")->delimiter(',');
  power->add_option("--cache-dir", pow_cache, "cloud cache directory");
  power->add_option("--threads", pow_threads, "worker threads");

  // --- cloud ---------------------------------------------------------------
  auto* cloud = app.add_subcommand("cloud", "build or inspect cached clouds");
  cloud->require_subcommand(1);
  std::string cb_null = "niid", cb_ar, cb_cache = "cloud-cache";
  std::size_t cb_T = 5000;
  int cb_reps = 5000, cb_threads = 0;
  std::uint64_t cb_seed = 1;
  std::vector<double> cb_q;
  std::vector<int> cb_n;
  auto* cloud_build = cloud->add_subcommand("build", "build and cache a cloud");
  cloud_build->add_option("--null", cb_null, "null model: niid or ar")
      ->check(CLI::IsMember({"niid", "ar"}));
  cloud_build->add_option("--ar", cb_ar, "AR coefficients as lag:value,...");
  cloud_build->add_option("-T,--length", cb_T, "sample length");
  cloud_build->add_option("--reps", cb_reps, "replications");
  cloud_build->add_option("--seed", cb_seed, "master seed");
  cloud_build->add_option("--q-grid", cb_q, "moment grid")->delimiter(',');
  cloud_build->add_option("--n-grid", cb_n, "scale grid")->delimiter(',');
  cloud_build->add_option("--cache-dir", cb_cache, "cloud cache directory");
  cloud_build->add_option("--threads", cb_threads, "worker threads");
  std::string ci_file;
  auto* cloud_info = cloud->add_subcommand("info", "describe a cloud file");
  cloud_info->add_option("--file", ci_file, "cloud JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const mmar::MmarParams params{sim_H, sim_lambda, sim_T};
      const auto prices = mmar::simulated_prices(
          params, {sim_seed, sim_stream}, sim_p0, sim_start, sim_trunc);
      mmar::save_price_csv(sim_out, prices);
      std::printf("wrote %zu prices to %s\n", prices.values.size(),
                  sim_out.c_str());
    } else if (*estimate_cmd) {
      auto prices = mmar::load_price_csv(est_input);
      prices = mmar::filter_date_range(prices, est_from, est_to);
      auto returns = mmar::to_log_returns(prices);
      if (est_T > 0) {
        if (returns.values.size() < est_T)
          throw std::invalid_argument("series has fewer than T returns");
        returns.values.resize(est_T);
      }
      const auto est = mmar::estimate(returns, est_q, est_n);
      print_estimate(std::filesystem::path(est_input).stem().string(), est);
      if (!est_spectrum_out.empty()) {
        mmar::write_spectrum_csv(est.fit, est_spectrum_out);
        std::printf("wrote spectrum to %s\n", est_spectrum_out.c_str());
      }
    } else if (*test) {
      config.mode = test_mode == "filtered-niid"
                        ? mmar::RunConfig::Mode::kFilteredNiid
                        : mmar::RunConfig::Mode::kUnfilteredAr;
      const auto result = mmar::run_pipeline(config);
      for (const auto& rep : result.series)
        std::printf("%-20s H=%.3f lambda=%.3f p_H=%.3f p_lambda=%.3f p_joint=%.3f\n",
                    rep.name.c_str(), rep.tests.H_hat, rep.tests.lambda_hat,
                    rep.tests.p_H, rep.tests.p_lambda, rep.tests.p_joint);
      for (const auto& path : result.written)
        std::printf("wrote %s\n", path.c_str());
    } else if (*power) {
      mmar::CloudSpec cspec;
      cspec.T = pow_T;
      cspec.reps = pow_cloud_reps;
      cspec.master_seed = pow_cloud_seed;
      cspec.q_grid = pow_q;
      cspec.n_grid = pow_n;
      const std::string cache =
          !pow_cache.empty()
              ? pow_cache
              : (std::getenv("MMAR_CACHE_DIR") ? std::getenv("MMAR_CACHE_DIR")
                                               : "cloud-cache");
      const auto cloud_obj =
          mmar::get_or_build_cloud(cspec, cache, pow_threads);
      const mmar::MmarParams params{pow_H, pow_lambda, pow_T};
      const auto cell = mmar::size_power_cell(params, cloud_obj, pow_outer,
                                              pow_seed, pow_levels, pow_threads);
      std::printf("H=%.3f lambda=%.3f T=%zu outer=%d cloud_reps=%d excluded=%d\n",
                  pow_H, pow_lambda, pow_T, pow_outer, pow_cloud_reps,
                  cell.excluded);
      std::printf("%8s %10s %12s %12s\n", "level", "reject_H", "reject_lam",
                  "reject_joint");
      for (std::size_t i = 0; i < cell.levels.size(); ++i)
        std::printf("%8.3f %10.4f %12.4f %12.4f\n", cell.levels[i],
                    cell.reject_rate_H[i], cell.reject_rate_lambda[i],
                    cell.reject_rate_joint[i]);
    } else if (*cloud_build) {
      mmar::CloudSpec cspec;
      cspec.model = cb_null == "niid" ? mmar::NullModel::kNiid
                                      : mmar::NullModel::kAr;
      cspec.ar_coefficients = parse_ar_coefficients(cb_ar);
      cspec.T = cb_T;
      cspec.reps = cb_reps;
      cspec.master_seed = cb_seed;
      cspec.q_grid = cb_q;
      cspec.n_grid = cb_n;
      bool hit = false;
      const auto built =
          mmar::get_or_build_cloud(cspec, cb_cache, cb_threads, &hit);
      std::printf("%s cloud: %zu points, %d excluded (%s)\n",
                  cb_null.c_str(), built.points.size(), built.excluded,
                  hit ? "cache hit" : "built");
      std::printf("cache file: %s\n",
                  (std::filesystem::path(cb_cache) /
                   mmar::cloud_cache_filename(cspec))
                      .c_str());
    } else if (*cloud_info) {
      const auto loaded = mmar::load_cloud(ci_file);
      std::printf("null model:  %s\n",
                  loaded.null_model == mmar::NullModel::kNiid ? "niid" : "ar");
      for (const auto& [lag, value] : loaded.ar_coefficients)
        std::printf("  ar lag %d: %.6f\n", lag, value);
      std::printf("T:           %zu\n", loaded.T);
      std::printf("reps:        %d (excluded %d)\n", loaded.requested_reps,
                  loaded.excluded);
      std::printf("master seed: %llu\n",
                  static_cast<unsigned long long>(loaded.master_seed));
      std::printf("points:      %zu\n", loaded.points.size());
      if (!loaded.points.empty()) {
        std::vector<double> hs, ls;
        for (const auto& pt : loaded.points) {
          hs.push_back(pt.H);
          ls.push_back(pt.lambda);
        }
        std::printf("mean H:      %.4f\n", mmar::mean(hs));
        std::printf("mean lambda: %.4f\n", mmar::mean(ls));
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

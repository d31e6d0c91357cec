#pragma once
// File formats and the end-to-end pipeline: price CSV in, per-series
// scaling tests out, with simulated-estimate clouds cached on disk.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmar/longmem.hpp"
#include "mmar/mctest.hpp"
#include "mmar/prefilter.hpp"
#include "mmar/scaling.hpp"
#include "mmar/series.hpp"

namespace mmar {

// Two-column CSV (date,price) with a mandatory header row.  Dates are
// ISO-8601 (YYYY-MM-DD) and strictly increasing; prices positive.  Parse
// failures report 1-based line numbers.
PriceSeries load_price_csv(const std::string& path);
void save_price_csv(const std::string& path, const PriceSeries& prices);

// Rows with from <= date <= to (inclusive; empty string leaves that end
// open).  Requires timestamps when a bound is set.
PriceSeries filter_date_range(const PriceSeries& prices,
                              const std::string& from, const std::string& to);

// ISO date shifted by `offset` calendar days.
std::string iso_date_offset(const std::string& start, long offset);

// Synthetic price path for the simulate command: exp of the cumulated
// simulated log returns, anchored at p0, with consecutive calendar dates.
PriceSeries simulated_prices(const MmarParams& params, SeedSpec seed,
                             double p0 = 100.0,
                             const std::string& start_date = "2000-01-03",
                             int truncation = kDefaultTruncation);

// ---------------------------------------------------------------------------
// Cloud cache

struct CloudSpec {
  NullModel model = NullModel::kNiid;
  std::vector<std::pair<int, double>> ar_coefficients;  // empty for NIID
  std::size_t T = 0;
  int reps = 5000;
  std::uint64_t master_seed = 1;
  std::vector<double> q_grid;  // empty = estimator default for T
  std::vector<int> n_grid;
};

// Spec with grids materialized and coefficients sorted; fingerprints are
// taken over this canonical form.
CloudSpec resolve(const CloudSpec& spec);
std::string cloud_fingerprint(const CloudSpec& spec);
// "cloud_<fnv1a64 of fingerprint, hex>.json"
std::string cloud_cache_filename(const CloudSpec& spec);

void save_cloud(const EstimateCloud& cloud, const std::string& path);
EstimateCloud load_cloud(const std::string& path);

// Loads the cached cloud when its identity matches `spec` exactly;
// otherwise builds it and writes the cache file.  `cache_hit`, if given,
// reports which happened.
EstimateCloud get_or_build_cloud(const CloudSpec& spec,
                                 const std::string& cache_dir,
                                 int threads = 0, bool* cache_hit = nullptr);

// ---------------------------------------------------------------------------
// Pipeline

struct RunConfig {
  std::vector<std::string> inputs;
  std::string date_from;
  std::string date_to;
  std::vector<double> q_grid;  // empty = defaults
  std::vector<int> n_grid;
  int reps = 5000;
  std::size_t T = 0;  // 0 = full series, else use the first T returns
  std::uint64_t master_seed = 1;
  enum class Mode { kFilteredNiid, kUnfilteredAr };
  Mode mode = Mode::kFilteredNiid;
  int max_lag = 12;
  double ar_alpha = 0.05;
  bool kurtosis = false;  // run the simulated kurtosis bound per series
  int kurtosis_reps = 1000;
  std::string output_dir = ".";
  std::string cache_dir;  // empty: $MMAR_CACHE_DIR, else output_dir/cloud-cache
  int threads = 0;        // 0: $MMAR_THREADS, else hardware concurrency
};

std::string resolve_cache_dir(const RunConfig& config);

struct SeriesReport {
  std::string name;
  std::size_t T = 0;  // length the estimator actually ran on
  TestReport tests;
  std::vector<int> ar_lags;  // retained by the pre-filter
  std::vector<std::pair<int, double>> ar_coefficients;
  EstimateResult estimate;
  std::optional<KurtosisCheck> kurtosis;
  std::vector<std::string> warnings;
};

struct SeriesAnalysis {
  SeriesReport report;
  EstimateCloud cloud;
};

// Core of the pipeline for one return series: pre-filter (or AR null fit),
// estimate, locate within the matching cloud (built or loaded from cache).
SeriesAnalysis analyze_series(const std::string& name,
                              const LogReturnSeries& returns,
                              const RunConfig& config);

struct PipelineResult {
  RunConfig config;
  std::vector<SeriesReport> series;
  std::vector<std::string> written;  // artifact paths
};

// Full run over config.inputs: load, date-filter, analyze, and write
// report.json, report.txt, spectrum_<series>.csv and ellipse CSVs into
// config.output_dir.
PipelineResult run_pipeline(const RunConfig& config);

void write_report_json(const PipelineResult& result, const std::string& path);
void write_report_txt(const PipelineResult& result, const std::string& path);
void write_spectrum_csv(const ScalingFit& fit, const std::string& path);
void write_ellipse_csv(const EstimateCloud& cloud, double level,
                       const std::string& path);

}  // namespace mmar

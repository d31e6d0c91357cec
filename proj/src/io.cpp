#include "mmar/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mmar/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mmar {
namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

bool parse_iso_date(const std::string& text, int& y, int& m, int& d) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  y = std::stoi(text.substr(0, 4));
  m = std::stoi(text.substr(5, 2));
  d = std::stoi(text.substr(8, 2));
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  return ymd.ok();
}

std::string mode_name(RunConfig::Mode mode) {
  return mode == RunConfig::Mode::kFilteredNiid ? "filtered-niid"
                                                : "unfiltered-ar";
}

std::string model_name(NullModel model) {
  return model == NullModel::kNiid ? "niid" : "ar";
}

CloudSpec spec_of(const EstimateCloud& cloud) {
  CloudSpec s;
  s.model = cloud.null_model;
  s.ar_coefficients = cloud.ar_coefficients;
  s.T = cloud.T;
  s.reps = cloud.requested_reps;
  s.master_seed = cloud.master_seed;
  s.q_grid = cloud.q_grid;
  s.n_grid = cloud.n_grid;
  return s;
}

std::string level_tag(double level) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", level);
  return buf;
}

}  // namespace

PriceSeries load_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  PriceSeries out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2)
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": expected 2 comma-separated fields, got " +
                               std::to_string(fields.size()));
    if (!header_seen) {
      double ignored;
      if (parse_double(fields[1], ignored))
        throw std::runtime_error(path + ": line 1 must be a header row, got numeric '" +
                                 fields[1] + "'");
      header_seen = true;
      continue;
    }
    int y, m, d;
    if (!parse_iso_date(fields[0], y, m, d))
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": invalid ISO date '" + fields[0] + "'");
    double price;
    if (!parse_double(fields[1], price))
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": invalid price '" + fields[1] + "'");
    out.timestamps.push_back(fields[0]);
    out.values.push_back(price);
  }
  if (!header_seen) throw std::runtime_error(path + ": file is empty");
  try {
    validate(out);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return out;
}

void save_price_csv(const std::string& path, const PriceSeries& prices) {
  validate(prices);
  if (prices.timestamps.empty())
    throw std::invalid_argument("price series has no timestamps to write");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "date,price\n";
  for (std::size_t i = 0; i < prices.values.size(); ++i)
    out << prices.timestamps[i] << ',' << fmt17(prices.values[i]) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

PriceSeries filter_date_range(const PriceSeries& prices,
                              const std::string& from, const std::string& to) {
  validate(prices);
  if (from.empty() && to.empty()) return prices;
  if (prices.timestamps.empty())
    throw std::invalid_argument("date filtering requires timestamps");
  int y, m, d;
  if (!from.empty() && !parse_iso_date(from, y, m, d))
    throw std::invalid_argument("invalid from-date '" + from + "'");
  if (!to.empty() && !parse_iso_date(to, y, m, d))
    throw std::invalid_argument("invalid to-date '" + to + "'");
  PriceSeries out;
  for (std::size_t i = 0; i < prices.values.size(); ++i) {
    const std::string& ts = prices.timestamps[i];
    if (!from.empty() && ts < from) continue;
    if (!to.empty() && to < ts) continue;
    out.values.push_back(prices.values[i]);
    out.timestamps.push_back(ts);
  }
  if (out.values.size() < 2)
    throw std::invalid_argument("date range [" + from + ", " + to +
                                "] keeps fewer than 2 observations");
  return out;
}

std::string iso_date_offset(const std::string& start, long offset) {
  int y, m, d;
  if (!parse_iso_date(start, y, m, d))
    throw std::invalid_argument("invalid ISO date '" + start + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  const auto shifted = std::chrono::sys_days{ymd} + std::chrono::days{offset};
  const std::chrono::year_month_day res{shifted};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(res.year()),
                static_cast<unsigned>(res.month()), static_cast<unsigned>(res.day()));
  return buf;
}

PriceSeries simulated_prices(const MmarParams& params, SeedSpec seed, double p0,
                             const std::string& start_date, int truncation) {
  if (!(p0 > 0.0) || !std::isfinite(p0))
    throw std::invalid_argument("initial price must be positive, got " +
                                std::to_string(p0));
  const auto returns = simulate_mmar(params, seed, truncation);
  const auto logp = cumulate(returns, std::log(p0));
  PriceSeries out;
  out.values.reserve(logp.size());
  out.timestamps.reserve(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) {
    out.values.push_back(std::exp(logp[i]));
    out.timestamps.push_back(iso_date_offset(start_date, static_cast<long>(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cloud cache

CloudSpec resolve(const CloudSpec& spec) {
  CloudSpec r = spec;
  if (r.q_grid.empty()) r.q_grid = default_moment_grid();
  if (r.n_grid.empty()) r.n_grid = default_scale_grid(r.T);
  std::sort(r.q_grid.begin(), r.q_grid.end());
  r.q_grid.erase(std::unique(r.q_grid.begin(), r.q_grid.end()), r.q_grid.end());
  std::sort(r.n_grid.begin(), r.n_grid.end());
  r.n_grid.erase(std::unique(r.n_grid.begin(), r.n_grid.end()), r.n_grid.end());
  std::sort(r.ar_coefficients.begin(), r.ar_coefficients.end());
  if (r.model == NullModel::kNiid && !r.ar_coefficients.empty())
    throw std::invalid_argument("NIID cloud spec cannot carry AR coefficients");
  return r;
}

std::string cloud_fingerprint(const CloudSpec& spec) {
  const CloudSpec s = resolve(spec);
  std::ostringstream os;
  os << model_name(s.model) << "|T=" << s.T << "|reps=" << s.reps
     << "|seed=" << s.master_seed << "|q=";
  for (std::size_t i = 0; i < s.q_grid.size(); ++i)
    os << (i ? "," : "") << fmt17(s.q_grid[i]);
  os << "|n=";
  for (std::size_t i = 0; i < s.n_grid.size(); ++i)
    os << (i ? "," : "") << s.n_grid[i];
  os << "|ar=";
  for (std::size_t i = 0; i < s.ar_coefficients.size(); ++i)
    os << (i ? "," : "") << s.ar_coefficients[i].first << ':'
       << fmt17(s.ar_coefficients[i].second);
  return os.str();
}

std::string cloud_cache_filename(const CloudSpec& spec) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(cloud_fingerprint(spec))));
  return std::string("cloud_") + buf + ".json";
}

void save_cloud(const EstimateCloud& cloud, const std::string& path) {
  json j;
  j["format"] = "mmar-cloud-v1";
  j["null_model"] = model_name(cloud.null_model);
  json ar = json::array();
  for (const auto& [lag, value] : cloud.ar_coefficients)
    ar.push_back(json::array({lag, value}));
  j["ar_coefficients"] = std::move(ar);
  j["T"] = cloud.T;
  j["requested_reps"] = cloud.requested_reps;
  j["master_seed"] = cloud.master_seed;
  j["q_grid"] = cloud.q_grid;
  j["n_grid"] = cloud.n_grid;
  j["excluded"] = cloud.excluded;
  j["warnings"] = cloud.warnings;
  std::vector<double> hs, ls;
  hs.reserve(cloud.points.size());
  ls.reserve(cloud.points.size());
  for (const auto& pt : cloud.points) {
    hs.push_back(pt.H);
    ls.push_back(pt.lambda);
  }
  j["H"] = hs;
  j["lambda"] = ls;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

EstimateCloud load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": not a valid cloud file: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "mmar-cloud-v1")
      throw std::runtime_error("unsupported format tag");
    EstimateCloud cloud;
    const std::string model = j.at("null_model").get<std::string>();
    if (model == "niid")
      cloud.null_model = NullModel::kNiid;
    else if (model == "ar")
      cloud.null_model = NullModel::kAr;
    else
      throw std::runtime_error("unknown null model '" + model + "'");
    for (const auto& pair : j.at("ar_coefficients"))
      cloud.ar_coefficients.emplace_back(pair.at(0).get<int>(),
                                         pair.at(1).get<double>());
    cloud.T = j.at("T").get<std::size_t>();
    cloud.requested_reps = j.at("requested_reps").get<int>();
    cloud.master_seed = j.at("master_seed").get<std::uint64_t>();
    cloud.q_grid = j.at("q_grid").get<std::vector<double>>();
    cloud.n_grid = j.at("n_grid").get<std::vector<int>>();
    cloud.excluded = j.at("excluded").get<int>();
    cloud.warnings = j.at("warnings").get<std::vector<std::string>>();
    const auto hs = j.at("H").get<std::vector<double>>();
    const auto ls = j.at("lambda").get<std::vector<double>>();
    if (hs.size() != ls.size())
      throw std::runtime_error("H / lambda arrays differ in length");
    cloud.points.resize(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i)
      cloud.points[i] = {hs[i], ls[i]};
    return cloud;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": malformed cloud file: " + e.what());
  }
}

EstimateCloud get_or_build_cloud(const CloudSpec& spec,
                                 const std::string& cache_dir, int threads,
                                 bool* cache_hit) {
  const CloudSpec rspec = resolve(spec);
  fs::create_directories(cache_dir);
  const fs::path path = fs::path(cache_dir) / cloud_cache_filename(rspec);
  if (cache_hit) *cache_hit = false;
  if (fs::exists(path)) {
    try {
      EstimateCloud cloud = load_cloud(path.string());
      if (cloud_fingerprint(spec_of(cloud)) == cloud_fingerprint(rspec)) {
        if (cache_hit) *cache_hit = true;
        return cloud;
      }
    } catch (const std::exception&) {
      // unreadable or stale; rebuilt below
    }
  }
  EstimateCloud cloud =
      rspec.model == NullModel::kNiid
          ? build_cloud_niid(rspec.T, rspec.reps, rspec.master_seed, rspec.q_grid,
                             rspec.n_grid, threads)
          : build_cloud_ar(rspec.ar_coefficients, rspec.T, rspec.reps,
                           rspec.master_seed, rspec.q_grid, rspec.n_grid,
                           threads);
  save_cloud(cloud, path.string());
  return cloud;
}

// ---------------------------------------------------------------------------
// Pipeline

std::string resolve_cache_dir(const RunConfig& config) {
  if (!config.cache_dir.empty()) return config.cache_dir;
  if (const char* env = std::getenv("MMAR_CACHE_DIR"); env && *env) return env;
  return (fs::path(config.output_dir) / "cloud-cache").string();
}

SeriesAnalysis analyze_series(const std::string& name,
                              const LogReturnSeries& returns,
                              const RunConfig& config) {
  SeriesAnalysis out;
  SeriesReport& rep = out.report;
  rep.name = name;

  const ArFit fit = fit_ar(returns, config.max_lag, config.ar_alpha);
  rep.ar_lags = fit.retained_lags;
  rep.ar_coefficients = fit.coefficients;

  CloudSpec cspec;
  cspec.reps = config.reps;
  cspec.master_seed = config.master_seed;
  cspec.q_grid = config.q_grid;
  cspec.n_grid = config.n_grid;
  const LogReturnSeries* target = nullptr;
  if (config.mode == RunConfig::Mode::kFilteredNiid) {
    cspec.model = NullModel::kNiid;
    target = &fit.residuals;
  } else {
    cspec.model = NullModel::kAr;
    cspec.ar_coefficients = fit.coefficients;
    target = &returns;
  }
  cspec.T = target->values.size();
  rep.T = cspec.T;

  rep.estimate = estimate(*target, config.q_grid, config.n_grid);
  out.cloud = get_or_build_cloud(cspec, resolve_cache_dir(config), config.threads);
  rep.tests = run_tests(out.cloud, rep.estimate.spectrum.H,
                        rep.estimate.spectrum.lambda);
  rep.warnings = rep.estimate.warnings;
  for (const auto& w : out.cloud.warnings) rep.warnings.push_back("cloud: " + w);

  if (config.kurtosis) {
    // Null-coupled convention: simulate at the estimated lambda only when
    // the lambda test rejected at 5%, else at lambda = 1.
    const double lambda_sim = rep.tests.p_lambda < 0.05
                                  ? std::max(rep.estimate.spectrum.lambda, 1.0)
                                  : 1.0;
    const std::uint64_t kurt_seed = config.master_seed ^ fnv1a64("kurtosis");
    rep.kurtosis = kurtosis_check(kurtosis(target->values), lambda_sim, cspec.T,
                                  config.kurtosis_reps, kurt_seed,
                                  config.threads);
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& config) {
  if (config.inputs.empty())
    throw std::invalid_argument("pipeline needs at least one input file");
  fs::create_directories(config.output_dir);
  PipelineResult result;
  result.config = config;

  std::vector<std::string> names;
  std::vector<EstimateCloud> clouds;
  std::vector<std::string> cloud_fps;
  for (const auto& input : config.inputs) {
    const std::string name = fs::path(input).stem().string();
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw std::invalid_argument("duplicate series name '" + name + "'");
    names.push_back(name);

    PriceSeries prices = load_price_csv(input);
    prices = filter_date_range(prices, config.date_from, config.date_to);
    LogReturnSeries returns = to_log_returns(prices);
    if (config.T > 0) {
      if (returns.values.size() < config.T)
        throw std::invalid_argument(name + ": has " +
                                    std::to_string(returns.values.size()) +
                                    " returns, fewer than requested T = " +
                                    std::to_string(config.T));
      returns.values.resize(config.T);
    }

    SeriesAnalysis analysis = analyze_series(name, returns, config);
    result.series.push_back(analysis.report);
    clouds.push_back(std::move(analysis.cloud));
    cloud_fps.push_back(cloud_fingerprint(spec_of(clouds.back())));

    const fs::path spectrum_path =
        fs::path(config.output_dir) / ("spectrum_" + name + ".csv");
    write_spectrum_csv(result.series.back().estimate.fit, spectrum_path.string());
    result.written.push_back(spectrum_path.string());
  }

  // One ellipse file per level when every series shares a cloud, otherwise
  // per-series files.
  const bool shared_cloud =
      std::all_of(cloud_fps.begin(), cloud_fps.end(),
                  [&](const std::string& fp) { return fp == cloud_fps.front(); });
  const std::size_t cloud_count = shared_cloud ? 1 : clouds.size();
  for (std::size_t ci = 0; ci < cloud_count; ++ci) {
    for (double level : result.series.front().tests.levels) {
      const std::string base =
          shared_cloud ? "ellipse_" + level_tag(level) + ".csv"
                       : "ellipse_" + names[ci] + "_" + level_tag(level) + ".csv";
      const fs::path path = fs::path(config.output_dir) / base;
      write_ellipse_csv(clouds[ci], level, path.string());
      result.written.push_back(path.string());
    }
  }

  const fs::path json_path = fs::path(config.output_dir) / "report.json";
  write_report_json(result, json_path.string());
  result.written.push_back(json_path.string());
  const fs::path txt_path = fs::path(config.output_dir) / "report.txt";
  write_report_txt(result, txt_path.string());
  result.written.push_back(txt_path.string());
  return result;
}

void write_report_json(const PipelineResult& result, const std::string& path) {
  json j;
  j["mode"] = mode_name(result.config.mode);
  j["reps"] = result.config.reps;
  j["master_seed"] = result.config.master_seed;
  json series = json::object();
  for (const auto& rep : result.series) {
    json js;
    js["H_hat"] = rep.tests.H_hat;
    js["lambda_hat"] = rep.tests.lambda_hat;
    js["p_H"] = rep.tests.p_H;
    js["p_lambda"] = rep.tests.p_lambda;
    js["p_joint"] = rep.tests.p_joint;
    js["ar_lags"] = rep.ar_lags;
    js["warnings"] = rep.warnings;
    js["T"] = rep.T;
    js["tau1"] = rep.estimate.fit.tau1;
    js["tau2"] = rep.estimate.fit.tau2;
    js["alpha0"] = rep.estimate.spectrum.alpha0;
    json rejections = json::object();
    for (std::size_t i = 0; i < rep.tests.levels.size(); ++i) {
      json r;
      r["H"] = rep.tests.reject_H[i];
      r["lambda"] = rep.tests.reject_lambda[i];
      r["joint"] = rep.tests.reject_joint[i];
      rejections[level_tag(rep.tests.levels[i])] = std::move(r);
    }
    js["rejections"] = std::move(rejections);
    if (rep.kurtosis) {
      json k;
      k["observed"] = rep.kurtosis->observed;
      k["bound95"] = rep.kurtosis->bound95;
      k["within"] = rep.kurtosis->within;
      k["lambda"] = rep.kurtosis->lambda;
      k["reps"] = rep.kurtosis->reps;
      js["kurtosis"] = std::move(k);
    }
    series[rep.name] = std::move(js);
  }
  j["series"] = std::move(series);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_report_txt(const PipelineResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "mode: " << mode_name(result.config.mode)
      << "   replications: " << result.config.reps
      << "   seed: " << result.config.master_seed << "\n\n";
  out << std::left << std::setw(20) << "series" << std::right << std::setw(8)
      << "T" << std::setw(9) << "H" << std::setw(9) << "lambda" << std::setw(9)
      << "p_H" << std::setw(10) << "p_lambda" << std::setw(9) << "p_joint"
      << "  ar_lags\n";
  out << std::fixed;
  for (const auto& rep : result.series) {
    out << std::left << std::setw(20) << rep.name << std::right << std::setw(8)
        << rep.T << std::setprecision(3) << std::setw(9) << rep.tests.H_hat
        << std::setw(9) << rep.tests.lambda_hat << std::setw(9) << rep.tests.p_H
        << std::setw(10) << rep.tests.p_lambda << std::setw(9)
        << rep.tests.p_joint << "  ";
    if (rep.ar_lags.empty()) {
      out << "-";
    } else {
      for (std::size_t i = 0; i < rep.ar_lags.size(); ++i)
        out << (i ? "," : "") << rep.ar_lags[i];
    }
    if (rep.kurtosis)
      out << "  kurtosis " << std::setprecision(2) << rep.kurtosis->observed
          << (rep.kurtosis->within ? " within " : " exceeds ") << "bound "
          << rep.kurtosis->bound95;
    out << '\n';
  }
  bool any_warning = false;
  for (const auto& rep : result.series)
    for (const auto& w : rep.warnings) {
      if (!any_warning) {
        out << '\n';
        any_warning = true;
      }
      out << "! " << rep.name << ": " << w << '\n';
    }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_spectrum_csv(const ScalingFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "alpha,f\n";
  for (const auto& [alpha, f] : spectrum_curve(fit))
    out << fmt17(alpha) << ',' << fmt17(f) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_ellipse_csv(const EstimateCloud& cloud, double level,
                       const std::string& path) {
  const auto boundary = ellipse_boundary(fit_ellipse(cloud, level));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "lambda,H\n";
  for (const auto& [lambda, H] : boundary)
    out << fmt17(lambda) << ',' << fmt17(H) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace mmar

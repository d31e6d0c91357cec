#pragma once
// Core series types shared by every module: price levels with optional
// timestamps, and log-return sequences tagged with their origin.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mmar {

struct PriceSeries {
  std::vector<double> values;
  // Either empty or one ISO-8601 date (YYYY-MM-DD) per observation,
  // strictly increasing.
  std::vector<std::string> timestamps;
};

enum class SeriesOrigin { kObserved, kSimulated, kFiltered };

struct LogReturnSeries {
  std::vector<double> values;
  SeriesOrigin origin = SeriesOrigin::kObserved;
};

// Throws std::invalid_argument when an invariant is broken (length < 2,
// non-positive or non-finite prices, timestamp length/order mismatch).
void validate(const PriceSeries& prices);

// r_t = ln p_t - ln p_{t-1}; output length is one less than the input.
LogReturnSeries to_log_returns(const PriceSeries& prices);

// Running sum anchored at `base`: output[0] = base, output[t] = base +
// r_1 + ... + r_t.  Exact left inverse of to_log_returns on log prices.
std::vector<double> cumulate(const LogReturnSeries& returns,
                             double base = 0.0);

}  // namespace mmar

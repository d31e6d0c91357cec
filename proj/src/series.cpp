#include "mmar/series.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mmar {

void validate(const PriceSeries& prices) {
  if (prices.values.size() < 2)
    throw std::invalid_argument("price series needs at least 2 observations, got " +
                                std::to_string(prices.values.size()));
  for (std::size_t i = 0; i < prices.values.size(); ++i) {
    const double p = prices.values[i];
    if (!std::isfinite(p) || p <= 0.0)
      throw std::invalid_argument("price at index " + std::to_string(i) +
                                  " is not finite and positive: " +
                                  std::to_string(p));
  }
  if (!prices.timestamps.empty()) {
    if (prices.timestamps.size() != prices.values.size())
      throw std::invalid_argument("timestamp count (" +
                                  std::to_string(prices.timestamps.size()) +
                                  ") does not match price count (" +
                                  std::to_string(prices.values.size()) + ")");
    for (std::size_t i = 1; i < prices.timestamps.size(); ++i) {
      // ISO-8601 dates order correctly as strings.
      if (!(prices.timestamps[i - 1] < prices.timestamps[i]))
        throw std::invalid_argument("timestamps not strictly increasing at index " +
                                    std::to_string(i) + ": '" +
                                    prices.timestamps[i - 1] + "' >= '" +
                                    prices.timestamps[i] + "'");
    }
  }
}

LogReturnSeries to_log_returns(const PriceSeries& prices) {
  validate(prices);
  LogReturnSeries out;
  out.origin = SeriesOrigin::kObserved;
  out.values.resize(prices.values.size() - 1);
  for (std::size_t t = 1; t < prices.values.size(); ++t)
    out.values[t - 1] = std::log(prices.values[t]) - std::log(prices.values[t - 1]);
  return out;
}

std::vector<double> cumulate(const LogReturnSeries& returns, double base) {
  std::vector<double> out(returns.values.size() + 1);
  out[0] = base;
  for (std::size_t t = 0; t < returns.values.size(); ++t)
    out[t + 1] = out[t] + returns.values[t];
  return out;
}

}  // namespace mmar

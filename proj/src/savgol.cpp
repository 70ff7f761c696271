#include "modewise/savgol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "modewise/error.hpp"

namespace modewise {
namespace {

// Solves the small dense system g z = rhs in place (partial pivoting).
std::vector<double> solve(std::vector<std::vector<double>> g, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(g[r][col]) > std::abs(g[pivot][col])) pivot = r;
    }
    std::swap(g[col], g[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = g[r][col] / g[col][col];
      for (std::size_t c = col; c < n; ++c) g[r][c] -= factor * g[col][c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<double> z(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= g[i][c] * z[c];
    z[i] = acc / g[i][i];
  }
  return z;
}

}  // namespace

std::vector<double> savgol_weights(std::size_t count, std::size_t at, std::size_t order) {
  if (at >= count || order >= count) throw UsageError("savgol_weights: bad window geometry");
  const std::size_t terms = order + 1;
  // Powers of the offsets from the evaluation point; the fit's constant term is the value there.
  std::vector<std::vector<double>> powers(count, std::vector<double>(2 * terms - 1));
  for (std::size_t j = 0; j < count; ++j) {
    const double x = static_cast<double>(j) - static_cast<double>(at);
    double p = 1.0;
    for (auto& v : powers[j]) {
      v = p;
      p *= x;
    }
  }
  std::vector<std::vector<double>> gram(terms, std::vector<double>(terms, 0.0));
  for (std::size_t r = 0; r < terms; ++r) {
    for (std::size_t c = 0; c < terms; ++c) {
      for (std::size_t j = 0; j < count; ++j) gram[r][c] += powers[j][r + c];
    }
  }
  std::vector<double> e0(terms, 0.0);
  e0[0] = 1.0;
  const auto z = solve(std::move(gram), std::move(e0));
  std::vector<double> w(count, 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t k = 0; k < terms; ++k) w[j] += z[k] * powers[j][k];
  }
  return w;
}

std::vector<double> savgol_smooth(std::span<const double> series, std::size_t window,
                                  std::size_t order) {
  if (window % 2 == 0) throw UsageError("Savitzky-Golay window must be odd");
  if (order >= window) throw UsageError("Savitzky-Golay order must be below the window size");
  const std::size_t n = series.size();
  std::vector<double> out(series.begin(), series.end());
  if (n < order + 2) return out;

  const std::size_t half = window / 2;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cache;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const std::size_t count = hi - lo + 1;
    const std::size_t at = i - lo;
    auto key = std::make_pair(count, at);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, savgol_weights(count, at, std::min(order, count - 1))).first;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < count; ++j) acc += it->second[j] * series[lo + j];
    out[i] = acc;
  }
  return out;
}

}  // namespace modewise

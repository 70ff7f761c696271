#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace modewise {

/// Least-squares weights that evaluate, at sample `at`, the polynomial of
/// degree `order` fitted to samples [0, count). `at` must be < count and
/// `order` < count.
std::vector<double> savgol_weights(std::size_t count, std::size_t at, std::size_t order);

/// Savitzky-Golay smoothing. Interior samples use the centered window; the
/// first and last window/2 samples use the window clipped to the data, with
/// the polynomial order reduced if the clipped window is too short.
/// Returns the input unchanged when it has fewer than order + 2 samples.
/// Throws UsageError if window is even or order >= window.
std::vector<double> savgol_smooth(std::span<const double> series, std::size_t window = 9,
                                  std::size_t order = 3);

}  // namespace modewise

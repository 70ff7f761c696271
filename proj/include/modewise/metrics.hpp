#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "modewise/ingest.hpp"

namespace modewise {

/// Confusion rows are actual classes, columns predicted.
struct EvalReport {
  std::array<std::array<std::size_t, kNumModes>, kNumModes> confusion{};
  std::size_t total = 0;
  double accuracy = 0.0;
  std::array<double, kNumModes> precision{};
  std::array<double, kNumModes> recall{};
  std::array<double, kNumModes> f_score{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f_score = 0.0;
  // Support-weighted averages; weighted recall equals accuracy.
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f_score = 0.0;
  /// Set when a precision or recall denominator was zero and the rate reported as 0.
  bool zero_division = false;
};

/// Label codes must be in 0..4.
EvalReport evaluate_predictions(std::span<const std::uint8_t> actual,
                                std::span<const std::uint8_t> predicted);
EvalReport report_from_confusion(
    const std::array<std::array<std::size_t, kNumModes>, kNumModes>& confusion);

nlohmann::json report_to_json(const EvalReport& report);
std::string confusion_table(const EvalReport& report);

}  // namespace modewise

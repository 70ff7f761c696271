#include "modewise/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modewise/error.hpp"

namespace modewise {

EvalReport evaluate_predictions(std::span<const std::uint8_t> actual,
                                std::span<const std::uint8_t> predicted) {
  if (actual.size() != predicted.size()) throw DataError("prediction count mismatch");
  std::array<std::array<std::size_t, kNumModes>, kNumModes> confusion{};
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] >= kNumModes || predicted[i] >= kNumModes) {
      throw DataError("label code outside 0..4");
    }
    ++confusion[actual[i]][predicted[i]];
  }
  return report_from_confusion(confusion);
}

EvalReport report_from_confusion(
    const std::array<std::array<std::size_t, kNumModes>, kNumModes>& confusion) {
  EvalReport r;
  r.confusion = confusion;
  std::array<std::size_t, kNumModes> row_sum{}, col_sum{};
  std::size_t trace = 0;
  for (std::size_t a = 0; a < kNumModes; ++a) {
    for (std::size_t p = 0; p < kNumModes; ++p) {
      row_sum[a] += confusion[a][p];
      col_sum[p] += confusion[a][p];
      r.total += confusion[a][p];
    }
    trace += confusion[a][a];
  }
  r.accuracy = r.total ? static_cast<double>(trace) / static_cast<double>(r.total) : 0.0;
  for (std::size_t k = 0; k < kNumModes; ++k) {
    const double tp = static_cast<double>(confusion[k][k]);
    if (col_sum[k]) {
      r.precision[k] = tp / static_cast<double>(col_sum[k]);
    } else {
      r.zero_division = true;
    }
    if (row_sum[k]) {
      r.recall[k] = tp / static_cast<double>(row_sum[k]);
    } else {
      r.zero_division = true;
    }
    const double denom = r.precision[k] + r.recall[k];
    r.f_score[k] = denom > 0.0 ? 2.0 * r.precision[k] * r.recall[k] / denom : 0.0;
    r.macro_precision += r.precision[k] / kNumModes;
    r.macro_recall += r.recall[k] / kNumModes;
    r.macro_f_score += r.f_score[k] / kNumModes;
    if (r.total) {
      const double w = static_cast<double>(row_sum[k]) / static_cast<double>(r.total);
      r.weighted_precision += w * r.precision[k];
      r.weighted_recall += w * r.recall[k];
      r.weighted_f_score += w * r.f_score[k];
    }
  }
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumModes; ++k) {
    per_class[std::string(kModeNames[k])] = {
        {"precision", r.precision[k]}, {"recall", r.recall[k]}, {"f_score", r.f_score[k]}};
  }
  return {{"total", r.total},
          {"accuracy", r.accuracy},
          {"confusion", r.confusion},
          {"labels", kModeNames},
          {"per_class", per_class},
          {"macro", {{"precision", r.macro_precision},
                     {"recall", r.macro_recall},
                     {"f_score", r.macro_f_score}}},
          {"weighted", {{"precision", r.weighted_precision},
                        {"recall", r.weighted_recall},
                        {"f_score", r.weighted_f_score}}},
          {"zero_division", r.zero_division}};
}

std::string confusion_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[64];
  out << "actual\\pred";
  for (auto name : kModeNames) {
    std::snprintf(buf, sizeof buf, "%9.*s", static_cast<int>(name.size()), name.data());
    out << buf;
  }
  out << "   recall\n";
  for (std::size_t a = 0; a < kNumModes; ++a) {
    std::snprintf(buf, sizeof buf, "%-11.*s", static_cast<int>(kModeNames[a].size()),
                  kModeNames[a].data());
    out << buf;
    for (std::size_t p = 0; p < kNumModes; ++p) {
      std::snprintf(buf, sizeof buf, "%9zu", r.confusion[a][p]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%8.1f%%\n", 100.0 * r.recall[a]);
    out << buf;
  }
  out << "precision  ";
  for (std::size_t p = 0; p < kNumModes; ++p) {
    std::snprintf(buf, sizeof buf, "%8.1f%%", 100.0 * r.precision[p]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "\naccuracy %.2f%% over %zu samples\n", 100.0 * r.accuracy,
                r.total);
  out << buf;
  return out.str();
}

}  // namespace modewise

// Reference score rows and verdict builders for the Inseval scoring tests.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gen.hpp"
#include "instcap/inseval.hpp"

namespace fixtures {

struct ScoreRow {
  std::string name;
  std::array<int, 8> rates;  ///< percent, in report order
  std::string average;
};

inline const std::vector<ScoreRow>& reference_rows() {
  static const std::vector<ScoreRow> rows = {
      {"base-a", {64, 60, 44, 60, 20, 8, 48, 40}, "43.00"},
      {"base-b", {44, 68, 32, 32, 7, 4, 24, 16}, "28.38"},
      {"base-c", {64, 44, 36, 32, 27, 20, 32, 12}, "33.38"},
      {"base-d", {40, 56, 36, 40, 13, 12, 16, 16}, "28.63"},
      {"recap-a", {56, 60, 40, 48, 27, 16, 32, 24}, "37.88"},
      {"recap-b", {40, 48, 28, 40, 20, 8, 20, 12}, "27.00"},
      {"recap-c", {40, 44, 32, 24, 13, 16, 8, 20}, "24.63"},
      {"recap-d", {52, 52, 28, 28, 20, 12, 28, 16}, "29.50"},
  };
  return rows;
}

inline const instcap::InsevalRegistry& inseval_pack() {
  static const auto r = instcap::InsevalRegistry::load(source_dir() / "data/inseval_prompts.json");
  return r;
}

/// Verdicts passing the first k prompts of each scored dimension, where k is
/// the count whose exact percentage lies nearest the target rate.
inline std::vector<instcap::JudgeVerdict> verdicts_for_rates(const instcap::InsevalRegistry& reg, const std::array<int, 8>& rates) {
  std::vector<instcap::JudgeVerdict> out;
  for (size_t d = 0; d < 8; ++d) {
    const auto dim = instcap::kScoredDimensions[d];
    const double total = static_cast<double>(reg.count(dim));
    size_t k = 0;
    for (size_t c = 0; c <= reg.count(dim); ++c)
      if (std::abs(100.0 * c / total - rates[d]) < std::abs(100.0 * k / total - rates[d])) k = c;
    size_t seen = 0;
    for (const auto& p : reg.prompts()) {
      if (p.dimension != dim) continue;
      const bool pass = seen++ < k;
      out.push_back({p.id, std::vector<bool>(p.targets.size(), pass), pass, "", 0});
    }
  }
  return out;
}

}  // namespace fixtures

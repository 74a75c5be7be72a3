// Random manifests and curation filters for the dataset properties.
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gen.hpp"
#include "instcap/dataset.hpp"

namespace gen {

inline instcap::Manifest random_manifest(Rng& r) {
  std::string jsonl;
  const int n = uniform(r, 0, 30);
  for (int i = 0; i < n; ++i) {
    nlohmann::ordered_json j;
    j["id"] = "v" + std::to_string(i);
    j["duration"] = real(r, 0.1, 20.0);
    if (uniform(r, 0, 4)) j["motion_intensity"] = real(r, 0.0, 8.0);
    if (coin(r)) j["scene"] = pick(r, std::vector<std::string>{"nature", "urban", "indoor"});
    jsonl += j.dump() + "\n";
  }
  return instcap::parse_manifest(jsonl);
}

inline instcap::CurationFilter random_filter(Rng& r) {
  instcap::CurationFilter f;
  f.min_duration = real(r, 0.0, 6.0);
  f.max_duration = f.min_duration + real(r, 0.0, 12.0);
  if (coin(r)) f.min_motion = real(r, 0.0, 6.0);
  return f;
}

}  // namespace gen

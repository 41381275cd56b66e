#pragma once

// Named tunables shared by SET_PARAMS and --params files.
//   th1..th6        merge thresholds, >= 0
//   th              controller dead band, [0, 320)
//   k_yaw, k_pitch  controller gains, (0, 0.1]
//   diff_threshold  frame difference threshold, integer [1, 254]
//   blur_sigma      pre-difference blur, (0, 5]
//   min_area        smallest region kept, integer >= 1

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hexatrack/controller.hpp"
#include "hexatrack/error.hpp"
#include "hexatrack/region_detect.hpp"

namespace hexatrack {

struct TunableParams {
  MergeParams merge;
  DetectionConfig detection;
  ControllerParams controller;
};

inline std::vector<std::string> tunable_names() {
  return {"th1", "th2", "th3", "th4", "th5", "th6", "th", "k_yaw", "k_pitch", "diff_threshold", "blur_sigma", "min_area"};
}

/// Returns p with the named values applied. Throws on the first bad name or
/// value, so the caller's copy is untouched on failure.
inline TunableParams apply_params(TunableParams p, const std::map<std::string, double>& values) {
  auto need = [](bool ok, const std::string& name, const char* range) {
    if (!ok) throw Error(Errc::invalid_parameter, name + " must be " + range);
  };
  for (const auto& [name, v] : values) {
    const bool finite = std::isfinite(v);
    if (name.size() == 3 && name.starts_with("th") && name[2] >= '1' && name[2] <= '6') {
      need(finite && v >= 0.0, name, ">= 0");
      double* slot[] = {&p.merge.th1, &p.merge.th2, &p.merge.th3, &p.merge.th4, &p.merge.th5, &p.merge.th6};
      *slot[name[2] - '1'] = v;
    } else if (name == "th") {
      need(finite && v >= 0.0 && v < 320.0, name, "in [0, 320)");
      p.controller.th = v;
    } else if (name == "k_yaw" || name == "k_pitch") {
      need(finite && v > 0.0 && v <= 0.1, name, "in (0, 0.1]");
      (name == "k_yaw" ? p.controller.k_yaw : p.controller.k_pitch) = v;
    } else if (name == "diff_threshold") {
      need(finite && v >= 1.0 && v <= 254.0 && v == std::floor(v), name, "an integer in [1, 254]");
      p.detection.diff_threshold = static_cast<int>(v);
    } else if (name == "blur_sigma") {
      need(finite && v > 0.0 && v <= 5.0, name, "in (0, 5]");
      p.detection.blur_sigma = v;
    } else if (name == "min_area") {
      need(finite && v >= 1.0 && v <= 1e7 && v == std::floor(v), name, "an integer >= 1");
      p.detection.min_area = static_cast<std::size_t>(v);
    } else {
      throw Error(Errc::invalid_parameter, "unknown parameter: " + name);
    }
  }
  return p;
}

/// Reads a flat JSON object of name -> number.
inline std::map<std::string, double> read_params_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_parameter, "params must be a JSON object");
  std::map<std::string, double> out;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_number()) throw Error(Errc::invalid_parameter, "parameter is not a number: " + name);
    out[name] = v.get<double>();
  }
  return out;
}

inline TunableParams load_params_file(const std::string& path, TunableParams base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read params file: " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::invalid_parameter, "params file is not valid JSON: " + path);
  return apply_params(base, read_params_json(j));
}

}  // namespace hexatrack

#include "opf/cases.hpp"

#include <filesystem>

namespace opf {

namespace {

constexpr const char* kWb5 = R"({
  "name": "wb5",
  "base_mva": 100,
  "units": "pu",
  "buses": [
    {"id": 1, "p_load": 0.00, "q_load": 0.00, "v_min": 0.95, "v_max": 1.05},
    {"id": 2, "p_load": 1.30, "q_load": 0.20, "v_min": 0.95, "v_max": 1.05},
    {"id": 3, "p_load": 1.30, "q_load": 0.20, "v_min": 0.95, "v_max": 1.05},
    {"id": 4, "p_load": 0.65, "q_load": 0.10, "v_min": 0.95, "v_max": 1.05},
    {"id": 5, "p_load": 0.00, "q_load": 0.00, "v_min": 0.95, "v_max": 1.05}
  ],
  "generators": [
    {"bus": 1, "p_min": 0, "p_max": 50, "q_min": -0.30, "q_max": 18, "c2": 0, "c1": 400, "c0": 0},
    {"bus": 5, "p_min": 0, "p_max": 50, "q_min": -0.30, "q_max": 18, "c2": 0, "c1": 100, "c0": 0}
  ],
  "branches": [
    {"from": 1, "to": 2, "r": 0.04, "x": 0.09, "b_sh": 0.00},
    {"from": 1, "to": 3, "r": 0.05, "x": 0.10, "b_sh": 0.00},
    {"from": 2, "to": 3, "r": 0.07, "x": 0.09, "b_sh": 0.00},
    {"from": 2, "to": 4, "r": 0.55, "x": 0.90, "b_sh": 0.45},
    {"from": 3, "to": 5, "r": 0.55, "x": 0.90, "b_sh": 0.45},
    {"from": 4, "to": 5, "r": 0.06, "x": 0.10, "b_sh": 0.00}
  ],
  "ref_bus": 1
})";

// Branch (6,7) uses R = 0.0119; see README for the source data note.
constexpr const char* kCase9mod = R"({
  "name": "case9mod",
  "base_mva": 100,
  "units": "pu",
  "buses": [
    {"id": 1, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 2, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 3, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 4, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 5, "p_load": 0.54, "q_load": 0.18, "v_min": 0.90, "v_max": 1.10},
    {"id": 6, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 7, "p_load": 0.60, "q_load": 0.21, "v_min": 0.90, "v_max": 1.10},
    {"id": 8, "p_load": 0.00, "q_load": 0.00, "v_min": 0.90, "v_max": 1.10},
    {"id": 9, "p_load": 0.75, "q_load": 0.30, "v_min": 0.90, "v_max": 1.10}
  ],
  "generators": [
    {"bus": 1, "p_min": 0.00, "p_max": 2.50, "q_min": -0.05, "q_max": 3.00, "c2": 1100, "c1": 500, "c0": 150},
    {"bus": 2, "p_min": 0.10, "p_max": 3.00, "q_min": -0.05, "q_max": 3.00, "c2": 85, "c1": 120, "c0": 600},
    {"bus": 3, "p_min": 0.10, "p_max": 2.70, "q_min": -0.05, "q_max": 3.00, "c2": 122.5, "c1": 100, "c0": 335}
  ],
  "branches": [
    {"from": 1, "to": 4, "r": 0.0,    "x": 0.0576, "b_sh": 0.0,   "s_max": 2.50},
    {"from": 4, "to": 5, "r": 0.0170, "x": 0.0920, "b_sh": 0.158, "s_max": 2.50},
    {"from": 5, "to": 6, "r": 0.0390, "x": 0.1700, "b_sh": 0.358, "s_max": 1.50},
    {"from": 3, "to": 6, "r": 0.0,    "x": 0.0586, "b_sh": 0.0,   "s_max": 3.00},
    {"from": 6, "to": 7, "r": 0.0119, "x": 0.1008, "b_sh": 0.209, "s_max": 1.50},
    {"from": 7, "to": 8, "r": 0.0085, "x": 0.0720, "b_sh": 0.149, "s_max": 2.50},
    {"from": 8, "to": 2, "r": 0.0,    "x": 0.0625, "b_sh": 0.0,   "s_max": 2.50},
    {"from": 8, "to": 9, "r": 0.0320, "x": 0.1610, "b_sh": 0.306, "s_max": 2.50},
    {"from": 9, "to": 4, "r": 0.0170, "x": 0.0920, "b_sh": 0.158, "s_max": 2.50}
  ],
  "ref_bus": 1
})";

}  // namespace

const std::vector<CasePreset>& builtin_cases() {
  static const std::vector<CasePreset> presets = {
      {"wb5", "five-bus system, two generators, no line limits", kWb5},
      {"case9mod", "nine-bus system, three generators, quadratic costs, line limits", kCase9mod},
  };
  return presets;
}

std::optional<std::string> builtin_case_document(std::string_view id) {
  for (const auto& p : builtin_cases())
    if (p.id == id) return p.document;
  return std::nullopt;
}

NetworkCase resolve_case(const std::string& id_or_path) {
  if (auto doc = builtin_case_document(id_or_path)) return load_case_text(*doc);
  if (!std::filesystem::exists(id_or_path))
    throw CaseError(id_or_path, "not a built-in case id and no such file");
  return load_case_file(id_or_path);
}

}  // namespace opf

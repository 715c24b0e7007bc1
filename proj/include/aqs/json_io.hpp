#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aqs/panacea_sim.hpp"
#include "aqs/quantizer.hpp"
#include "aqs/workload.hpp"
#include "json.hpp"

namespace aqs {

// Insertion-ordered so serialized artifacts are byte-stable.
using Json = nlohmann::ordered_json;

Json to_json(const QuantParams& p);
QuantParams quant_params_from_json(const Json& j);

Json to_json(const EnergyTable& e);
Json to_json(const HardwareConfig& cfg);
// Keys absent from j keep their value in base; unknown keys are rejected.
HardwareConfig hardware_config_from_json(const Json& j, HardwareConfig base = {});

Json to_json(const WorkloadCounters& c);
Json to_json(const EnergyBreakdown& e);
Json to_json(const LayerReport& r, const HardwareConfig& cfg);
Json to_json(const SimReport& r);

// Grids, sizes, archs and named hardware variants; unspecified fields keep spec's values.
SweepSpec sweep_spec_from_json(const Json& j, const HardwareConfig& base, SweepSpec spec = {});
Json to_json(const SweepSpec& spec);

// Flat CSV, one row per (variant, layer, arch).
std::string report_csv_header();
std::string report_csv_row(std::uint64_t seed, const std::string& variant, const LayerReport& r);

Json parse_json(const std::string& text, const std::string& what);
Json load_json(const std::filesystem::path& path);
// Two-space indent plus trailing newline.
std::string dump_json(const Json& j);
void save_text(const std::filesystem::path& path, const std::string& text);

}  // namespace aqs

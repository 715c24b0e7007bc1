#include "aqs/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "aqs/error.hpp"
#include "aqs/tensor_io.hpp"

namespace aqs {
namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, where + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (keys.count(key) == 0) throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T>) {
    if (j.at(key).is_number_integer() && j.at(key).template get<std::int64_t>() < 0) {
      throw Error(ErrorCode::kInvalidArgument, std::string("'") + key + "' must be non-negative");
    }
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::kInvalidArgument, std::string("missing key '") + key + "'");
  T out{};
  read_field(j, key, out);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Json to_json(const QuantParams& p) {
  Json j;
  j["scheme"] = p.scheme == QuantScheme::kSymmetric ? "symmetric" : "asymmetric";
  j["bit_width"] = p.bit_width;
  j["scale"] = p.scale;
  j["zero_point"] = p.zero_point;
  j["dbs_type"] = p.dbs_type;
  j["lo_width"] = p.lo_width;
  j["skip_value"] = p.skip_value;
  j["group_size"] = p.group_size;
  j["group_scales"] = p.group_scales;
  return j;
}

QuantParams quant_params_from_json(const Json& j) {
  // A calibration artifact wraps the params; accept either form.
  if (j.is_object() && j.contains("params")) return quant_params_from_json(j.at("params"));
  reject_unknown(j, {"scheme", "bit_width", "scale", "zero_point", "dbs_type", "lo_width", "skip_value", "group_size",
                     "group_scales"},
                 "quant params");
  QuantParams p;
  const auto scheme = required<std::string>(j, "scheme");
  if (scheme == "symmetric") {
    p.scheme = QuantScheme::kSymmetric;
  } else if (scheme == "asymmetric") {
    p.scheme = QuantScheme::kAsymmetric;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "scheme must be 'symmetric' or 'asymmetric', got '" + scheme + "'");
  }
  p.bit_width = required<int>(j, "bit_width");
  p.scale = required<double>(j, "scale");
  read_field(j, "zero_point", p.zero_point);
  read_field(j, "dbs_type", p.dbs_type);
  read_field(j, "lo_width", p.lo_width);
  read_field(j, "skip_value", p.skip_value);
  read_field(j, "group_size", p.group_size);
  read_field(j, "group_scales", p.group_scales);
  p.validate();
  return p;
}

Json to_json(const EnergyTable& e) {
  Json j;
  j["mult_4x4"] = e.mult_4x4;
  j["add_8b"] = e.add_8b;
  j["sram_read_nibble"] = e.sram_read_nibble;
  j["sram_write_nibble"] = e.sram_write_nibble;
  j["dram_nibble"] = e.dram_nibble;
  j["reg_op"] = e.reg_op;
  return j;
}

Json to_json(const HardwareConfig& c) {
  Json j;
  j["P"] = c.P;
  j["v"] = c.v;
  j["dwo_per_pea"] = c.dwo_per_pea;
  j["swo_per_pea"] = c.swo_per_pea;
  j["multipliers_per_opc"] = c.multipliers_per_opc;
  j["TM"] = c.TM;
  j["TK"] = c.TK;
  j["TN"] = c.TN;
  j["R"] = c.R;
  j["wmem_bytes"] = c.wmem_bytes;
  j["amem_bytes"] = c.amem_bytes;
  j["omem_bytes"] = c.omem_bytes;
  j["wbuf_bytes"] = c.wbuf_bytes;
  j["dram_bits_per_cycle"] = c.dram_bits_per_cycle;
  j["rle_run_bits"] = c.rle_run_bits;
  j["dtp"] = c.dtp == DtpMode::kAuto ? "auto" : "off";
  j["comp_mode"] = to_string(c.comp_mode);
  j["clock_ghz"] = c.clock_ghz;
  j["static_power_mw"] = c.static_power_mw;
  j["energy_table"] = to_json(c.energy);
  return j;
}

HardwareConfig hardware_config_from_json(const Json& j, HardwareConfig c) {
  reject_unknown(j, {"P", "v", "dwo_per_pea", "swo_per_pea", "multipliers_per_opc", "TM", "TK", "TN", "R",
                     "wmem_bytes", "amem_bytes", "omem_bytes", "wbuf_bytes", "dram_bits_per_cycle", "rle_run_bits",
                     "dtp", "comp_mode", "clock_ghz", "static_power_mw", "energy_table"},
                 "hardware config");
  read_field(j, "P", c.P);
  read_field(j, "v", c.v);
  read_field(j, "dwo_per_pea", c.dwo_per_pea);
  read_field(j, "swo_per_pea", c.swo_per_pea);
  read_field(j, "multipliers_per_opc", c.multipliers_per_opc);
  read_field(j, "TM", c.TM);
  read_field(j, "TK", c.TK);
  read_field(j, "TN", c.TN);
  read_field(j, "R", c.R);
  read_field(j, "wmem_bytes", c.wmem_bytes);
  read_field(j, "amem_bytes", c.amem_bytes);
  read_field(j, "omem_bytes", c.omem_bytes);
  read_field(j, "wbuf_bytes", c.wbuf_bytes);
  read_field(j, "dram_bits_per_cycle", c.dram_bits_per_cycle);
  read_field(j, "rle_run_bits", c.rle_run_bits);
  read_field(j, "clock_ghz", c.clock_ghz);
  read_field(j, "static_power_mw", c.static_power_mw);
  if (j.contains("dtp")) {
    const auto d = required<std::string>(j, "dtp");
    if (d != "auto" && d != "off") throw Error(ErrorCode::kInvalidArgument, "dtp must be 'auto' or 'off'");
    c.dtp = d == "auto" ? DtpMode::kAuto : DtpMode::kOff;
  }
  if (j.contains("comp_mode")) {
    const auto m = required<std::string>(j, "comp_mode");
    if (m != "eq5" && m != "eq6") throw Error(ErrorCode::kInvalidArgument, "comp_mode must be 'eq5' or 'eq6'");
    c.comp_mode = m == "eq5" ? CompMode::kEq5 : CompMode::kEq6;
  }
  if (j.contains("energy_table")) {
    const Json& e = j.at("energy_table");
    reject_unknown(e, {"mult_4x4", "add_8b", "sram_read_nibble", "sram_write_nibble", "dram_nibble", "reg_op"},
                   "energy_table");
    read_field(e, "mult_4x4", c.energy.mult_4x4);
    read_field(e, "add_8b", c.energy.add_8b);
    read_field(e, "sram_read_nibble", c.energy.sram_read_nibble);
    read_field(e, "sram_write_nibble", c.energy.sram_write_nibble);
    read_field(e, "dram_nibble", c.energy.dram_nibble);
    read_field(e, "reg_op", c.energy.reg_op);
  }
  c.validate();
  return c;
}

Json to_json(const WorkloadCounters& c) {
  Json j;
  j["mults"] = c.mults;
  j["adds"] = c.adds;
  j["dram_nibbles"] = c.dram_nibbles;
  j["sram_read_nibbles"] = c.sram_read_nibbles;
  j["sram_write_nibbles"] = c.sram_write_nibbles;
  j["compensation_mults"] = c.compensation_mults;
  j["compensation_adds"] = c.compensation_adds;
  j["compensation_dram_nibbles"] = c.compensation_dram_nibbles;
  j["dram_index_nibbles"] = c.dram_index_nibbles;
  j["dram_write_nibbles"] = c.dram_write_nibbles;
  j["psum_dram_nibbles"] = c.psum_dram_nibbles;
  j["psum_sram_nibbles"] = c.psum_sram_nibbles;
  j["pair_mults"] = {{"ho_ho", c.pair_mults[0]}, {"lo_ho", c.pair_mults[1]}, {"ho_lo", c.pair_mults[2]},
                     {"lo_lo", c.pair_mults[3]}};
  j["total_dram_nibbles"] = c.total_dram_nibbles();
  return j;
}

Json to_json(const EnergyBreakdown& e) {
  Json j;
  j["compute_pj"] = e.compute_pj;
  j["sram_pj"] = e.sram_pj;
  j["dram_pj"] = e.dram_pj;
  j["register_pj"] = e.register_pj;
  j["static_pj"] = e.static_pj;
  j["total_pj"] = e.total();
  return j;
}

Json to_json(const LayerReport& r, const HardwareConfig& cfg) {
  Json j;
  j["layer"] = r.layer;
  j["arch"] = to_string(r.arch);
  j["M"] = r.M;
  j["K"] = r.K;
  j["N"] = r.N;
  j["rho_w"] = r.rho_w;
  j["rho_x"] = r.rho_x;
  j["cycles"] = r.cycles;
  j["compute_cycles"] = r.compute_cycles;
  j["compute_bound_groups"] = r.compute_bound_groups;
  j["transfer_bound_groups"] = r.transfer_bound_groups;
  j["dwo_busy_cycles"] = r.dwo_busy_cycles;
  j["swo_busy_cycles"] = r.swo_busy_cycles;
  j["dwo_utilization"] = r.dwo_utilization(cfg);
  j["swo_utilization"] = r.swo_utilization(cfg);
  j["reg_nibbles"] = r.reg_nibbles;
  j["dtp_enabled"] = r.dtp_enabled;
  j["compensation_overlapped"] = r.compensation_overlapped;
  j["counters"] = to_json(r.counters);
  j["energy"] = to_json(r.energy);
  j["energy_pj"] = r.energy_pj;
  j["effective_tops"] = r.effective_tops;
  j["tops_per_watt_relative"] = r.tops_per_watt_relative;
  return j;
}

Json to_json(const SimReport& r) {
  Json j;
  j["seed"] = r.seed;
  j["config"] = to_json(r.config);
  j["layers"] = Json::array();
  for (const auto& l : r.layers) j["layers"].push_back(to_json(l, r.config));
  return j;
}

SweepSpec sweep_spec_from_json(const Json& j, const HardwareConfig& base, SweepSpec spec) {
  reject_unknown(j, {"rho_w", "rho_x", "sizes", "archs", "variants", "seed"}, "sweep");
  read_field(j, "rho_w", spec.rho_w);
  read_field(j, "rho_x", spec.rho_x);
  read_field(j, "seed", spec.seed);
  if (j.contains("sizes")) {
    spec.sizes.clear();
    for (const auto& s : j.at("sizes")) {
      if (!s.is_array() || s.size() != 3) throw Error(ErrorCode::kInvalidArgument, "sizes entries are [M, K, N]");
      spec.sizes.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()});
    }
  }
  if (j.contains("archs")) {
    spec.archs.clear();
    for (const auto& a : j.at("archs")) spec.archs.push_back(arch_from_string(a.get<std::string>()));
  }
  if (j.contains("variants")) {
    spec.variants.clear();
    for (const auto& [name, overrides] : j.at("variants").items()) {
      spec.variants.emplace_back(name, hardware_config_from_json(overrides, base));
    }
  }
  spec.validate();
  return spec;
}

Json to_json(const SweepSpec& spec) {
  Json j;
  j["rho_w"] = spec.rho_w;
  j["rho_x"] = spec.rho_x;
  j["sizes"] = Json::array();
  for (const auto& s : spec.sizes) j["sizes"].push_back({s.M, s.K, s.N});
  j["archs"] = Json::array();
  for (const Arch a : spec.archs) j["archs"].push_back(to_string(a));
  j["variants"] = Json::object();
  for (const auto& [name, cfg] : spec.variants) j["variants"][name] = to_json(cfg);
  j["seed"] = spec.seed;
  return j;
}

std::string report_csv_header() {
  return "seed,variant,arch,layer,M,K,N,rho_w,rho_x,dtp_enabled,cycles,compute_cycles,dwo_busy_cycles,"
         "swo_busy_cycles,mults,adds,dram_nibbles,dram_index_nibbles,dram_write_nibbles,psum_dram_nibbles,"
         "sram_read_nibbles,sram_write_nibbles,psum_sram_nibbles,reg_nibbles,compensation_mults,"
         "compensation_adds,compensation_dram_nibbles,energy_compute_pj,energy_sram_pj,energy_dram_pj,"
         "energy_register_pj,energy_static_pj,energy_pj,effective_tops,tops_per_watt_relative\n";
}

std::string report_csv_row(std::uint64_t seed, const std::string& variant, const LayerReport& r) {
  const WorkloadCounters& c = r.counters;
  std::ostringstream os;
  os << seed << ',' << variant << ',' << to_string(r.arch) << ',' << r.layer << ',' << r.M << ',' << r.K << ','
     << r.N << ',' << fmt(r.rho_w) << ',' << fmt(r.rho_x) << ',' << (r.dtp_enabled ? 1 : 0) << ',' << r.cycles << ','
     << r.compute_cycles << ',' << r.dwo_busy_cycles << ',' << r.swo_busy_cycles << ',' << c.mults << ',' << c.adds
     << ',' << c.dram_nibbles << ',' << c.dram_index_nibbles << ',' << c.dram_write_nibbles << ','
     << c.psum_dram_nibbles << ',' << c.sram_read_nibbles << ',' << c.sram_write_nibbles << ','
     << c.psum_sram_nibbles << ',' << r.reg_nibbles << ',' << c.compensation_mults << ',' << c.compensation_adds
     << ',' << c.compensation_dram_nibbles << ',' << fmt(r.energy.compute_pj) << ',' << fmt(r.energy.sram_pj) << ','
     << fmt(r.energy.dram_pj) << ',' << fmt(r.energy.register_pj) << ',' << fmt(r.energy.static_pj) << ','
     << fmt(r.energy_pj) << ',' << fmt(r.effective_tops) << ',' << fmt(r.tops_per_watt_relative) << '\n';
  return os.str();
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, what + " is not valid JSON: " + e.what());
  }
}

Json load_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_json(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void save_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace aqs

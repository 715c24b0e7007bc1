// aqs: command-line front end for calibration, slicing, compression,
// compensated GEMM and the accelerator simulator.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aqs/aqs_gemm.hpp"
#include "aqs/bit_slicer.hpp"
#include "aqs/error.hpp"
#include "aqs/json_io.hpp"
#include "aqs/panacea_sim.hpp"
#include "aqs/quantizer.hpp"
#include "aqs/slice_compressor.hpp"
#include "aqs/synthetic.hpp"
#include "aqs/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace aqs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct VerifyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- shared options ---------------------------------------------------------

struct Global {
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  Json config = Json::object();

  void load() {
    if (config_path.empty()) return;
    config = load_json(config_path);
    if (!config.is_object()) throw UsageError("--config must hold a JSON object");
    for (const auto& [key, value] : config.items()) {
      if (key != "hardware" && key != "sweep" && key != "calibrate" && key != "seed") {
        throw UsageError("unknown key '" + key + "' in " + config_path);
      }
    }
  }

  // Flag, then AQS_SEED, then the config file, then 0.
  std::uint64_t seed() const {
    if (seed_flag) return *seed_flag;
    if (const char* env = std::getenv("AQS_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw UsageError(std::string("AQS_SEED is not an unsigned integer: ") + env);
      }
    }
    if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
    return 0;
  }

  HardwareConfig hardware() const {
    return config.contains("hardware") ? hardware_config_from_json(config.at("hardware")) : HardwareConfig{};
  }

  Json section(const char* name) const { return config.contains(name) ? config.at(name) : Json::object(); }
};

FloatMatrix load_float(const std::string& path) {
  if (fs::path(path).extension() == ".csv") {
    const auto bytes = read_file(path);
    return parse_csv(std::string(bytes.begin(), bytes.end()));
  }
  return to_float(load_matrix(path));
}

IntMatrix load_codes(const std::string& path) {
  const AnyMatrix m = load_matrix(path);
  if (dtype_of(m) == DType::kFloat32) throw UsageError(path + " holds floats; expected integer codes");
  return to_int(m);
}

std::string file_name(const std::string& path) { return fs::path(path).filename().string(); }

void write_json(const std::string& path, const Json& j) { save_text(path, dump_json(j)); }

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) { write_file(path, bytes); }

struct Dims {
  std::size_t M = 0, K = 0, N = 0;
};

Dims parse_dims(const std::string& text) {
  Dims d;
  char x1 = 0;
  char x2 = 0;
  std::istringstream is(text);
  if (!(is >> d.M >> x1 >> d.K >> x2 >> d.N) || x1 != 'x' || x2 != 'x' || !is.eof() || d.M == 0 || d.K == 0 ||
      d.N == 0) {
    throw UsageError("size '" + text + "' is not of the form MxKxN");
  }
  return d;
}

CompMode parse_mode(const std::string& m) { return m == "eq5" ? CompMode::kEq5 : CompMode::kEq6; }

std::vector<Arch> parse_archs(const std::vector<std::string>& names) {
  std::vector<Arch> out;
  for (const auto& n : names) out.push_back(arch_from_string(n));
  return out;
}

Json stamp(const char* command, std::uint64_t seed) {
  Json j;
  j["command"] = command;
  j["seed"] = seed;
  return j;
}

// ---- calibrate --------------------------------------------------------------

struct CalibrateArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string scheme = "asymmetric";
  std::optional<int> bits;
  std::optional<double> target;
  std::optional<bool> zpm;
  std::optional<bool> dbs;
  std::size_t group_rows = 0;
};

int cmd_calibrate(const Global& g, CalibrateArgs a) {
  const Json sec = g.section("calibrate");
  if (!a.target && sec.contains("target_sparsity")) a.target = sec.at("target_sparsity").get<double>();
  if (!a.zpm && sec.contains("zpm")) a.zpm = sec.at("zpm").get<bool>();
  if (!a.dbs && sec.contains("dbs")) a.dbs = sec.at("dbs").get<bool>();
  if (!a.bits && sec.contains("bits")) a.bits = sec.at("bits").get<int>();
  const int bits = a.bits.value_or(8);

  const bool symmetric = a.scheme == "symmetric";
  if (symmetric && (a.zpm.value_or(false) || a.dbs.value_or(false) || a.target)) {
    throw UsageError("ZPM and DBS apply to asymmetric activations only");
  }
  if (!symmetric && a.group_rows != 0) throw UsageError("--group-rows applies to symmetric weights only");
  if (!symmetric && a.dbs && !*a.dbs && a.target) throw UsageError("--target-sparsity needs DBS enabled");
  if (symmetric && a.group_rows != 0 && a.inputs.size() != 1) {
    throw UsageError("grouped scales need exactly one weight matrix");
  }

  std::vector<FloatMatrix> batches;
  for (const auto& p : a.inputs) batches.push_back(load_float(p));

  Json out = stamp("calibrate", g.seed());
  Json opts;
  opts["scheme"] = a.scheme;
  opts["bits"] = bits;
  Json inputs = Json::array();
  for (const auto& p : a.inputs) inputs.push_back(file_name(p));

  if (symmetric) {
    opts["group_rows"] = a.group_rows;
    FloatMatrix all;
    if (batches.size() == 1) {
      all = batches.front();
    } else {
      std::size_t total = 0;
      for (const auto& b : batches) total += b.data.size();
      all = FloatMatrix(1, total);
      std::size_t i = 0;
      for (const auto& b : batches) {
        for (const float v : b.data) all.data[i++] = v;
      }
    }
    const auto q = quantize_symmetric(all, bits, a.group_rows);
    out["options"] = opts;
    out["inputs"] = inputs;
    out["params"] = to_json(q.params);
    write_json(a.output, out);
    std::cout << "symmetric " << bits << "-bit scale " << q.params.scale << "\n";
    return kExitOk;
  }

  CalibrationOptions co;
  co.bits = bits;
  co.enable_zpm = a.zpm.value_or(true);
  co.enable_dbs = a.dbs.value_or(true);
  if (a.target) co.dbs.target_sparsity = *a.target;
  const auto res = calibrate(batches, co);
  opts["zpm"] = co.enable_zpm;
  opts["dbs"] = co.enable_dbs;
  opts["target_sparsity"] = co.dbs.target_sparsity;
  out["options"] = opts;
  out["inputs"] = inputs;
  out["params"] = to_json(res.params);
  Json st;
  st["count"] = res.stats.count;
  st["min"] = res.stats.min;
  st["max"] = res.stats.max;
  st["code_mean"] = res.stats.mean();
  st["code_std"] = res.stats.std();
  out["stats"] = st;
  out["skip_mass"] = res.skip_mass;
  out["skip_mass_without_zpm"] = res.skip_mass_without_zpm;
  write_json(a.output, out);
  std::cout << "dbs type " << res.params.dbs_type << " (l=" << res.params.lo_width << "), zero point "
            << res.params.zero_point << ", skip value " << res.params.skip_value << "\n"
            << "skip-range mass " << res.skip_mass << " (without ZPM " << res.skip_mass_without_zpm << ")\n";
  return kExitOk;
}

// ---- quantize ---------------------------------------------------------------

struct QuantizeArgs {
  std::string input, output, params, params_out;
  std::string scheme;
  int bits = 8;
  std::size_t group_rows = 0;
};

int cmd_quantize(const Global&, const QuantizeArgs& a) {
  const FloatMatrix x = load_float(a.input);
  Quantized q;
  if (!a.params.empty()) {
    if (!a.scheme.empty()) throw UsageError("--scheme conflicts with --params");
    const QuantParams p = quant_params_from_json(load_json(a.params));
    if (p.scheme != QuantScheme::kAsymmetric) {
      throw UsageError("--params must be asymmetric; symmetric weights are fitted with --scheme symmetric");
    }
    q = quantize_asymmetric(x, p.bit_width, p);
  } else if (a.scheme == "symmetric") {
    q = quantize_symmetric(x, a.bits, a.group_rows);
  } else if (a.scheme == "asymmetric") {
    q = quantize_asymmetric(x, a.bits);
  } else {
    throw UsageError("give --params or --scheme");
  }
  save_matrix(narrow_codes(q.codes), a.output);
  if (!a.params_out.empty()) write_json(a.params_out, to_json(q.params));
  std::cout << q.codes.rows << "x" << q.codes.cols << " codes in [" << q.params.qmin() << ", " << q.params.qmax()
            << "]\n";
  return kExitOk;
}

// ---- slice / compress -------------------------------------------------------

int cmd_slice(const Global&, const std::string& input, const std::string& params, const std::string& output) {
  const IntMatrix codes = load_codes(input);
  const QuantParams p = quant_params_from_json(load_json(params));
  const SlicedMatrix sm =
      p.scheme == QuantScheme::kSymmetric ? slice_sbr(codes, p.bit_width) : slice_activation(codes, p);
  write_bytes(output, encode_sliced(sm));
  std::cout << sm.planes.size() << " planes, shifts";
  for (const auto& pl : sm.planes) std::cout << ' ' << pl.shift;
  std::cout << "\n";
  return kExitOk;
}

int cmd_compress(const Global&, const std::string& input, const std::string& params, const std::string& output) {
  const auto bytes = read_file(input);
  const SlicedMatrix sm = decode_sliced(bytes);
  std::int8_t r = 0;
  if (sm.scheme != SliceScheme::kSbrWeight && sm.has_ho_plane()) {
    if (params.empty()) throw UsageError("activation slices need --params for the skip value");
    r = static_cast<std::int8_t>(quant_params_from_json(load_json(params)).skip_value);
  }
  const CompressedOperand op = compress_operand(sm, r);
  write_bytes(output, encode_operand(op));
  if (op.ho) {
    std::cout << "HO vectors " << op.ho->vector_count() << ", records " << op.ho->record_count() << ", sparsity "
              << vector_sparsity(sm.ho(), op.orientation(), r) << "\n";
  } else {
    std::cout << "single dense plane, nothing to compress\n";
  }
  return kExitOk;
}

// ---- gemm -------------------------------------------------------------------

struct GemmArgs {
  std::string weights, activations, weight_params, activation_params, bias;
  std::string synthetic;
  double rho_w = 0.5, rho_x = 0.5;
  int weight_bits = 7;
  int dbs_type = 1;
  std::string mode = "eq6";
  bool verify = false;
  std::string output, counters;
};

std::optional<std::pair<std::size_t, std::size_t>> first_mismatch(const IntMatrix& a, const IntMatrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] != b.data[i]) return std::make_pair(i / a.cols, i % a.cols);
  }
  return std::nullopt;
}

int cmd_gemm(const Global& g, const GemmArgs& a) {
  const std::uint64_t seed = g.seed();
  GemmOperands ops;
  Json src;
  if (!a.synthetic.empty()) {
    if (!a.weights.empty() || !a.activations.empty()) throw UsageError("--synthetic replaces --weights/--activations");
    const Dims d = parse_dims(a.synthetic);
    const auto s = synthetic_gemm(seed, d.M, d.K, d.N, a.rho_w, a.rho_x, a.weight_bits, a.dbs_type);
    ops = make_operands(s.w, s.params_w, s.x, s.params_x);
    src["synthetic"] = a.synthetic;
    src["rho_w"] = a.rho_w;
    src["rho_x"] = a.rho_x;
    src["weight_bits"] = a.weight_bits;
    src["dbs_type"] = a.dbs_type;
  } else {
    if (a.weights.empty() || a.activations.empty() || a.weight_params.empty() || a.activation_params.empty()) {
      throw UsageError("gemm needs --weights, --activations, --weight-params and --activation-params");
    }
    ops.w = decode_operand(read_file(a.weights));
    ops.x = decode_operand(read_file(a.activations));
    ops.params_w = quant_params_from_json(load_json(a.weight_params));
    ops.params_x = quant_params_from_json(load_json(a.activation_params));
    if (ops.w.cols != ops.x.rows) {
      throw Error(ErrorCode::kShapeMismatch, "weights are " + std::to_string(ops.w.rows) + "x" +
                                                 std::to_string(ops.w.cols) + ", activations " +
                                                 std::to_string(ops.x.rows) + "x" + std::to_string(ops.x.cols));
    }
    const IntMatrix w_int = reconstruct(decompress_operand(ops.w));
    const int l = ops.x.ho ? ops.x.ho->shift : 0;
    ops.b_prime = make_b_prime(w_int, ops.x.skip_value(), l);
    ops.b_hat = a.bias.empty() ? IntMatrix(ops.w.rows, 1)
                               : fold_bias(w_int, ops.params_w, ops.params_x, load_float(a.bias));
    src["weights"] = file_name(a.weights);
    src["activations"] = file_name(a.activations);
  }
  ops.validate();

  const CompMode mode = parse_mode(a.mode);
  const GemmResult res = aqs_gemm(ops, mode);
  Json out = stamp("gemm", seed);
  out["source"] = src;
  out["mode"] = to_string(mode);
  out["M"] = ops.M();
  out["K"] = ops.K();
  out["N"] = ops.N();
  out["counters"] = to_json(res.workload);

  int status = kExitOk;
  if (a.verify) {
    const IntMatrix oracle = dense_int_gemm_oracle(weight_int(ops), effective_activation(ops));
    const GemmResult other = aqs_gemm(ops, mode == CompMode::kEq5 ? CompMode::kEq6 : CompMode::kEq5);
    Json v;
    for (const auto* r : {&res, &other}) {
      const CompMode m = r == &res ? mode : (mode == CompMode::kEq5 ? CompMode::kEq6 : CompMode::kEq5);
      const auto mm = first_mismatch(r->acc, oracle);
      v[to_string(m)] = !mm.has_value();
      if (mm) {
        std::cerr << "verify: " << to_string(m) << " differs from the integer oracle at (" << mm->first << ", "
                  << mm->second << "): got " << r->acc(mm->first, mm->second) << ", expected "
                  << oracle(mm->first, mm->second) << "\n";
        status = kExitVerify;
      }
    }
    out["verify"] = v;
    if (status == kExitOk) std::cout << "verify: eq5 and eq6 match the integer oracle\n";
  }
  if (!a.counters.empty()) write_json(a.counters, out);
  if (!a.output.empty()) save_matrix(add_bias(res.acc, ops.b_hat), a.output);
  std::cout << "mults " << res.workload.mults << ", dram nibbles " << res.workload.total_dram_nibbles() << "\n";
  if (status != kExitOk) throw VerifyFailure("verification failed");
  return status;
}

// ---- simulate / sweep -------------------------------------------------------

struct SimulateArgs {
  std::vector<std::string> weights, activations, synthetic;
  double rho_w = 0.5, rho_x = 0.5;
  std::vector<std::string> archs{"panacea", "sibia", "simd", "sa_ws", "sa_os"};
  std::string dtp, mode;
  std::string output, csv;
};

HardwareConfig apply_overrides(HardwareConfig cfg, const std::string& dtp, const std::string& mode) {
  if (!dtp.empty()) cfg.dtp = dtp == "auto" ? DtpMode::kAuto : DtpMode::kOff;
  if (!mode.empty()) cfg.comp_mode = parse_mode(mode);
  cfg.validate();
  return cfg;
}

std::string csv_of(const SimReport& rep, const std::string& variant) {
  std::string csv = report_csv_header();
  for (const auto& l : rep.layers) csv += report_csv_row(rep.seed, variant, l);
  return csv;
}

int cmd_simulate(const Global& g, const SimulateArgs& a) {
  if (a.weights.size() != a.activations.size()) throw UsageError("give one --activations per --weights");
  if (a.weights.empty() && a.synthetic.empty()) throw UsageError("nothing to simulate: give operands or --synthetic");
  SimReport rep;
  rep.seed = g.seed();
  rep.config = apply_overrides(g.hardware(), a.dtp, a.mode);
  const auto archs = parse_archs(a.archs);

  std::vector<LayerPattern> layers;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    const auto w = decode_operand(read_file(a.weights[i]));
    const auto x = decode_operand(read_file(a.activations[i]));
    layers.push_back(pattern_from_operands(w, x, fs::path(a.weights[i]).stem().string()));
  }
  for (std::size_t i = 0; i < a.synthetic.size(); ++i) {
    const Dims d = parse_dims(a.synthetic[i]);
    LayerPattern L = synthetic_pattern(d.M, d.K, d.N, a.rho_w, a.rho_x, rep.seed + i);
    L.name = a.synthetic[i];
    layers.push_back(std::move(L));
  }
  for (const auto& L : layers) {
    for (const Arch arch : archs) rep.layers.push_back(simulate_layer(L, rep.config, arch));
  }

  Json out = stamp("simulate", rep.seed);
  out["report"] = to_json(rep);
  if (!a.output.empty()) write_json(a.output, out);
  if (!a.csv.empty()) save_text(a.csv, csv_of(rep, "base"));
  for (const auto& l : rep.layers) {
    std::cout << l.layer << ' ' << to_string(l.arch) << ": " << l.cycles << " cycles, " << l.energy_pj << " pJ"
              << (l.dtp_enabled ? ", dtp" : "") << "\n";
  }
  return kExitOk;
}

struct SweepArgs {
  std::vector<double> rho_w, rho_x;
  std::vector<std::string> sizes, archs;
  std::string output, json;
};

SweepSpec build_spec(const Global& g, const HardwareConfig& base, const SweepArgs& a) {
  SweepSpec spec;
  if (g.config.contains("sweep")) spec = sweep_spec_from_json(g.config.at("sweep"), base, spec);
  if (!a.rho_w.empty()) spec.rho_w = a.rho_w;
  if (!a.rho_x.empty()) spec.rho_x = a.rho_x;
  if (!a.sizes.empty()) {
    spec.sizes.clear();
    for (const auto& s : a.sizes) {
      const Dims d = parse_dims(s);
      spec.sizes.push_back({d.M, d.K, d.N});
    }
  }
  if (!a.archs.empty()) spec.archs = parse_archs(a.archs);
  spec.seed = g.seed();
  spec.validate();
  return spec;
}

int cmd_sweep(const Global& g, const SweepArgs& a) {
  const HardwareConfig base = g.hardware();
  const SweepSpec spec = build_spec(g, base, a);
  const auto rows = sweep(spec, base);
  std::string csv = report_csv_header();
  for (const auto& r : rows) csv += report_csv_row(spec.seed, r.variant, r.report);
  save_text(a.output, csv);
  if (!a.json.empty()) {
    Json out = stamp("sweep", spec.seed);
    out["config"] = to_json(base);
    out["sweep"] = to_json(spec);
    out["rows"] = Json::array();
    for (const auto& r : rows) {
      const HardwareConfig* cfg = &base;
      for (const auto& [name, c] : spec.variants) {
        if (name == r.variant) cfg = &c;
      }
      Json row = to_json(r.report, *cfg);
      row["variant"] = r.variant;
      out["rows"].push_back(row);
    }
    write_json(a.json, out);
  }
  std::cout << rows.size() << " rows\n";
  return kExitOk;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> activations;
  std::string output_dir;
  double target = 0.9;
  std::size_t size = 256;
};

struct SparsityRow {
  std::string layer;
  double sibia_zero = 0, aqs = 0, aqs_zpm = 0, aqs_zpm_dbs = 0;
  QuantParams params;  // full pipeline
};

double aqs_vector_sparsity(const FloatMatrix& x, bool zpm, bool dbs, double target, QuantParams* params_out) {
  CalibrationOptions co;
  co.enable_zpm = zpm;
  co.enable_dbs = dbs;
  co.dbs.target_sparsity = target;
  const std::vector<FloatMatrix> batch{x};
  const QuantParams p = calibrate(batch, co).params;
  const auto q = quantize_asymmetric(x, p.bit_width, p);
  const SlicedMatrix sm = slice_activation(q.codes, p);
  if (params_out != nullptr) *params_out = p;
  return vector_sparsity(sm.ho(), Orientation::kActivation1x4, static_cast<std::int8_t>(p.skip_value));
}

SparsityRow sparsity_row(const std::string& name, const FloatMatrix& x, double target) {
  SparsityRow r;
  r.layer = name;
  const auto sym = quantize_symmetric(x, 7);
  r.sibia_zero = vector_sparsity(slice_sbr(sym.codes, 7).ho(), Orientation::kActivation1x4, 0);
  r.aqs = aqs_vector_sparsity(x, false, false, target, nullptr);
  r.aqs_zpm = aqs_vector_sparsity(x, true, false, target, nullptr);
  r.aqs_zpm_dbs = aqs_vector_sparsity(x, true, true, target, &r.params);
  return r;
}

// Seeded stand-ins for transformer activations: a body concentrated around
// zero plus a sparse tail up to `hi`. The negative extreme puts the fitted
// zero point just above a 16-code bucket edge, where ZPM matters.
std::vector<std::pair<std::string, FloatMatrix>> synthetic_layers(std::uint64_t seed) {
  struct Shape {
    const char* name;
    double sigma, hi;
    int zero_point;
  };
  const Shape shapes[] = {{"qkv_in", 0.05, 3.0, 81},  {"attn_out", 0.1, 2.0, 129}, {"fc1_in", 0.2, 4.0, 65},
                          {"fc2_in", 0.3, 6.0, 33},   {"proj_in", 0.4, 3.0, 161},  {"head_in", 0.5, 4.0, 145}};
  std::vector<std::pair<std::string, FloatMatrix>> out;
  std::mt19937_64 rng(seed);
  for (const auto& s : shapes) {
    const double lo = -s.zero_point * s.hi / (255.0 - s.zero_point);
    std::normal_distribution<double> body(0.0, s.sigma);
    std::uniform_real_distribution<double> tail(lo, s.hi);
    std::bernoulli_distribution in_tail(0.01);
    FloatMatrix m(64, 256);
    for (auto& v : m.data) v = static_cast<float>(in_tail(rng) ? tail(rng) : std::clamp(body(rng), lo, s.hi));
    m.data[0] = static_cast<float>(lo);
    m.data[1] = static_cast<float>(s.hi);
    out.emplace_back(s.name, std::move(m));
  }
  return out;
}

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_report(const Global& g, const ReportArgs& a) {
  const std::uint64_t seed = g.seed();
  const HardwareConfig cfg = g.hardware();
  fs::create_directories(a.output_dir);
  const fs::path dir(a.output_dir);

  std::vector<std::pair<std::string, FloatMatrix>> layers;
  if (a.activations.empty()) {
    layers = synthetic_layers(seed);
  } else {
    for (const auto& p : a.activations) layers.emplace_back(fs::path(p).stem().string(), load_float(p));
  }

  Json out = stamp("report", seed);
  out["config"] = to_json(cfg);
  out["target_sparsity"] = a.target;

  std::string sp = "layer,sibia_zero,aqs,aqs_zpm,aqs_zpm_dbs,dbs_type,zero_point,skip_value,zpm_monotone\n";
  Json table = Json::array();
  bool all_monotone = true;
  for (const auto& [name, x] : layers) {
    const SparsityRow r = sparsity_row(name, x, a.target);
    const bool mono = r.aqs_zpm >= r.aqs;
    all_monotone = all_monotone && mono;
    sp += r.layer + "," + fmt6(r.sibia_zero) + "," + fmt6(r.aqs) + "," + fmt6(r.aqs_zpm) + "," + fmt6(r.aqs_zpm_dbs) +
          "," + std::to_string(r.params.dbs_type) + "," + std::to_string(r.params.zero_point) + "," +
          std::to_string(r.params.skip_value) + "," + (mono ? "1" : "0") + "\n";
    Json row;
    row["layer"] = r.layer;
    row["sibia_zero"] = r.sibia_zero;
    row["aqs"] = r.aqs;
    row["aqs_zpm"] = r.aqs_zpm;
    row["aqs_zpm_dbs"] = r.aqs_zpm_dbs;
    row["params"] = to_json(r.params);
    row["zpm_monotone"] = mono;
    table.push_back(row);
  }
  save_text(dir / "sparsity.csv", sp);
  out["sparsity"] = table;
  out["zpm_monotone"] = all_monotone;

  // Throughput grid at one square size.
  SweepSpec spec;
  spec.sizes = {{a.size, a.size, a.size}};
  spec.seed = seed;
  const auto rows = sweep(spec, cfg);
  std::string tp = "rho_w,rho_x";
  for (const Arch arch : spec.archs) tp += std::string(",") + to_string(arch) + "_tops";
  tp += ",panacea_dtp,panacea_over_simd\n";
  Json grid = Json::array();
  for (std::size_t i = 0; i < rows.size(); i += spec.archs.size()) {
    const LayerReport& pan = rows[i].report;
    double simd = 0;
    Json cell;
    cell["rho_w"] = pan.rho_w;
    cell["rho_x"] = pan.rho_x;
    tp += fmt6(pan.rho_w) + "," + fmt6(pan.rho_x);
    for (std::size_t k = 0; k < spec.archs.size(); ++k) {
      const LayerReport& r = rows[i + k].report;
      tp += "," + fmt6(r.effective_tops);
      cell[std::string(to_string(r.arch)) + "_tops"] = r.effective_tops;
      if (r.arch == Arch::kSimd) simd = r.effective_tops;
    }
    const double ratio = simd > 0 ? pan.effective_tops / simd : 0.0;
    tp += std::string(",") + (pan.dtp_enabled ? "1" : "0") + "," + fmt6(ratio) + "\n";
    cell["panacea_dtp"] = pan.dtp_enabled;
    cell["panacea_over_simd"] = ratio;
    grid.push_back(cell);
  }
  save_text(dir / "throughput.csv", tp);
  out["throughput"] = grid;

  // Energy by component class at three sparsity levels.
  std::string en = "rho,arch,compute_pj,sram_pj,dram_pj,register_pj,static_pj,total_pj,tops_per_watt_relative\n";
  Json energy = Json::array();
  for (const double rho : {0.0, 0.5, 0.9}) {
    const LayerPattern L = synthetic_pattern(a.size, a.size, a.size, rho, rho, seed);
    for (const Arch arch : spec.archs) {
      const LayerReport r = simulate_layer(L, cfg, arch);
      en += fmt6(rho) + "," + to_string(arch) + "," + fmt6(r.energy.compute_pj) + "," + fmt6(r.energy.sram_pj) + "," +
            fmt6(r.energy.dram_pj) + "," + fmt6(r.energy.register_pj) + "," + fmt6(r.energy.static_pj) + "," +
            fmt6(r.energy_pj) + "," + fmt6(r.tops_per_watt_relative) + "\n";
      Json e = to_json(r.energy);
      e["rho"] = rho;
      e["arch"] = to_string(arch);
      energy.push_back(e);
    }
  }
  save_text(dir / "energy.csv", en);
  out["energy"] = energy;
  write_json((dir / "report.json").string(), out);
  std::cout << layers.size() << " layers, ZPM monotone: " << (all_monotone ? "yes" : "no") << "\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kDimOverflow:
    case ErrorCode::kBadCsv:
    case ErrorCode::kIo:
    case ErrorCode::kMalformedStream:
      return kExitIo;
    default:
      return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric bit-slice GEMM toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config_path, "JSON file with hardware, sweep, calibrate and seed sections");
  app.add_option("--seed", g.seed_flag, "Seed for synthetic data (default: AQS_SEED or 0)");

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fit quantization params from calibration tensors");
  cal->add_option("--input", ca.inputs, "Calibration tensor (.aqst or .csv); repeatable")->required();
  cal->add_option("--output", ca.output, "Params JSON to write")->required();
  cal->add_option("--scheme", ca.scheme, "asymmetric (activations) or symmetric (weights)")
      ->check(CLI::IsMember({"asymmetric", "symmetric"}));
  cal->add_option("--bits", ca.bits, "Code width");
  cal->add_option("--target-sparsity", ca.target, "DBS target skip-range mass");
  cal->add_flag("--zpm,!--no-zpm", ca.zpm, "Zero-point manipulation (default on)");
  cal->add_flag("--dbs,!--no-dbs", ca.dbs, "Distribution-based slicing (default on)");
  cal->add_option("--group-rows", ca.group_rows, "Rows sharing one weight scale");

  QuantizeArgs qa;
  auto* qu = app.add_subcommand("quantize", "Quantize a float tensor to integer codes");
  qu->add_option("--input", qa.input, "Float tensor (.aqst or .csv)")->required();
  qu->add_option("--output", qa.output, "Codes tensor to write")->required();
  qu->add_option("--params", qa.params, "Calibrated asymmetric params JSON");
  qu->add_option("--scheme", qa.scheme, "Fit fresh params instead")->check(CLI::IsMember({"asymmetric", "symmetric"}));
  qu->add_option("--bits", qa.bits, "Code width for --scheme");
  qu->add_option("--group-rows", qa.group_rows, "Rows sharing one weight scale");
  qu->add_option("--params-out", qa.params_out, "Write the params used");

  std::string sl_in, sl_params, sl_out;
  auto* sl = app.add_subcommand("slice", "Split codes into 4-bit planes");
  sl->add_option("--input", sl_in, "Codes tensor")->required();
  sl->add_option("--params", sl_params, "Params JSON for the codes")->required();
  sl->add_option("--output", sl_out, "Sliced operand to write")->required();

  std::string co_in, co_params, co_out;
  auto* co = app.add_subcommand("compress", "Run-length encode the HO plane of a sliced operand");
  co->add_option("--input", co_in, "Sliced operand")->required();
  co->add_option("--params", co_params, "Activation params (skip value)");
  co->add_option("--output", co_out, "Compressed operand to write")->required();

  GemmArgs ga;
  auto* ge = app.add_subcommand("gemm", "Compensated bit-slice GEMM over compressed operands");
  ge->add_option("--weights", ga.weights, "Compressed weight operand");
  ge->add_option("--activations", ga.activations, "Compressed activation operand");
  ge->add_option("--weight-params", ga.weight_params, "Weight params JSON");
  ge->add_option("--activation-params", ga.activation_params, "Activation params JSON");
  ge->add_option("--bias", ga.bias, "Float bias (M x 1) folded into the integer output");
  ge->add_option("--synthetic", ga.synthetic, "Seeded random operands MxKxN instead of files");
  ge->add_option("--rho-w", ga.rho_w, "Synthetic weight HO sparsity")->check(CLI::Range(0.0, 1.0));
  ge->add_option("--rho-x", ga.rho_x, "Synthetic activation HO sparsity")->check(CLI::Range(0.0, 1.0));
  ge->add_option("--weight-bits", ga.weight_bits, "Synthetic weight width")->check(CLI::IsMember({4, 7, 10}));
  ge->add_option("--dbs-type", ga.dbs_type, "Synthetic activation slicing type")->check(CLI::Range(1, 3));
  ge->add_option("--mode", ga.mode, "Compensation form (default eq6)")->check(CLI::IsMember({"eq5", "eq6"}));
  ge->add_flag("--verify", ga.verify, "Run both modes against the integer oracle");
  ge->add_option("--output", ga.output, "Accumulator tensor (int32) to write");
  ge->add_option("--counters", ga.counters, "Workload counters JSON to write");

  SimulateArgs sa;
  auto* si = app.add_subcommand("simulate", "Cycle and energy model for layers");
  si->add_option("--weights", sa.weights, "Compressed weight operand; repeatable");
  si->add_option("--activations", sa.activations, "Compressed activation operand; repeatable");
  si->add_option("--synthetic", sa.synthetic, "Synthetic layer MxKxN; repeatable");
  si->add_option("--rho-w", sa.rho_w, "Synthetic weight HO sparsity")->check(CLI::Range(0.0, 1.0));
  si->add_option("--rho-x", sa.rho_x, "Synthetic activation HO sparsity")->check(CLI::Range(0.0, 1.0));
  si->add_option("--arch", sa.archs, "Comma-separated architectures")->delimiter(',');
  si->add_option("--dtp", sa.dtp, "Double-tile processing (default auto)")->check(CLI::IsMember({"auto", "off"}));
  si->add_option("--mode", sa.mode, "Compensation form (default eq6)")->check(CLI::IsMember({"eq5", "eq6"}));
  si->add_option("--output", sa.output, "Report JSON");
  si->add_option("--csv", sa.csv, "Report CSV");

  SweepArgs wa;
  auto* sw = app.add_subcommand("sweep", "Sparsity and size sweep over synthetic layers");
  sw->add_option("--rho-w", wa.rho_w, "Comma-separated grid")->delimiter(',');
  sw->add_option("--rho-x", wa.rho_x, "Comma-separated grid")->delimiter(',');
  sw->add_option("--sizes", wa.sizes, "Comma-separated MxKxN list")->delimiter(',');
  sw->add_option("--arch", wa.archs, "Comma-separated architectures")->delimiter(',');
  sw->add_option("--output", wa.output, "CSV to write")->required();
  sw->add_option("--json", wa.json, "Full JSON to write");

  ReportArgs ra;
  auto* re = app.add_subcommand("report", "Sparsity table, throughput grid and energy breakdown");
  re->add_option("--activations", ra.activations, "Float activation tensor per layer; repeatable");
  re->add_option("--output-dir", ra.output_dir, "Directory for CSV and JSON outputs")->required();
  re->add_option("--target-sparsity", ra.target, "DBS target skip-range mass");
  re->add_option("--size", ra.size, "Square layer size for the throughput grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    g.load();
    if (*cal) return cmd_calibrate(g, ca);
    if (*qu) return cmd_quantize(g, qa);
    if (*sl) return cmd_slice(g, sl_in, sl_params, sl_out);
    if (*co) return cmd_compress(g, co_in, co_params, co_out);
    if (*ge) return cmd_gemm(g, ga);
    if (*si) return cmd_simulate(g, sa);
    if (*sw) return cmd_sweep(g, wa);
    if (*re) return cmd_report(g, ra);
  } catch (const VerifyFailure&) {
    return kExitVerify;
  } catch (const UsageError& e) {
    std::cerr << "aqs: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "aqs: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "aqs: bad JSON value: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "aqs: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "aqs: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "aqs/aqs_gemm.hpp"
#include "aqs/bit_slicer.hpp"
#include "aqs/json_io.hpp"
#include "aqs/panacea_sim.hpp"
#include "aqs/quantizer.hpp"
#include "aqs/slice_compressor.hpp"

namespace py = pybind11;
using namespace aqs;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Matrix<T> to_matrix(const Array<T>& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::kShapeMismatch, "expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix<T>(rows, cols, std::vector<T>(a.data(), a.data() + rows * cols));
}

template <typename T>
Array<T> to_array(const Matrix<T>& m) {
  Array<T> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

// nlohmann <-> Python through the json module; dicts stay plain Python objects.
py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
Json from_py(const py::object& o) {
  return parse_json(py::module_::import("json").attr("dumps")(o).cast<std::string>(), "python object");
}

QuantParams params_of(const py::object& o) { return quant_params_from_json(from_py(o)); }

CompMode mode_of(const std::string& s) {
  if (s == "eq5") return CompMode::kEq5;
  if (s == "eq6") return CompMode::kEq6;
  throw Error(ErrorCode::kInvalidArgument, "mode must be eq5 or eq6");
}

py::tuple quantized(const Quantized& q) { return py::make_tuple(to_array(q.codes), to_py(to_json(q.params))); }

}  // namespace

PYBIND11_MODULE(_aqs, m) {
  m.doc() = "Asymmetric-quantization bit-slice GEMM: quantizer, slicer, compressor, engine and simulator";
  py::register_exception<Error>(m, "AqsError", PyExc_ValueError);

  m.def(
      "quantize_symmetric",
      [](const Array<float>& x, int bits, std::size_t group_rows) {
        return quantized(quantize_symmetric(to_matrix(x), bits, group_rows));
      },
      py::arg("x"), py::arg("bits") = 7, py::arg("group_rows") = 0, "Returns (codes, params).");
  m.def(
      "quantize_asymmetric",
      [](const Array<float>& x, int bits, const py::object& params) {
        std::optional<QuantParams> p;
        if (!params.is_none()) p = params_of(params);
        return quantized(quantize_asymmetric(to_matrix(x), bits, p));
      },
      py::arg("x"), py::arg("bits") = 8, py::arg("params") = py::none(), "Returns (codes, params).");
  m.def(
      "calibrate",
      [](const std::vector<Array<float>>& batches, bool zpm, bool dbs, double target_sparsity) {
        std::vector<FloatMatrix> mats;
        for (const auto& b : batches) mats.push_back(to_matrix(b));
        CalibrationOptions co;
        co.enable_zpm = zpm;
        co.enable_dbs = dbs;
        co.dbs.target_sparsity = target_sparsity;
        const auto res = calibrate(mats, co);
        py::dict out;
        out["params"] = to_py(to_json(res.params));
        out["skip_mass"] = res.skip_mass;
        out["skip_mass_without_zpm"] = res.skip_mass_without_zpm;
        return out;
      },
      py::arg("batches"), py::arg("zpm") = true, py::arg("dbs") = true, py::arg("target_sparsity") = 0.9);
  m.def(
      "zpm_adjust", [](const py::object& p) { return to_py(to_json(zpm_adjust(params_of(p)))); }, py::arg("params"));

  m.def(
      "slice_planes",
      [](const Array<std::int32_t>& codes, const py::object& params) {
        const QuantParams p = params_of(params);
        const IntMatrix c = to_matrix(codes);
        const SlicedMatrix sm = p.scheme == QuantScheme::kSymmetric ? slice_sbr(c, p.bit_width) : slice_activation(c, p);
        py::list planes;
        for (const auto& pl : sm.planes) {
          planes.append(py::make_tuple(to_array(Matrix<std::int8_t>(pl.rows, pl.cols, pl.nibbles)), pl.shift));
        }
        return py::make_tuple(planes, to_array(reconstruct(sm)));
      },
      py::arg("codes"), py::arg("params"), "Returns ([(nibbles, shift), ...] HO first, reconstruction).");

  m.def(
      "aqs_gemm",
      [](const Array<std::int32_t>& w, const py::object& pw, const Array<std::int32_t>& x, const py::object& px,
         const std::string& mode) {
        const auto ops = make_operands(to_matrix(w), params_of(pw), to_matrix(x), params_of(px));
        const auto res = aqs_gemm(ops, mode_of(mode));
        return py::make_tuple(to_array(res.acc), to_py(to_json(res.workload)));
      },
      py::arg("w"), py::arg("params_w"), py::arg("x"), py::arg("params_x"), py::arg("mode") = "eq6",
      "Returns (accumulator, counters).");
  m.def(
      "dense_oracle",
      [](const Array<std::int32_t>& w, const py::object& pw, const Array<std::int32_t>& x, const py::object& px) {
        const auto ops = make_operands(to_matrix(w), params_of(pw), to_matrix(x), params_of(px));
        return to_array(dense_int_gemm_oracle(to_matrix(w), effective_activation(ops)));
      },
      py::arg("w"), py::arg("params_w"), py::arg("x"), py::arg("params_x"),
      "Integer reference on the activations the engine sees.");

  m.def(
      "simulate_synthetic",
      [](std::size_t M, std::size_t K, std::size_t N, double rho_w, double rho_x, std::uint64_t seed,
         const std::string& arch, const py::object& config) {
        const HardwareConfig cfg = config.is_none() ? HardwareConfig{} : hardware_config_from_json(from_py(config));
        const auto L = synthetic_pattern(M, K, N, rho_w, rho_x, seed);
        return to_py(to_json(simulate_layer(L, cfg, arch_from_string(arch)), cfg));
      },
      py::arg("M"), py::arg("K"), py::arg("N"), py::arg("rho_w"), py::arg("rho_x"), py::arg("seed") = 0,
      py::arg("arch") = "panacea", py::arg("config") = py::none());
  m.def(
      "default_config", [] { return to_py(to_json(HardwareConfig{})); });
}

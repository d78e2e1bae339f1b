#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ipp/errors.hpp"
#include "ipp/harness.hpp"

namespace py = pybind11;
using namespace ipp;

namespace {

using CellPair = std::pair<int, int>;

std::vector<Cell> cells(const std::vector<CellPair>& v) {
  std::vector<Cell> out;
  for (auto [r, c] : v) out.push_back({r, c});
  return out;
}

py::dict summary(const EvalResult& r) {
  py::list sor, nsor, sep;
  for (const auto& e : r.episodes) {
    sor.append(e.metrics.back().sor);
    nsor.append(e.metrics.back().nsor);
    sep.append(e.min_separation);
  }
  py::dict d;
  d["final_sor"] = sor;
  d["final_nsor"] = nsor;
  d["min_separation"] = sep;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-agent informative path planning with local Gaussian processes";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ArithmeticError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("default_map_shape", [] {
    const auto& map = *default_map();
    return py::make_tuple(map.height(), map.width(), map.navigable_count());
  });
  m.def("navigable_cells", [] {
    std::vector<CellPair> out;
    for (const Cell& c : default_map()->navigable_cells()) out.emplace_back(c.row, c.col);
    return out;
  });
  m.def(
      "ground_truth",
      [](const std::string& kind, std::uint64_t seed) {
        GTConfig g;
        g.kind = parse_field_kind(kind);
        g.seed = seed;
        return generate(default_map(), g).values();
      },
      py::arg("kind") = "wqp", py::arg("seed") = 0, "Field values over the bundled lake, in navigable-cell order.");
  m.def(
      "gp_predict",
      [](const std::vector<CellPair>& x, const std::vector<double>& y, double lengthscale, double noise,
         const std::vector<CellPair>& queries) {
        if (x.size() != y.size()) throw ContractError("one value per sample location is required");
        SampleSet s;
        s.locations = cells(x);
        s.values = y;
        const Posterior p = predict(s, {1.0, lengthscale}, noise, cells(queries));
        return py::make_tuple(p.mean, p.variance);
      },
      py::arg("x"), py::arg("y"), py::arg("lengthscale"), py::arg("noise") = kDefaultNoise, py::arg("queries"));
  m.def("sor", [](const std::vector<double>& mu, const std::vector<double>& gt) { return sor(mu, gt); });
  m.def("nsor", [](const std::vector<double>& mu, const std::vector<double>& gt) { return nsor(mu, gt); });
  m.def("rank_sum_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const RankSumResult r = rank_sum_test(a, b);
    py::dict d;
    d["u"] = r.u;
    d["z"] = r.z;
    d["p_two_sided"] = r.p_two_sided;
    d["p_less"] = r.p_less;
    return d;
  });
  m.def(
      "run_eval",
      [](const std::string& config, bool write) {
        const ExperimentConfig cfg = parse_config(config);
        py::gil_scoped_release release;
        EvalResult r = run_eval(cfg, write);
        py::gil_scoped_acquire acquire;
        return summary(r);
      },
      py::arg("config") = "", py::arg("write") = false, "Runs an evaluation from `key = value` config text.");
  m.def(
      "gp_bench",
      [](const std::string& config) {
        const ExperimentConfig cfg = parse_config(config);
        const BenchResult r = gp_bench(cfg, false);
        py::list rows;
        for (const auto& p : r.points)
          rows.append(py::make_tuple(p.mission, p.step, p.samples, p.sor_local, p.sor_global));
        return py::make_tuple(r.local_gp_count, rows);
      },
      py::arg("config") = "");
  m.def("selftest", [] {
    std::ostringstream os;
    const bool ok = run_selftest(os);
    return py::make_tuple(ok, os.str());
  });
}

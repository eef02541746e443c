#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qnd/analysis.hpp"
#include "qnd/config.hpp"
#include "qnd/limits.hpp"
#include "qnd/scenarios.hpp"

namespace py = pybind11;
using namespace qnd;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

RunConfig config_from(const std::string& path, std::optional<std::size_t> trials, std::optional<std::uint64_t> seed) {
  auto c = load_config(path);
  if (trials) c.n_trials = *trials;
  if (seed) c.master_seed = *seed;
  return c;
}

SequencePlan plan_from(const std::string& name, double angle, double phase_noise) {
  if (name == "squeeze-readout") return SequencePlan::squeeze_readout();
  if (name == "double-prep") return SequencePlan::double_prep();
  if (name == "rotate-alpha") return SequencePlan::rotate_alpha(angle);
  if (name == "ramsey-clock") return SequencePlan::ramsey_clock(angle, phase_noise);
  throw std::invalid_argument("unknown plan '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cavity-measurement spin squeezing simulator (C++ core)";
  m.attr("__version__") = QND_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  m.def("scenario_names", &scenario_names);

  m.def(
      "resolved_config",
      [](const std::string& path) { return dump(resolved_config(load_config(path))); }, py::arg("path"));

  m.def(
      "model_json",
      [](const std::string& path) {
        const auto c = load_config(path);
        const auto model = build_model(c);
        return dump({{"effective_atom_number", model.n0},
                     {"domega_dn", model.coupling.domega_dn},
                     {"phi_eff", model.coupling.phase_per_photon_effective},
                     {"eta0", model.coupling.antinode_cooperativity},
                     {"eta_eff", model.coupling.effective_cooperativity},
                     {"p_raman", model.rates.p_raman_total},
                     {"p_scatter", model.rates.p_total},
                     {"noise_budget", analytic_noise_budget(model.engine).to_json()},
                     {"engine", engine_params_to_json(model.engine)}});
      },
      py::arg("path"));

  m.def(
      "run_scenario",
      [](const std::string& name, const std::string& path, std::optional<std::size_t> trials,
         std::optional<std::uint64_t> seed, unsigned threads) {
        const auto c = config_from(path, trials, seed);
        ScenarioResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(name, c, threads);
        }
        py::dict files;
        for (const auto& f : r.files) files[py::str(f.name)] = f.content;
        return py::make_tuple(files, dump(run_manifest(r, c)));
      },
      py::arg("name"), py::arg("config"), py::arg("trials") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = 1);

  m.def(
      "simulate",
      [](const std::string& path, double photons, std::optional<double> n0, const std::string& plan, double angle,
         double phase_noise, std::size_t trials, std::uint64_t seed, unsigned threads) {
        const auto c = load_config(path);
        const auto model = build_model(c);
        const auto params = engine_at(model, photons, n0.value_or(model.n0));
        TrialSet set;
        {
          py::gil_scoped_release release;
          set = run_trials(params, plan_from(plan, angle, phase_noise), trials, seed, threads);
        }
        const auto n = static_cast<py::ssize_t>(set.records.size());
        const std::vector<py::ssize_t> shape{n};
        py::array_t<double> m1(shape), m2(shape), mt1(shape), mt2(shape), szf(shape);
        py::array_t<bool> sat(shape);
        auto a = m1.mutable_unchecked<1>(), b = m2.mutable_unchecked<1>(), c1 = mt1.mutable_unchecked<1>(),
             c2 = mt2.mutable_unchecked<1>(), z = szf.mutable_unchecked<1>();
        auto s = sat.mutable_unchecked<1>();
        for (py::ssize_t i = 0; i < n; ++i) {
          const auto& r = set.records[static_cast<std::size_t>(i)];
          a(i) = r.m1;
          b(i) = r.m2;
          c1(i) = r.mt1;
          c2(i) = r.mt2;
          z(i) = r.true_szf;
          s(i) = r.saturated;
        }
        py::dict out;
        out["m1"] = m1;
        out["m2"] = m2;
        out["mt1"] = mt1;
        out["mt2"] = mt2;
        out["true_szf"] = szf;
        out["saturated"] = sat;
        out["variances"] = dump(variance_stats(set).to_json());
        return out;
      },
      py::arg("config"), py::arg("photons"), py::arg("n0") = py::none(), py::arg("plan") = "squeeze-readout",
      py::arg("angle") = 0.0, py::arg("phase_noise") = 0.0, py::arg("trials") = 1000, py::arg("seed") = 1,
      py::arg("threads") = 1);

  m.def("conditional_variance", &conditional_variance, py::arg("var_prep"), py::arg("var_meas"),
        py::arg("epsilon_p") = 0.0);

  m.def(
      "squeezing_parameters",
      [](double var_prep, double var_meas, double s0, double contrast_meas, double contrast_in, double epsilon_p) {
        return dump(squeezing_parameters({var_prep, var_meas, s0, contrast_meas, contrast_in, epsilon_p}).to_json());
      },
      py::arg("var_prep"), py::arg("var_meas"), py::arg("s0"), py::arg("contrast_meas"), py::arg("contrast_in") = 1.0,
      py::arg("epsilon_p") = 0.0);

  m.def(
      "limits",
      [](double coop, double p_raman, double p_scatter, double phi_eff, double f1, double f2) {
        LimitInputs in{coop, p_raman, p_scatter, phi_eff, f1, f2};
        return dump(limit_contrast_and_zeta(in).to_json());
      },
      py::arg("collective_cooperativity"), py::arg("p_raman"), py::arg("p_scatter"), py::arg("phi_eff") = 0.0,
      py::arg("rayleigh_f1") = 0.0, py::arg("rayleigh_f2") = 0.0);

  m.def(
      "integrate_sigma2",
      [](double coop, double p_raman, double p_scatter, double p_max, std::size_t n_samples) {
        LimitInputs in{coop, p_raman, p_scatter, 0.0, 0.0, 0.0};
        const auto c = integrate_sigma2(in, p_max, n_samples);
        return py::make_tuple(to_array(c.photons), to_array(c.sigma2));
      },
      py::arg("collective_cooperativity"), py::arg("p_raman"), py::arg("p_scatter"), py::arg("p_max"),
      py::arg("n_samples") = 200);

  m.def("to_db", &to_db);
  m.def("from_db", &from_db);
}

// Python bindings: models from JSON, kernels, European and variance pricing,
// the VIX portfolio and the Monte Carlo oracle. Arrays are returned as numpy.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "volspec/config.hpp"
#include "volspec/mc_oracle.hpp"
#include "volspec/pricing.hpp"

namespace py = pybind11;
using namespace volspec;

namespace {

py::array_t<double> to_numpy(const double* data, std::size_t n) {
    py::array_t<double> out(static_cast<py::ssize_t>(n));
    std::copy(data, data + n, out.mutable_data());
    return out;
}

py::array_t<double> to_numpy(const std::vector<double>& v) { return to_numpy(v.data(), v.size()); }

py::array_t<double> to_numpy(const RVector& v) {
    return to_numpy(v.data(), static_cast<std::size_t>(v.size()));
}

py::array_t<double> to_numpy(const RMatrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto view = out.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) view(i, j) = m(i, j);
    return out;
}

py::dict diagnostics_dict(const KernelDiagnostics& d) {
    py::dict out;
    out["residue"] = d.max_imag;
    out["min_entry"] = d.min_entry;
    out["row_sum_error"] = d.max_row_sum_error;
    return out;
}

LiftParams make_lift(int c_max, std::optional<double> spacing, double leakage_error, std::size_t threads) {
    LiftParams p;
    p.c_max = c_max;
    p.fixed_spacing = spacing;
    p.guard.error = leakage_error;
    p.blocks.threads = threads;
    return p;
}

OptionKind parse_kind(const std::string& kind) {
    if (kind == "call") return OptionKind::Call;
    if (kind == "put") return OptionKind::Put;
    throw DomainError("option kind must be 'call' or 'put'");
}

}  // namespace

PYBIND11_MODULE(_volspec, m) {
    m.doc() = "Spectral pricing of realized-variance and volatility derivatives";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<DomainError> domain_error(m, "DomainError", error.ptr());
    static py::exception<NumericalError> numerical_error(m, "NumericalError", error.ptr());
    static py::exception<LeakageError> leakage_error(m, "LeakageError", numerical_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const LeakageError& e) {
            PyErr_SetString(leakage_error.ptr(), e.what());
        } catch (const NumericalError& e) {
            PyErr_SetString(numerical_error.ptr(), e.what());
        } catch (const ConfigError& e) {
            PyErr_SetString(config_error.ptr(), e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(domain_error.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    py::class_<ModelConfig>(m, "ModelConfig")
        .def_static("from_json", [](const std::string& text) { return parse_model_config(text, "<python>"); },
                    py::arg("text"))
        .def_static("load", [](const std::string& path) { return load_model_config(path); }, py::arg("path"))
        .def("to_json", [](const ModelConfig& c) { return model_config_json(c); })
        .def("hash", [](const ModelConfig& c) { return config_hash(c); })
        .def_readonly("description", &ModelConfig::description)
        .def_readonly("start_regime", &ModelConfig::start_regime);

    py::class_<Engine, std::shared_ptr<Engine>>(m, "Engine")
        .def(py::init<const ModelConfig&>(), py::arg("config"))
        .def_property_readonly("dim", &Engine::dim)
        .def_property_readonly("start_state", &Engine::start_state)
        .def_property_readonly("forward", &Engine::forward)
        .def_property_readonly("condition", [](const Engine& e) { return e.decomposition().condition; })
        .def_property_readonly("levels", [](const Engine& e) { return to_numpy(e.state_levels()); })
        .def_property_readonly("instantaneous_variance",
                               [](const Engine& e) { return to_numpy(e.instantaneous_variance()); })
        .def("kernel_row",
             [](const Engine& e, double t, double T, std::optional<std::size_t> state) {
                 const auto row = e.kernel_row(state.value_or(e.start_state()), t, T);
                 return py::make_tuple(to_numpy(row.probabilities), diagnostics_dict(row.diagnostics));
             },
             py::arg("t"), py::arg("T"), py::arg("state") = py::none())
        .def("kernel",
             [](const Engine& e, double t, double T) {
                 const auto k = e.kernel(t, T);
                 return py::make_tuple(to_numpy(k.matrix), diagnostics_dict(k.diagnostics));
             },
             py::arg("t"), py::arg("T"));

    m.def("vanilla_price",
          [](const Engine& e, double strike, double T, const std::string& kind) {
              return price_vanilla(e, {parse_kind(kind), strike, T});
          },
          py::arg("engine"), py::arg("strike"), py::arg("T"), py::arg("kind") = "call");
    m.def("black_scholes",
          [](const std::string& kind, double S, double K, double tau, double r, double q, double sigma) {
              return black_scholes(parse_kind(kind), S, K, tau, r, q, sigma);
          },
          py::arg("kind"), py::arg("S"), py::arg("K"), py::arg("tau"), py::arg("r") = 0.0, py::arg("q") = 0.0,
          py::arg("sigma"));
    m.def("implied_vol",
          [](double price, const std::string& kind, double S, double K, double tau, double r, double q) {
              return implied_vol(price, parse_kind(kind), S, K, tau, r, q);
          },
          py::arg("price"), py::arg("kind"), py::arg("S"), py::arg("K"), py::arg("tau"), py::arg("r") = 0.0,
          py::arg("q") = 0.0);
    m.def("greeks",
          [](const Engine& e, double strike, double T) {
              const auto g = greeks_profile(e, {OptionKind::Call, strike, T});
              py::dict out;
              out["regime"] = g.regime;
              out["nodes"] = g.nodes;
              out["levels"] = to_numpy(g.levels);
              out["price"] = to_numpy(g.price);
              out["delta"] = to_numpy(g.delta);
              out["gamma"] = to_numpy(g.gamma);
              out["vega"] = to_numpy(g.vega);
              return out;
          },
          py::arg("engine"), py::arg("strike"), py::arg("T"));
    m.def("forward_start_prices",
          [](const Engine& e, double t_prime, double T, const std::vector<double>& a) {
              return to_numpy(price_forward_start_strip(e, t_prime, T, a));
          },
          py::arg("engine"), py::arg("t_prime"), py::arg("T"), py::arg("forward_strikes"));
    m.def("forward_implied_vol",
          [](double price, double t_prime, double T, double a, double spot) {
              return forward_implied_vol(price, {t_prime, T, a}, spot);
          },
          py::arg("price"), py::arg("t_prime"), py::arg("T"), py::arg("forward_strike"), py::arg("spot"));

    m.def("variance_distribution",
          [](const Engine& e, double T, double t, int c_max, std::optional<double> spacing, double leakage_error,
             std::size_t threads) {
              const auto vd = variance_distribution(e, t, T, make_lift(c_max, spacing, leakage_error, threads));
              const auto fs = fair_strikes(vd.pdf);
              py::dict out;
              out["support"] = to_numpy(vd.pdf.support);
              out["weights"] = to_numpy(vd.pdf.weights);
              out["k_var"] = fs.k_var;
              out["k_vol"] = fs.k_vol;
              out["leakage"] = vd.leakage;
              out["leakage_warning"] = vd.leakage_warning;
              out["mass"] = vd.joint.diagnostics.mass;
              out["residue"] = vd.joint.diagnostics.max_imag;
              out["spacing"] = vd.joint.vgrid.spacing;
              py::array_t<double> joint({static_cast<py::ssize_t>(vd.joint.states),
                                         static_cast<py::ssize_t>(vd.joint.buckets())});
              std::copy(vd.joint.probabilities.begin(), vd.joint.probabilities.end(), joint.mutable_data());
              out["joint"] = joint;
              return out;
          },
          py::arg("engine"), py::arg("T"), py::arg("t") = 0.0, py::arg("C") = 100,
          py::arg("spacing") = py::none(), py::arg("leakage_error") = 1e-4, py::arg("threads") = 0);
    m.def("log_contract", [](const Engine& e, double T) { return log_contract(e, T); }, py::arg("engine"),
          py::arg("T"));
    m.def("vix_portfolio",
          [](const Engine& e, double T, std::size_t strikes) {
              VixSpec spec;
              spec.default_strikes = strikes;
              return vix_portfolio(e, T, spec);
          },
          py::arg("engine"), py::arg("T"), py::arg("strikes") = 2001);
    m.def("vix_pdf",
          [](const Engine& e, double t, double bin) {
              const auto pdf = vix_pdf(e, t, VixSpec{}, bin);
              return py::make_tuple(to_numpy(pdf.bin_lower), to_numpy(pdf.weights));
          },
          py::arg("engine"), py::arg("t"), py::arg("bin") = 0.5);

    m.def("simulate_realized_variance",
          [](const Engine& e, std::vector<double> observations, std::size_t paths, std::uint64_t seed,
             std::size_t threads) {
              PathConfig pc;
              pc.n_paths = paths;
              pc.seed = seed;
              pc.threads = threads;
              pc.observations = observations;
              pc.horizon = observations.empty() ? 1.0 : *std::max_element(observations.begin(), observations.end());
              SimulationResult res;
              {
                  py::gil_scoped_release release;
                  res = simulate(pc, e);
              }
              py::array_t<double> sigma({static_cast<py::ssize_t>(res.sigma.size()), static_cast<py::ssize_t>(paths)});
              auto view = sigma.mutable_unchecked<2>();
              for (std::size_t o = 0; o < res.sigma.size(); ++o)
                  for (std::size_t p = 0; p < paths; ++p)
                      view(static_cast<py::ssize_t>(o), static_cast<py::ssize_t>(p)) = res.sigma[o][p];
              return py::make_tuple(to_numpy(res.observations), sigma);
          },
          py::arg("engine"), py::arg("observations"), py::arg("paths") = 10000, py::arg("seed") = 20240101,
          py::arg("threads") = 0);
}

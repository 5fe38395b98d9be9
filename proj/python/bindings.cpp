#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shopsim/analysis.hpp"
#include "shopsim/catalog.hpp"
#include "shopsim/cli.hpp"
#include "shopsim/config.hpp"
#include "shopsim/error.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/probe.hpp"
#include "shopsim/trace.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace shopsim;

namespace {

// Documents cross the boundary as JSON text; the Python layer decodes them.
std::string dump(const json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "shopsim native core";

  static py::exception<Error> base(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CatalogError>(m, "CatalogError", base.ptr());
  py::register_exception<TraceError>(m, "TraceError", base.ptr());
  py::register_exception<AnalysisError>(m, "AnalysisError", base.ptr());
  py::register_exception<ProbeError>(m, "ProbeError", base.ptr());
  py::register_exception<PricingError>(m, "PricingError", base.ptr());

  m.def("discounted_price", [](double price, double rate) {
    return discounted_price(Money::from_dollars(price), rate).dollars();
  });
  m.def("shipping_fee", [](double price) { return shipping_fee(Money::from_dollars(price)).dollars(); });

  m.def("load_catalog_json", [](const std::filesystem::path& path) {
    const auto report = load_catalog(path);
    return dump({{"products", report.products}, {"skipped", report.skipped}, {"skip_reasons", report.skip_reasons}});
  });

  m.def("persona_count", [](const std::string& role) {
    if (role != "seller" && role != "buyer") throw ConfigError("role must be seller or buyer");
    return enumerate_personas(role == "seller" ? Role::seller : Role::buyer).size();
  });
  m.def("personas_json", [](const std::string& role) {
    if (role != "seller" && role != "buyer") throw ConfigError("role must be seller or buyer");
    return dump(enumerate_personas(role == "seller" ? Role::seller : Role::buyer));
  });

  m.def("matrix_size", [](const std::filesystem::path& config) {
    const auto cfg = load_config(config);
    const auto products = select_products(cfg.matrix.products, load_catalog(cfg.catalog).products, cfg.seed);
    return build_run_matrix(cfg.matrix, products, cfg.seed).size();
  });

  m.def("load_traces_json", [](const std::filesystem::path& path) {
    json arr = json::array();
    for (const auto& t : load_traces(path).trajectories) arr.push_back(trajectory_to_json(t));
    return dump(arr);
  });

  m.def("estimate_elasticity_json", [](const std::map<int, double>& rates) {
    return dump(estimate_elasticity_rates(rates));
  });
  m.def("paired_t_test_json", [](const std::vector<double>& deltas) { return dump(paired_t_test_one_tailed(deltas)); });
  m.def("two_proportion_test_json", [](std::int64_t sa, std::int64_t na, std::int64_t sb, std::int64_t nb) {
    return dump(two_proportion_test(sa, na, sb, nb));
  });
  m.def("token_cost", [](std::int64_t in, std::int64_t out, double in_price, double out_price) {
    return token_cost(in, out, TokenPrice{in_price, out_price});
  });

  m.def("split_product_disjoint", [](const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
    const auto s = split_product_disjoint(ids, fraction, seed);
    return py::make_tuple(s.train, s.test);
  });
  m.def(
      "hashing_embed",
      [](const std::vector<std::string>& texts, std::size_t dim) {
        HashingEmbedding e(dim);
        return e.embed(texts, "");
      },
      py::arg("texts"), py::arg("dimension") = 1024);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}

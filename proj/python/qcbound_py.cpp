#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qcbound/error.hpp"
#include "qcbound/geometry.hpp"
#include "qcbound/oracle.hpp"
#include "qcbound/poincare.hpp"
#include "qcbound/qc_transfer.hpp"
#include "qcbound/report.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list l;
      for (const auto& x : j) l.append(to_py(x));
      return l;
    }
    default: {
      py::dict d;
      for (const auto& [k, v] : j.items()) d[py::str(k)] = to_py(v);
      return d;
    }
  }
}

json from_py(const py::handle& o) {
  const py::module_ pyjson = py::module_::import("json");
  return json::parse(pyjson.attr("dumps")(o).cast<std::string>());
}

qcb::BallBranch branch_from(const std::string& s) {
  if (s == "auto" || s == "automatic") return qcb::BallBranch::automatic;
  if (s == "exact") return qcb::BallBranch::exact;
  if (s == "ent") return qcb::BallBranch::ent;
  throw qcb::InputError("branch must be auto, exact or ent");
}

qcb::DomainShape shape_from(const py::handle& o) { return qcb::shape_from_json(from_py(o)); }

}  // namespace

PYBIND11_MODULE(_qcbound, m) {
  m.doc() = "Certified Poincare constants and Neumann eigenvalue bounds";
  m.attr("__version__") = qcb::kToolVersion;

  auto base_error = py::register_exception<qcb::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<qcb::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<qcb::NumericError>(m, "NumericError", base_error.ptr());

  py::class_<qcb::CertificateTerm>(m, "CertificateTerm")
      .def_readonly("label", &qcb::CertificateTerm::label)
      .def_readonly("formula", &qcb::CertificateTerm::formula)
      .def_readonly("value", &qcb::CertificateTerm::value)
      .def("__repr__", [](const qcb::CertificateTerm& t) {
        return "CertificateTerm(" + t.label + " = " + qcb::format_number(t.value) + ")";
      });

  py::class_<qcb::PoincareBound>(m, "PoincareBound")
      .def_readonly("value", &qcb::PoincareBound::value)
      .def_readonly("p", &qcb::PoincareBound::p)
      .def_readonly("r", &qcb::PoincareBound::r)
      .def_property_readonly("form", [](const qcb::PoincareBound& b) { return std::string(qcb::to_string(b.form)); })
      .def_readonly("terms", &qcb::PoincareBound::terms)
      .def_readonly("details", &qcb::PoincareBound::details)
      .def_readonly("flags", &qcb::PoincareBound::flags)
      .def_readonly("multiplicity", &qcb::PoincareBound::multiplicity)
      .def_readonly("domain_volume", &qcb::PoincareBound::domain_volume)
      .def("term_sum", &qcb::PoincareBound::term_sum)
      .def("certificate", [](const qcb::PoincareBound& b) { return to_py(qcb::to_json(b)); })
      .def_static("from_certificate", [](const py::dict& d) { return qcb::poincare_from_json(from_py(d)); })
      .def("__repr__", [](const qcb::PoincareBound& b) {
        return "PoincareBound(value=" + qcb::format_number(b.value) + ", p=" + qcb::format_number(b.p) + ")";
      });

  py::class_<qcb::EigenBound>(m, "EigenBound")
      .def(py::init([](double mu, double p) {
             qcb::EigenBound e;
             e.mu_lower = mu;
             e.p = p;
             return e;
           }),
           py::arg("mu_lower"), py::arg("p"))
      .def_readonly("mu_lower", &qcb::EigenBound::mu_lower)
      .def_readonly("p", &qcb::EigenBound::p)
      .def_readonly("provenance", &qcb::EigenBound::provenance)
      .def_readonly("flags", &qcb::EigenBound::flags)
      .def("certificate", [](const qcb::EigenBound& b) { return to_py(qcb::to_json(b)); })
      .def("__repr__", [](const qcb::EigenBound& b) {
        return "EigenBound(mu_lower=" + qcb::format_number(b.mu_lower) + ", p=" + qcb::format_number(b.p) + ")";
      });

  py::class_<qcb::TransferResult>(m, "TransferResult")
      .def_readonly("bound", &qcb::TransferResult::bound)
      .def_readonly("q_star", &qcb::TransferResult::q_star)
      .def_readonly("s", &qcb::TransferResult::s)
      .def_readonly("flags", &qcb::TransferResult::flags)
      .def("certificate", [](const qcb::TransferResult& t) { return to_py(qcb::to_json(t)); });

  // geometry
  py::class_<qcb::ConvexCell>(m, "ConvexCell")
      .def(py::init(&qcb::ConvexCell::from_coordinates), py::arg("vertices"))
      .def_static("rectangle", &qcb::ConvexCell::rectangle, py::arg("x0"), py::arg("y0"), py::arg("x1"), py::arg("y1"))
      .def_property_readonly("dim", &qcb::ConvexCell::dim)
      .def_property_readonly("volume", &qcb::ConvexCell::volume)
      .def_property_readonly("diameter", &qcb::ConvexCell::diameter)
      .def("contains", [](const qcb::ConvexCell& c, const std::vector<double>& x) {
        qcb::Point pt = qcb::Point::Zero();
        for (std::size_t i = 0; i < x.size() && i < 3; ++i) pt(i) = x[i];
        return c.contains(pt);
      })
      .def("transformed", [](const qcb::ConvexCell& c, double scale) { return c.transformed(scale); });

  m.def("intersection_volume", &qcb::intersection_volume, py::arg("c1"), py::arg("c2"));
  m.def("union_volume", [](const std::vector<qcb::ConvexCell>& cells) { return qcb::union_volume(cells); });

  py::class_<qcb::WhitneyTriple>(m, "WhitneyTriple")
      .def(py::init(&qcb::WhitneyTriple::make), py::arg("q1"), py::arg("r2"), py::arg("q3"))
      .def_readonly("v_q1r2", &qcb::WhitneyTriple::v_q1r2)
      .def_readonly("v_r2q3", &qcb::WhitneyTriple::v_r2q3)
      .def_property_readonly("volume", &qcb::WhitneyTriple::volume);

  py::class_<qcb::WhitneyChain>(m, "WhitneyChain")
      .def(py::init(&qcb::WhitneyChain::make), py::arg("triples"), py::arg("multiplicity") = std::nullopt)
      .def_readwrite("link_volumes", &qcb::WhitneyChain::link_volumes)
      .def_readwrite("triple_volumes", &qcb::WhitneyChain::triple_volumes)
      .def_readwrite("multiplicity", &qcb::WhitneyChain::multiplicity);

  // constants
  m.def("pi_p", &qcb::pi_p, py::arg("p"));
  m.def("pi_p_quadrature", &qcb::pi_p_quadrature, py::arg("p"));
  m.def("lemma1_factor", &qcb::lemma1_factor, py::arg("volume_ratio"), py::arg("p"));
  m.def(
      "convex_cell_constant",
      [](const qcb::ConvexCell& c, double p) { return qcb::convex_cell_constant(c, {p, c.dim()}); },
      py::arg("cell"), py::arg("p"));
  m.def("pair_constant", &qcb::pair_constant, py::arg("q1"), py::arg("q2"), py::arg("overlap"), py::arg("b1"),
        py::arg("b2"), py::arg("p"));
  m.def("triple_constant", &qcb::triple_constant, py::arg("triple"), py::arg("b1"), py::arg("b2"), py::arg("b3"),
        py::arg("p"));
  m.def(
      "chain_constant",
      [](const qcb::WhitneyChain& c, const std::vector<qcb::PoincareBound>& b, double p) {
        return qcb::chain_constant(c, b, p);
      },
      py::arg("chain"), py::arg("triple_bounds"), py::arg("p"));

  auto flake_spec = [](double a, double overlap_fraction) {
    qcb::FractalTreeSpec s;
    s.a = a;
    s.overlap_fraction = overlap_fraction;
    return s;
  };
  m.def(
      "snowflake_series",
      [flake_spec](double p, int depth, double a, double overlap_fraction) {
        const auto s = qcb::snowflake_series(flake_spec(a, overlap_fraction), p, depth);
        py::dict d;
        d["level_terms"] = s.level_terms;
        d["finite_part"] = s.finite_part;
        d["tail"] = s.tail;
        d["total"] = s.total();
        return d;
      },
      py::arg("p"), py::arg("depth"), py::arg("a") = 1.0, py::arg("overlap_fraction") = 0.25);
  m.def(
      "snowflake_tail",
      [flake_spec](double p, int start_level, double a, double overlap_fraction) {
        return qcb::snowflake_tail(flake_spec(a, overlap_fraction), p, start_level);
      },
      py::arg("p"), py::arg("start_level"), py::arg("a") = 1.0, py::arg("overlap_fraction") = 0.25);
  m.def(
      "snowflake_tree_constant",
      [](double p, int depth, double a, double overlap_fraction) {
        qcb::FractalTreeSpec s;
        s.a = a;
        s.depth = depth;
        s.overlap_fraction = overlap_fraction;
        s.materialize_depth = 0;
        const auto tree = qcb::build_snowflake_tree(s);
        return qcb::tree_constant(tree, qcb::snowflake_cell_bounds(tree, p), p);
      },
      py::arg("p"), py::arg("depth"), py::arg("a") = 1.0, py::arg("overlap_fraction") = 0.25);

  // quasiconformal transfer
  py::class_<qcb::QCMapData>(m, "QCMapData")
      .def_static("linear", &qcb::QCMapData::linear, py::arg("matrix"), py::arg("domain_volume"),
                  py::arg("K") = std::nullopt)
      .def_static("identity", &qcb::QCMapData::identity, py::arg("n"), py::arg("domain_volume"))
      .def_static(
          "closed",
          [](int n, double norm, double jacobian, double volume, std::optional<double> K) {
            qcb::QCMapData d;
            d.n = n;
            d.domain_volume = volume;
            d.derivative = qcb::ClosedFormDerivative{norm, jacobian};
            d.K = K.value_or(std::pow(norm, n) / jacobian);
            d.validate();
            return d;
          },
          py::arg("n"), py::arg("norm"), py::arg("jacobian"), py::arg("domain_volume"), py::arg("K") = std::nullopt)
      .def_readonly("n", &qcb::QCMapData::n)
      .def_readonly("K", &qcb::QCMapData::K)
      .def_readonly("domain_volume", &qcb::QCMapData::domain_volume)
      .def_readwrite("alpha", &qcb::QCMapData::alpha)
      .def("sup_norm", &qcb::QCMapData::sup_norm);

  m.def("q_pq_norm", &qcb::q_pq_norm, py::arg("map"), py::arg("p"), py::arg("q"));
  m.def("q_p_sup_norm", &qcb::q_p_sup_norm, py::arg("map"), py::arg("p"));
  m.def("sobolev_comp_norm", &qcb::sobolev_comp_norm, py::arg("map"), py::arg("p"), py::arg("q"));
  m.def("q_grid", &qcb::q_grid, py::arg("q_min"), py::arg("p"));
  m.def(
      "base_constant",
      [](double value, double r, double q, std::optional<double> volume) {
        json j = {{"kind", "poincare"}, {"bound", value}, {"r", r}, {"p", q}};
        if (volume) j["volume"] = *volume;
        return qcb::poincare_from_json(j);
      },
      py::arg("value"), py::arg("r"), py::arg("q"), py::arg("domain_volume") = std::nullopt,
      "A Sobolev-Poincare constant B_{r,q} supplied by the caller.");
  m.def("poincare_transfer", &qcb::poincare_transfer, py::arg("map"), py::arg("base"), py::arg("p"));
  m.def("poincare_transfer_at", &qcb::poincare_transfer_at, py::arg("map"), py::arg("base"), py::arg("p"),
        py::arg("q"), py::arg("alpha"));
  m.def("eigen_transfer", &qcb::eigen_transfer, py::arg("map"), py::arg("base"), py::arg("p"));
  m.def("eigen_transfer_lipschitz", &qcb::eigen_transfer_lipschitz, py::arg("map"), py::arg("base_mu"), py::arg("p"));
  m.def("neumann_ball_zero", &qcb::neumann_ball_zero, py::arg("n"));
  m.def(
      "ball_lower_bound",
      [](int n, double p, const std::string& branch) { return qcb::ball_lower_bound(n, p, branch_from(branch)); },
      py::arg("n"), py::arg("p"), py::arg("branch") = "auto");
  m.def("example_c_constants", [] {
    const auto c = qcb::example_c_constants();
    py::dict d;
    d["K_squared"] = c.K_squared;
    d["K"] = c.K;
    d["L_per_delta"] = c.L_per_delta;
    return d;
  });
  m.def("example_c", &qcb::example_c, py::arg("delta"), py::arg("p"), py::arg("base_mu"));
  m.def("whitney_qc_bound", &qcb::whitney_qc_bound, py::arg("chain_bound"), py::arg("map"), py::arg("p"));

  // finite-element oracle
  py::class_<qcb::TriangleMesh>(m, "TriangleMesh")
      .def_property_readonly("nodes",
                             [](const qcb::TriangleMesh& t) {
                               Eigen::MatrixX2d a(t.nodes.size(), 2);
                               for (std::size_t i = 0; i < t.nodes.size(); ++i) a.row(i) = t.nodes[i].transpose();
                               return a;
                             })
      .def_readonly("elements", &qcb::TriangleMesh::elements)
      .def_property_readonly("area", &qcb::TriangleMesh::area)
      .def_property_readonly("max_edge", &qcb::TriangleMesh::max_edge)
      .def_property_readonly("dof", &qcb::TriangleMesh::dof)
      .def("to_json", &qcb::mesh_to_json)
      .def_static("from_json", &qcb::mesh_from_json);

  m.def(
      "mesh_domain", [](const py::dict& shape, double h) { return qcb::mesh_domain(shape_from(shape), h); },
      py::arg("shape"), py::arg("h"),
      "Shape dicts as in the config files, e.g. {'kind': 'rectangle', 'rect': [0, 0, 1, 1]}.");
  m.def(
      "neumann_mu2",
      [](const qcb::TriangleMesh& mesh) {
        const auto r = qcb::neumann_mu2(mesh);
        py::dict d;
        d["mu2"] = r.mu2;
        d["residual"] = r.residual;
        d["dof"] = r.dof;
        d["iterations"] = r.iterations;
        d["eigenvector"] = r.eigenvector;
        return d;
      },
      py::arg("mesh"));
  m.def("poincare_constant_p2", &qcb::poincare_constant_p2, py::arg("mesh"));
  m.def("rayleigh_quotient", &qcb::rayleigh_quotient, py::arg("mesh"), py::arg("f"), py::arg("p"),
        py::arg("project") = false);
  m.def(
      "minimize_rayleigh_p",
      [](const qcb::TriangleMesh& mesh, double p, int iterations, std::uint64_t seed, int starts) {
        return qcb::minimize_rayleigh_p(mesh, p, iterations, seed, starts).value;
      },
      py::arg("mesh"), py::arg("p"), py::arg("iterations") = 200, py::arg("seed") = 0, py::arg("starts") = 4);
  m.def(
      "check_domination",
      [](const py::object& bound, const qcb::TriangleMesh& mesh, std::uint64_t seed) {
        qcb::DominationOptions o;
        o.seed = seed;
        const auto r = py::isinstance<qcb::EigenBound>(bound)
                           ? qcb::check_domination(bound.cast<qcb::EigenBound>(), mesh, o)
                           : qcb::check_domination(bound.cast<qcb::PoincareBound>(), mesh, o);
        return to_py(qcb::to_json(r));
      },
      py::arg("bound"), py::arg("mesh"), py::arg("seed") = 0);

  // command pipeline
  m.def(
      "run",
      [](const std::string& command, const py::dict& config, std::optional<double> p, std::optional<int> depth,
         double h, std::uint64_t seed, const std::string& format, const std::string& base_dir) {
        qcb::RunConfig cfg;
        cfg.command = qcb::parse_command(command);
        cfg.config = from_py(config);
        cfg.p = p;
        cfg.depth = depth;
        cfg.h = h;
        cfg.seed = seed;
        cfg.format = qcb::parse_format(format);
        cfg.base_dir = base_dir;
        const auto out = qcb::run(cfg);
        const std::string text = out.exit_code == 1 ? std::string() : qcb::emit_table(out.reports, cfg.format);
        return py::make_tuple(out.exit_code, text, out.error);
      },
      py::arg("command"), py::arg("config"), py::arg("p") = std::nullopt, py::arg("depth") = std::nullopt,
      py::arg("h") = 0.05, py::arg("seed") = 0, py::arg("format") = "json", py::arg("base_dir") = ".",
      "Runs one command; returns (exit_code, report_text, error_message).");
}

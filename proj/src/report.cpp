#include "qcbound/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json_io.hpp"
#include "qcbound/error.hpp"
#include "qcbound/poincare.hpp"

namespace qcb {

using json = nlohmann::json;

namespace {

constexpr double kDefaultP = 2.0;
constexpr int kDefaultSnowflakeDepth = 12;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const RunConfig& cfg, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(cfg.base_dir) / p).string();
}

double number(const json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing key \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number()) throw InputError(std::string("key \"") + key + "\" must be a number");
  return v.get<double>();
}

double number_or(const json& j, const char* key, double def) { return j.contains(key) ? number(j, key) : def; }

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double resolve_p(const RunConfig& cfg) {
  const double p = cfg.p.value_or(number_or(cfg.config, "p", kDefaultP));
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("p must satisfy 1 < p < inf");
  return p;
}

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("expected a 2D point [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

RectangleShape rect(const json& j) {
  if (!j.is_array() || j.size() != 4) throw InputError("rectangle must be [x0, y0, x1, y1]");
  RectangleShape r{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
  if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw InputError("rectangle must have x1 > x0 and y1 > y0");
  return r;
}

json terms_json(const std::vector<CertificateTerm>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back(to_json(t));
  return a;
}

std::vector<CertificateTerm> terms_from_json(const json& j) {
  std::vector<CertificateTerm> out;
  if (!j.is_array()) return out;
  for (const auto& t : j) {
    out.push_back({t.value("label", std::string()), t.value("formula", std::string()), number(t, "value")});
  }
  return out;
}

std::optional<double> optional_volume(const json& j) {
  if (j.contains("volume") && j.at("volume").is_number()) return j.at("volume").get<double>();
  return std::nullopt;
}

bool is_axis_rectangle(const ConvexCell& c) {
  if (c.dim() != 2 || c.polygon().size() != 4) return false;
  const auto [lo, hi] = c.bounding_box();
  const double box = (hi.x() - lo.x()) * (hi.y() - lo.y());
  return std::abs(box - c.volume()) <= 1e-12 * box;
}

// Mesh-able description of a union of cells, when one exists.
std::optional<DomainShape> oracle_shape(const std::vector<ConvexCell>& cells) {
  if (cells.empty()) return std::nullopt;
  bool rects = true;
  for (const auto& c : cells) rects = rects && is_axis_rectangle(c);
  if (rects) {
    RectUnionShape u;
    for (const auto& c : cells) {
      const auto [lo, hi] = c.bounding_box();
      u.rects.push_back({lo.x(), lo.y(), hi.x(), hi.y()});
    }
    return u;
  }
  if (cells.size() == 1 && cells[0].dim() == 2) {
    PolygonShape poly;
    for (const auto& v : cells[0].polygon()) poly.vertices.emplace_back(v.x(), v.y());
    const auto c = cells[0].centroid();
    poly.center = Eigen::Vector2d(c.x(), c.y());
    return poly;
  }
  return std::nullopt;
}

DominationOptions oracle_options(const RunConfig& cfg) {
  DominationOptions o;
  o.seed = cfg.seed;
  o.iterations = int(number_or(cfg.config, "oracle_iterations", 200));
  o.starts = int(number_or(cfg.config, "oracle_starts", 4));
  return o;
}

bool oracle_enabled(const RunConfig& cfg) { return cfg.config.value("oracle", true); }

ReportEntry poincare_entry(const std::string& domain, const PoincareBound& b, const std::string& chain) {
  ReportEntry e;
  e.domain = domain;
  e.p = b.p;
  e.quantity = "B_{" + format_number(b.r) + "," + format_number(b.p) + "}";
  e.bound = b.value;
  e.certificate = to_json(b);
  e.formula_chain = chain;
  return e;
}

ReportEntry eigen_entry(const std::string& domain, const EigenBound& b, const std::string& chain) {
  ReportEntry e;
  e.domain = domain;
  e.p = b.p;
  e.quantity = "mu_p lower bound";
  e.bound = b.mu_lower;
  e.certificate = to_json(b);
  e.formula_chain = chain;
  return e;
}

// Whitney triples from [[cell, cell, cell], ...].
std::vector<WhitneyTriple> triples_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("\"triples\" must be a nonempty array");
  std::vector<WhitneyTriple> out;
  for (const auto& t : j) {
    if (!t.is_array() || t.size() != 3) throw InputError("each Whitney triple needs three cells");
    out.push_back(WhitneyTriple::make(cell_from_json(t.at(0)), cell_from_json(t.at(1)), cell_from_json(t.at(2))));
  }
  return out;
}

struct ChainBuild {
  PoincareBound bound;
  std::vector<ConvexCell> cells;
};

ChainBuild build_chain(const json& config, double p) {
  auto triples = triples_from_json(member(config, "triples"));
  std::optional<int> m;
  if (config.contains("multiplicity")) m = int(number(config, "multiplicity"));
  std::vector<PoincareBound> tb;
  std::vector<ConvexCell> cells;
  for (const auto& t : triples) {
    const SpectralParams sp{p, t.q1.dim()};
    tb.push_back(triple_constant(t, convex_cell_constant(t.q1, sp), convex_cell_constant(t.r2, sp),
                                 convex_cell_constant(t.q3, sp), p));
    for (const auto& c : t.cells()) cells.push_back(c);
  }
  const WhitneyChain chain = WhitneyChain::make(std::move(triples), m);
  return {chain_constant(chain, tb, p), std::move(cells)};
}

void attach_oracle(ReportEntry& e, const PoincareBound& b, const std::optional<DomainShape>& shape,
                   const RunConfig& cfg) {
  if (!shape || !oracle_enabled(cfg)) return;
  e.oracle = check_domination(b, mesh_domain(*shape, cfg.h), oracle_options(cfg));
}

void attach_oracle(ReportEntry& e, const EigenBound& b, const std::optional<DomainShape>& shape,
                   const RunConfig& cfg) {
  if (!shape || !oracle_enabled(cfg)) return;
  e.oracle = check_domination(b, mesh_domain(*shape, cfg.h), oracle_options(cfg));
}

BoundReport run_bound_cells(const RunConfig& cfg) {
  const json& c = cfg.config;
  const double p = resolve_p(cfg);
  const std::string name = c.value("name", std::string("cells"));
  std::string mode;
  if (c.contains("mode")) {
    mode = c.at("mode").get<std::string>();
  } else if (c.contains("triples")) {
    mode = "chain";
  } else {
    const auto k = member(c, "cells").size();
    mode = k == 1 ? "cell" : k == 2 ? "pair" : k == 3 ? "triple" : "";
    if (mode.empty()) throw InputError("cannot infer mode from the number of cells");
  }

  std::vector<ConvexCell> cells;
  PoincareBound b;
  std::string chain;
  if (mode == "chain") {
    auto built = build_chain(c, p);
    b = std::move(built.bound);
    cells = std::move(built.cells);
    chain = "convex-diameter>whitney-triple>chain-sum";
  } else {
    for (const auto& cj : member(c, "cells")) cells.push_back(cell_from_json(cj));
    const SpectralParams sp{p, cells.at(0).dim()};
    auto need = [&](std::size_t k) {
      if (cells.size() != k) throw InputError("mode " + mode + " needs " + std::to_string(k) + " cells");
    };
    if (mode == "cell") {
      need(1);
      b = convex_cell_constant(cells[0], sp);
      chain = "convex-diameter";
    } else if (mode == "pair") {
      need(2);
      b = pair_constant(cells[0], cells[1], intersection_volume(cells[0], cells[1]),
                        convex_cell_constant(cells[0], sp), convex_cell_constant(cells[1], sp), p);
      chain = "convex-diameter>two-cell-union";
    } else if (mode == "triple") {
      need(3);
      const auto t = WhitneyTriple::make(cells[0], cells[1], cells[2]);
      b = triple_constant(t, convex_cell_constant(t.q1, sp), convex_cell_constant(t.r2, sp),
                          convex_cell_constant(t.q3, sp), p);
      chain = "convex-diameter>whitney-triple";
    } else {
      throw InputError("unknown mode \"" + mode + "\"");
    }
  }
  if (c.value("form", std::string("inf-over-constants")) == "deviation-from-mean") {
    b = as_mean_deviation(b);
    chain += ">subset-average";
  }
  BoundReport rep;
  rep.command = to_string(cfg.command);
  ReportEntry e = poincare_entry(name, b, chain);
  const auto shape = oracle_shape(cells);
  attach_oracle(e, b, shape, cfg);
  if (!shape) rep.notes.push_back(name + ": no oracle for this cell geometry");
  rep.entries.push_back(std::move(e));
  return rep;
}

BoundReport run_bound_snowflake(const RunConfig& cfg) {
  const json& c = cfg.config;
  const double p = resolve_p(cfg);
  FractalTreeSpec spec;
  spec.a = number_or(c, "a", 1.0);
  spec.depth = cfg.depth.value_or(int(number_or(c, "depth", kDefaultSnowflakeDepth)));
  spec.overlap_fraction = number_or(c, "overlap_fraction", spec.overlap_fraction);
  spec.materialize_depth = int(number_or(c, "materialize_depth", std::min(spec.depth, 4)));
  spec.fractal_limit = c.value("fractal_limit", true);
  if (spec.depth < 0) throw InputError("depth must be non-negative");
  const std::string name = c.value("name", std::string("snowflake"));

  const FractalTree tree = build_snowflake_tree(spec);
  const auto cb = snowflake_cell_bounds(tree, p);
  const PoincareBound tb = tree_constant(tree, cb, p);

  BoundReport rep;
  rep.command = to_string(cfg.command);
  rep.entries.push_back(poincare_entry(name, tb, "convex-diameter>tree-sum"));

  const SnowflakeSeries s = snowflake_series(spec, p, spec.depth);
  ReportEntry se;
  se.domain = name + "-level-sum";
  se.p = p;
  se.quantity = "level series";
  se.bound = s.total();
  json cert;
  cert["kind"] = "series";
  cert["p"] = p;
  cert["a"] = spec.a;
  cert["depth"] = spec.depth;
  cert["level_terms"] = s.level_terms;
  cert["finite_part"] = s.finite_part;
  cert["tail"] = s.tail;
  cert["total"] = s.total();
  cert["relative_tail"] = s.tail / s.total();
  cert["formula"] = "level-series";
  se.certificate = std::move(cert);
  se.formula_chain = "convex-diameter>level-series>ratio-tail";
  rep.entries.push_back(std::move(se));
  rep.notes.push_back(name + ": fractal domain, no mesh oracle");
  return rep;
}

BoundReport run_bound_star(const RunConfig& cfg) {
  const json& c = cfg.config;
  const double p = resolve_p(cfg);
  StarDomainSpec spec;
  spec.delta = number_or(c, "delta", 1.0);
  spec.n = int(number_or(c, "n", 2));
  spec.polygon_sides = int(number_or(c, "polygon_sides", spec.polygon_sides));
  const std::string name = c.value("name", std::string("star"));
  const StarDomain sd = build_star_domain(spec);
  const SpectralParams sp{p, spec.n};

  BoundReport rep;
  rep.command = to_string(cfg.command);
  const PoincareBound b = pair_constant(sd.omega1, sd.omega2, intersection_volume(sd.omega1, sd.omega2),
                                        convex_cell_constant(sd.omega1, sp), convex_cell_constant(sd.omega2, sp), p);
  ReportEntry e = poincare_entry(name, b, "convex-diameter>two-cell-union");
  if (spec.n == 2) {
    PolygonShape poly{star_union_polygon(spec.delta), Eigen::Vector2d::Zero()};
    attach_oracle(e, b, DomainShape(poly), cfg);
  } else {
    rep.notes.push_back(name + ": no 3D oracle");
    if (sd.discretization_error > 0) {
      e.certificate["discretization_error"] = sd.discretization_error;
    }
  }
  rep.entries.push_back(std::move(e));

  if (spec.n == 3) {
    if (p > 3.0) {
      const EigenBound ball = ball_lower_bound(3, p);
      const EigenBound ex = example_c(spec.delta, p, ball);
      rep.entries.push_back(eigen_entry(name + "-qc-image", ex, "generalized-pi>ball-lower-bound>lipschitz-transfer"));
    } else {
      rep.notes.push_back(name + ": quasiconformal route needs p > 3");
    }
  }
  return rep;
}

std::optional<double> config_volume(const json& c) {
  if (c.contains("volume")) return number(c, "volume");
  if (c.contains("domain")) return shape_area(shape_from_json(c.at("domain")));
  if (c.contains("base") && c.at("base").contains("cell")) return cell_from_json(c.at("base").at("cell")).volume();
  return std::nullopt;
}

std::optional<DomainShape> image_shape(const json& c) {
  if (!c.contains("image_domain")) return std::nullopt;
  return shape_from_json(c.at("image_domain"));
}

EigenBound base_mu_from_json(const json& b, double p) {
  if (b.contains("mu")) {
    EigenBound e;
    e.p = p;
    e.mu_lower = number(b, "mu");
    if (!(e.mu_lower > 0.0)) throw InputError("base mu must be positive");
    e.provenance.push_back({"mu_p(Omega)", "given", e.mu_lower});
    return e;
  }
  if (b.contains("ball")) {
    const std::string branch = b.value("branch", std::string("auto"));
    const BallBranch br = branch == "exact" ? BallBranch::exact : branch == "ent" ? BallBranch::ent : BallBranch::automatic;
    return ball_lower_bound(int(number_or(b.at("ball"), "n", 2)), p, br);
  }
  if (b.contains("cell")) {
    const ConvexCell cell = cell_from_json(b.at("cell"));
    const PoincareBound cb = convex_cell_constant(cell, {p, cell.dim()});
    EigenBound e;
    e.p = p;
    e.mu_lower = std::pow(cb.value, -p);
    e.provenance.push_back({"B_pp(cell)", "convex-diameter", cb.value});
    e.provenance.push_back({"mu_p(cell)", "B^{-p}", e.mu_lower});
    e.domain_volume = cell.volume();
    return e;
  }
  if (b.contains("certificate")) return eigen_from_json(b.at("certificate"));
  throw InputError("base must give \"mu\", \"ball\", \"cell\" or \"certificate\"");
}

PoincareBound base_constant_from_json(const json& b, double p) {
  if (b.contains("bound")) {
    PoincareBound pb;
    pb.value = number(b, "bound");
    pb.p = number(b, "q");
    pb.r = number(b, "r");
    pb.terms.push_back({"B_{r,q}(Omega)", "given", std::pow(pb.value, pb.p)});
    pb.domain_volume = optional_volume(b);
    return pb;
  }
  if (b.contains("cell")) {
    const ConvexCell cell = cell_from_json(b.at("cell"));
    return convex_cell_constant(cell, {number_or(b, "q", p), cell.dim()});
  }
  if (b.contains("certificate")) return poincare_from_json(b.at("certificate"));
  throw InputError("base must give \"bound\" (with \"r\" and \"q\"), \"cell\" or \"certificate\"");
}

BoundReport run_transfer(const RunConfig& cfg) {
  const json& c = cfg.config;
  const double p = resolve_p(cfg);
  const std::string mode = c.value("mode", std::string("lipschitz"));
  const std::string name = c.value("name", std::string("transfer"));
  BoundReport rep;
  rep.command = to_string(cfg.command);
  const auto image = image_shape(c);

  if (mode == "whitney") {
    auto built = build_chain(c, p);
    const QCMapData map = map_from_json(member(c, "map"), union_volume(built.cells));
    const EigenBound e = whitney_qc_bound(built.bound, map, p);
    ReportEntry entry = eigen_entry(name, e, "convex-diameter>whitney-triple>chain-sum>lipschitz-transfer");
    attach_oracle(entry, e, image, cfg);
    rep.entries.push_back(std::move(entry));
    return rep;
  }

  const QCMapData map = map_from_json(member(c, "map"), config_volume(c));
  const json& base = member(c, "base");
  if (mode == "lipschitz") {
    const EigenBound e = eigen_transfer_lipschitz(map, base_mu_from_json(base, p), p);
    ReportEntry entry = eigen_entry(name, e, "lipschitz-transfer");
    attach_oracle(entry, e, image, cfg);
    rep.entries.push_back(std::move(entry));
  } else if (mode == "eigen") {
    const EigenBound e = eigen_transfer(map, base_constant_from_json(base, p), p);
    ReportEntry entry = eigen_entry(name, e, "holder-composition>q-grid-min");
    attach_oracle(entry, e, image, cfg);
    rep.entries.push_back(std::move(entry));
  } else if (mode == "poincare") {
    const TransferResult t = poincare_transfer(map, base_constant_from_json(base, p), p);
    ReportEntry entry;
    entry.domain = name;
    entry.p = p;
    entry.quantity = "B_{" + format_number(t.s) + "," + format_number(p) + "}";
    entry.bound = t.bound;
    entry.certificate = to_json(t);
    entry.formula_chain = "holder-composition>q-grid-min";
    if (image && oracle_enabled(cfg) && t.s == p) {
      PoincareBound pb;
      pb.value = t.bound;
      pb.p = p;
      pb.r = t.s;
      entry.oracle = check_domination(pb, mesh_domain(*image, cfg.h), oracle_options(cfg));
    } else if (image) {
      rep.notes.push_back(name + ": oracle needs s = p");
    }
    rep.entries.push_back(std::move(entry));
  } else {
    throw InputError("unknown transfer mode \"" + mode + "\"");
  }
  return rep;
}

void collect_certificates(const json& doc, std::vector<std::pair<std::string, json>>& out, const std::string& domain) {
  if (doc.is_object() && doc.contains("reports")) {
    for (const auto& r : doc.at("reports")) {
      for (const auto& e : r.at("entries")) collect_certificates(e.at("certificate"), out, e.value("domain", domain));
    }
    return;
  }
  if (doc.is_array()) {
    for (const auto& d : doc) collect_certificates(d, out, domain);
    return;
  }
  const std::string kind = doc.value("kind", std::string());
  if (kind == "poincare" || kind == "eigen") out.emplace_back(domain, doc);
}

BoundReport run_verify(const RunConfig& cfg) {
  const json& c = cfg.config;
  json doc;
  if (c.contains("certificate")) {
    doc = c.at("certificate");
  } else {
    const std::string path = resolve(cfg, member(c, "certificate_file").get<std::string>());
    doc = detail::parse_json(read_file(path), path);
  }
  const std::string name = c.value("name", std::string("verify"));
  std::vector<std::pair<std::string, json>> certs;
  collect_certificates(doc, certs, name);
  if (certs.empty()) throw InputError("no Poincare or eigenvalue certificate to verify");
  const DomainShape shape = shape_from_json(member(c, "domain"));
  const TriangleMesh mesh = mesh_domain(shape, cfg.h);

  BoundReport rep;
  rep.command = to_string(cfg.command);
  for (const auto& [domain, cert] : certs) {
    const std::string label = c.contains("name") ? name : domain;
    if (cert.at("kind") == "poincare") {
      const PoincareBound b = poincare_from_json(cert);
      ReportEntry e = poincare_entry(label, b, "verify");
      e.oracle = check_domination(b, mesh, oracle_options(cfg));
      if (!b.terms.empty() && std::abs(b.term_sum() - std::pow(b.value, b.p)) > 1e-9 * b.term_sum()) {
        e.oracle->flags.push_back("certificate terms do not reproduce the bound");
      }
      rep.entries.push_back(std::move(e));
    } else {
      const EigenBound b = eigen_from_json(cert);
      ReportEntry e = eigen_entry(label, b, "verify");
      e.oracle = check_domination(b, mesh, oracle_options(cfg));
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

std::vector<BoundReport> dispatch(const RunConfig& cfg);

std::vector<BoundReport> run_report(const RunConfig& cfg) {
  const json& runs = member(cfg.config, "runs");
  if (!runs.is_array() || runs.empty()) throw InputError("\"runs\" must be a nonempty array");
  std::vector<BoundReport> out;
  std::size_t k = 0;
  for (const auto& r : runs) {
    ++k;
    RunConfig sub = cfg;
    sub.command = parse_command(member(r, "command").get<std::string>());
    if (sub.command == Command::report) throw InputError("nested report runs are not supported");
    if (r.contains("config")) {
      sub.config = r.at("config");
    } else {
      const std::string path = resolve(cfg, member(r, "config_file").get<std::string>());
      sub.config = detail::parse_json(read_file(path), path);
      sub.base_dir = std::filesystem::path(path).parent_path().string();
    }
    try {
      for (auto& rep : dispatch(sub)) out.push_back(std::move(rep));
    } catch (const Error& e) {
      throw InputError("run " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

std::vector<BoundReport> dispatch(const RunConfig& cfg) {
  if (!cfg.config.is_object()) throw InputError("config must be a JSON object");
  switch (cfg.command) {
    case Command::bound_cells:
      return {run_bound_cells(cfg)};
    case Command::bound_snowflake:
      return {run_bound_snowflake(cfg)};
    case Command::bound_star:
      return {run_bound_star(cfg)};
    case Command::transfer:
      return {run_transfer(cfg)};
    case Command::verify:
      return {run_verify(cfg)};
    case Command::report:
      return run_report(cfg);
  }
  throw InputError("unknown command");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "bound-cells") return Command::bound_cells;
  if (name == "bound-snowflake") return Command::bound_snowflake;
  if (name == "bound-star") return Command::bound_star;
  if (name == "transfer") return Command::transfer;
  if (name == "verify") return Command::verify;
  if (name == "report") return Command::report;
  throw InputError("unknown command \"" + name + "\"");
}

const char* to_string(Command c) {
  switch (c) {
    case Command::bound_cells:
      return "bound-cells";
    case Command::bound_snowflake:
      return "bound-snowflake";
    case Command::bound_star:
      return "bound-star";
    case Command::transfer:
      return "transfer";
    case Command::verify:
      return "verify";
    case Command::report:
      return "report";
  }
  return "unknown";
}

OutputFormat parse_format(const std::string& name) {
  if (name == "json") return OutputFormat::json;
  if (name == "csv") return OutputFormat::csv;
  throw InputError("format must be json or csv");
}

void RunConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("mesh size h must be positive");
  if (p && (!(*p > 1.0) || !std::isfinite(*p))) throw InputError("p must satisfy 1 < p < inf");
  if (depth && *depth < 0) throw InputError("depth must be non-negative");
}

RunConfig load_run_config(Command command, const std::string& path) {
  RunConfig cfg;
  cfg.command = command;
  cfg.config = detail::parse_json(read_file(path), path);
  cfg.base_dir = std::filesystem::path(path).parent_path().string();
  if (cfg.base_dir.empty()) cfg.base_dir = ".";
  return cfg;
}

bool BoundReport::any_fail() const {
  for (const auto& e : entries) {
    if (e.oracle && !e.oracle->pass) return true;
  }
  return false;
}

RunOutcome run(const RunConfig& config) {
  RunOutcome out;
  try {
    config.validate();
    out.reports = dispatch(config);
    bool fail = false;
    for (const auto& r : out.reports) fail = fail || r.any_fail();
    out.exit_code = fail ? 2 : 0;
  } catch (const Error& e) {
    out.reports.clear();
    out.exit_code = 1;
    out.error = e.what();
  } catch (const json::exception& e) {
    out.reports.clear();
    out.exit_code = 1;
    out.error = std::string("config: ") + e.what();
  }
  return out;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string emit_table(const std::vector<BoundReport>& reports, OutputFormat format) {
  if (format == OutputFormat::csv) {
    std::string out = "domain,p,bound,oracle_value,margin,formula_chain\n";
    for (const auto& r : reports) {
      for (const auto& e : r.entries) {
        out += csv_field(e.domain) + "," + format_number(e.p) + "," + format_number(e.bound) + ",";
        if (e.oracle) out += format_number(e.oracle->oracle_value) + "," + format_number(e.oracle->margin);
        else out += ",";
        out += "," + csv_field(e.formula_chain) + "\n";
      }
    }
    return out;
  }
  json doc;
  doc["tool"] = "qcbound";
  doc["version"] = kToolVersion;
  bool fail = false;
  json arr = json::array();
  for (const auto& r : reports) {
    fail = fail || r.any_fail();
    json jr;
    jr["command"] = r.command;
    jr["notes"] = r.notes;
    jr["entries"] = json::array();
    for (const auto& e : r.entries) {
      json je;
      je["domain"] = e.domain;
      je["p"] = e.p;
      je["quantity"] = e.quantity;
      je["bound"] = e.bound;
      je["formula_chain"] = e.formula_chain;
      je["certificate"] = e.certificate;
      je["oracle"] = e.oracle ? to_json(*e.oracle) : json(nullptr);
      jr["entries"].push_back(std::move(je));
    }
    arr.push_back(std::move(jr));
  }
  doc["reports"] = std::move(arr);
  doc["status"] = fail ? "FAIL" : "PASS";
  return doc.dump(2) + "\n";
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("write to " + path + " failed");
}

json to_json(const CertificateTerm& t) { return {{"label", t.label}, {"formula", t.formula}, {"value", t.value}}; }

json to_json(const PoincareBound& b) {
  json j;
  j["kind"] = "poincare";
  j["bound"] = b.value;
  j["p"] = b.p;
  j["r"] = b.r;
  j["form"] = to_string(b.form);
  j["terms"] = terms_json(b.terms);
  j["multiplicity"] = b.multiplicity;
  j["details"] = terms_json(b.details);
  j["flags"] = b.flags;
  j["volume"] = b.domain_volume ? json(*b.domain_volume) : json(nullptr);
  return j;
}

json to_json(const EigenBound& b) {
  json j;
  j["kind"] = "eigen";
  j["mu_lower"] = b.mu_lower;
  j["p"] = b.p;
  j["provenance"] = terms_json(b.provenance);
  j["flags"] = b.flags;
  j["volume"] = b.domain_volume ? json(*b.domain_volume) : json(nullptr);
  return j;
}

json to_json(const TransferResult& t) {
  json j;
  j["kind"] = "transfer";
  j["bound"] = t.bound;
  j["s"] = t.s;
  j["q_star"] = t.q_star;
  j["chain"] = json::array();
  for (const auto& f : t.chain) {
    json inputs = json::array();
    for (const auto& [k, v] : f.inputs) inputs.push_back({{"name", k}, {"value", v}});
    j["chain"].push_back({{"formula", f.formula}, {"inputs", inputs}, {"value", f.value}});
  }
  j["flags"] = t.flags;
  return j;
}

json to_json(const DominationReport& r) {
  return {{"pass", r.pass},
          {"bound_value", r.bound_value},
          {"oracle_value", r.oracle_value},
          {"margin", r.margin},
          {"method", r.method},
          {"flags", r.flags}};
}

PoincareBound poincare_from_json(const json& j) {
  if (j.value("kind", std::string("poincare")) != "poincare") throw InputError("certificate is not a Poincare bound");
  PoincareBound b;
  b.value = number(j, "bound");
  b.p = number(j, "p");
  b.r = number_or(j, "r", b.p);
  const std::string form = j.value("form", std::string("inf-over-constants"));
  if (form == "deviation-from-mean") b.form = BoundForm::deviation_from_mean;
  else if (form != "inf-over-constants") throw InputError("unknown bound form \"" + form + "\"");
  if (j.contains("terms")) b.terms = terms_from_json(j.at("terms"));
  if (j.contains("details")) b.details = terms_from_json(j.at("details"));
  if (j.contains("flags")) b.flags = j.at("flags").get<std::vector<std::string>>();
  b.multiplicity = int(number_or(j, "multiplicity", 1));
  b.domain_volume = optional_volume(j);
  if (!(b.value > 0.0) || !std::isfinite(b.value)) throw InputError("bound must be positive and finite");
  return b;
}

EigenBound eigen_from_json(const json& j) {
  if (j.value("kind", std::string("eigen")) != "eigen") throw InputError("certificate is not an eigenvalue bound");
  EigenBound b;
  b.mu_lower = number(j, "mu_lower");
  b.p = number(j, "p");
  if (j.contains("provenance")) b.provenance = terms_from_json(j.at("provenance"));
  if (j.contains("flags")) b.flags = j.at("flags").get<std::vector<std::string>>();
  b.domain_volume = optional_volume(j);
  if (!(b.mu_lower > 0.0) || !std::isfinite(b.mu_lower)) throw InputError("mu_lower must be positive and finite");
  return b;
}

DomainShape shape_from_json(const json& j) {
  const std::string kind = member(j, "kind").get<std::string>();
  if (kind == "rectangle") return rect(member(j, "rect"));
  if (kind == "rect_union") {
    RectUnionShape u;
    for (const auto& r : member(j, "rects")) u.rects.push_back(rect(r));
    if (u.rects.empty()) throw InputError("rect_union needs at least one rectangle");
    return u;
  }
  if (kind == "polygon") {
    PolygonShape poly;
    for (const auto& v : member(j, "vertices")) poly.vertices.push_back(vec2(v));
    if (j.contains("center")) poly.center = vec2(j.at("center"));
    return poly;
  }
  if (kind == "disk") {
    DiskShape d;
    if (j.contains("center")) {
      const auto c = vec2(j.at("center"));
      d.cx = c.x();
      d.cy = c.y();
    }
    d.radius = number_or(j, "radius", 1.0);
    return d;
  }
  if (kind == "star") {
    return PolygonShape{star_union_polygon(number_or(j, "delta", 1.0)), Eigen::Vector2d::Zero()};
  }
  throw InputError("unknown domain kind \"" + kind + "\"");
}

ConvexCell cell_from_json(const json& j) {
  if (j.contains("rect")) {
    const auto r = rect(j.at("rect"));
    return ConvexCell::rectangle(r.x0, r.y0, r.x1, r.y1);
  }
  if (j.contains("vertices")) return ConvexCell::from_coordinates(j.at("vertices").get<std::vector<std::vector<double>>>());
  throw InputError("cell must give \"rect\" or \"vertices\"");
}

QCMapData map_from_json(const json& j, std::optional<double> default_volume) {
  const std::string kind = member(j, "kind").get<std::string>();
  std::optional<double> K;
  if (j.contains("K")) K = number(j, "K");
  std::optional<double> vol = j.contains("volume") ? std::optional<double>(number(j, "volume")) : default_volume;
  double alpha = std::numeric_limits<double>::infinity();
  if (j.contains("alpha") && j.at("alpha").is_number()) alpha = j.at("alpha").get<double>();
  const bool lipschitz = j.value("lipschitz", true);
  auto need_volume = [&]() {
    if (!vol) throw InputError("map needs a domain volume (\"volume\" or a \"domain\")");
    return *vol;
  };
  QCMapData m;
  if (kind == "linear") {
    const auto rows = member(j, "matrix").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd A(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw InputError("map matrix must be square");
      for (std::size_t c = 0; c < rows.size(); ++c) A(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    }
    m = QCMapData::linear(A, need_volume(), K);
  } else if (kind == "identity") {
    m = QCMapData::identity(int(number_or(j, "n", 2)), need_volume());
  } else if (kind == "closed") {
    m.n = int(number_or(j, "n", 2));
    m.domain_volume = need_volume();
    const double L = number(j, "norm");
    const double J = number(j, "jacobian");
    m.derivative = ClosedFormDerivative{L, J};
    m.K = K.value_or(std::max(1.0, std::pow(L, m.n) / J));
  } else if (kind == "sampled") {
    SampledDerivative d;
    d.weights = member(j, "weights").get<std::vector<double>>();
    d.dphi = member(j, "dphi").get<std::vector<double>>();
    d.jac = member(j, "jac").get<std::vector<double>>();
    if (j.contains("nodes")) d.nodes = j.at("nodes").get<std::vector<std::vector<double>>>();
    m = QCMapData::sampled(int(number_or(j, "n", 2)), std::move(d), K, alpha, lipschitz);
    return m;
  } else {
    throw InputError("unknown map kind \"" + kind + "\"");
  }
  m.alpha = alpha;
  m.lipschitz = lipschitz;
  m.validate();
  return m;
}

}  // namespace qcb

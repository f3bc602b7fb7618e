#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcbound/certificate.hpp"
#include "qcbound/geometry.hpp"
#include "qcbound/oracle.hpp"
#include "qcbound/qc_transfer.hpp"

namespace qcb {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Command { bound_cells, bound_snowflake, bound_star, transfer, verify, report };
enum class OutputFormat { json, csv };

Command parse_command(const std::string& name);
const char* to_string(Command c);
OutputFormat parse_format(const std::string& name);

struct RunConfig {
  Command command = Command::bound_cells;
  /// Directory against which relative paths inside the config resolve.
  std::string base_dir = ".";
  nlohmann::json config = nlohmann::json::object();
  std::optional<double> p;
  std::optional<int> depth;
  double h = 0.05;
  std::uint64_t seed = 0;
  OutputFormat format = OutputFormat::json;
  std::string out_path;  // empty: standard output

  /// Throws InputError unless h > 0 and p (when given) exceeds 1.
  void validate() const;
};

/// Reads a JSON config file; syntax errors carry line and column.
RunConfig load_run_config(Command command, const std::string& path);

struct ReportEntry {
  std::string domain;
  double p = 2.0;
  std::string quantity;  // "B_{r,p}", "mu_p lower bound", ...
  double bound = 0.0;
  nlohmann::json certificate;
  std::optional<DominationReport> oracle;
  std::string formula_chain;
};

struct BoundReport {
  std::string command;
  std::vector<ReportEntry> entries;
  std::vector<std::string> notes;

  bool any_fail() const;
};

struct RunOutcome {
  std::vector<BoundReport> reports;
  int exit_code = 0;  // 0 ok, 1 input error, 2 domination FAIL
  std::string error;
};

/// Runs one command. Input errors are caught and reported through
/// exit_code 1; a failed domination check gives exit_code 2.
RunOutcome run(const RunConfig& config);

/// Report document (JSON) or table (CSV: domain, p, bound, oracle_value,
/// margin, formula_chain; one row per entry in input order).
std::string emit_table(const std::vector<BoundReport>& reports, OutputFormat format);

/// Writes text to `path`, or to standard output when empty.
void write_output(const std::string& text, const std::string& path);

nlohmann::json to_json(const CertificateTerm& t);
nlohmann::json to_json(const PoincareBound& b);
nlohmann::json to_json(const EigenBound& b);
nlohmann::json to_json(const TransferResult& t);
nlohmann::json to_json(const DominationReport& r);

PoincareBound poincare_from_json(const nlohmann::json& j);
EigenBound eigen_from_json(const nlohmann::json& j);

/// Shapes: {"kind":"rectangle","rect":[x0,y0,x1,y1]}, {"kind":"rect_union","rects":[...]},
/// {"kind":"polygon","vertices":[[x,y],...],"center":[x,y]}, {"kind":"disk","center":[x,y],"radius":r},
/// {"kind":"star","delta":d}.
DomainShape shape_from_json(const nlohmann::json& j);
/// Cells: {"rect":[x0,y0,x1,y1]} or {"vertices":[[...],...]} (2D or 3D).
ConvexCell cell_from_json(const nlohmann::json& j);

/// Maps: {"kind":"linear","matrix":[[...]]}, {"kind":"identity","n":2},
/// {"kind":"closed","n":3,"norm":L,"jacobian":J},
/// {"kind":"sampled","n":2,"weights":[...],"dphi":[...],"jac":[...],"nodes":[...]},
/// each with optional "K", "volume", "alpha" (number or "inf") and "lipschitz".
/// `default_volume` is used when the map carries no "volume".
QCMapData map_from_json(const nlohmann::json& j, std::optional<double> default_volume);

/// Formats with 17 significant digits.
std::string format_number(double x);

}  // namespace qcb

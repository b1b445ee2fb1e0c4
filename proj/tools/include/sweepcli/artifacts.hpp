#pragma once

// Certificates, reports and trajectories on disk.

#include <string>

#include <nlohmann/json.hpp>

#include "sweep/pmp.hpp"

namespace sweepcli {

/// Certificate document:
///   {schema_version, grid:{T,N}, x:[[..]]xn, u:[[..]]xm, p:[[..]]xn,
///    p_jumps:[{t,dp}], nu:[{density:[..], atoms:[{t,w}]}]xr, xi:[[..]]xr, lambda}
/// Matrices are stored one row per component, N+1 entries each.
nlohmann::json certificate_to_json(const sweep::PmpCertificate& c);
/// Throws SchemaError, including for shape mismatches.
sweep::PmpCertificate certificate_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const sweep::ResidualReport& r);

/// Columns t, x1..xn, xi1..xir, u1..um (u of the cell starting at the node).
std::string trajectory_csv(const sweep::Trajectory& tr, const sweep::ControlSignal* u = nullptr);

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
void write_atomic(const std::string& path, const std::string& contents);

/// Pretty JSON with 17 significant digits.
std::string dump(const nlohmann::json& j);

nlohmann::json read_json(const std::string& path);

}  // namespace sweepcli

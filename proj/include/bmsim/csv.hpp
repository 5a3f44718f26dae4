#pragma once

#include "bmsim/sim.hpp"

#include <string>

namespace bmsim {

/// Writes the trajectory as CSV: header
///   t,I_1..I_sigma,V_1..V_rho,u_1..u_nu,dI_1..,dV_1..,S,S_d,supply
/// with 12 significant digits and LF line endings.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

/// Parses a trajectory CSV written by write_trajectory_csv. Dimensions are
/// recovered from the header; event rows and the controller column are not
/// part of the file and stay empty. Throws SchemaMismatch on a malformed or
/// inconsistent header/row.
Trajectory read_trajectory_csv(const std::string& path);

/// Formats one value exactly the way the CSV writer does.
std::string csv_format(Real v);

/// The value that a written-then-parsed field would have; audits run on these
/// so an offline audit of the file reproduces the in-run report exactly.
Real csv_roundtrip(Real v);

}  // namespace bmsim

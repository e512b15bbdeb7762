#pragma once

#include <filesystem>
#include <iosfwd>

#include "dsparse/core.hpp"

namespace dsparse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitAcceptance = 3;

/// Entry point of the dsparse binary. Subcommands: fit, check-conditions,
/// simulate-stochastic, packing, random-design, experiment, report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Exit code for a library error: 2 for numerical failures, 1 otherwise.
int exit_code(ErrorCode code);

/// Dense matrix from text: one row per line, entries split by whitespace or
/// commas, blank lines and '#' comments skipped. Throws MissingArtifact or
/// ParseError (with the line number).
Matrix read_matrix(const std::filesystem::path& path);

/// "%.17g" entries, space separated.
void write_matrix(const std::filesystem::path& path, const Matrix& X);

}  // namespace dsparse::cli

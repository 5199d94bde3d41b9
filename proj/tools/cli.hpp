#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace snfl::cli {

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Aligned table of a sweep directory. Throws snfl::Error on missing files.
std::string render_report(const std::filesystem::path& run_dir);

/// Standalone log-log SVG of one persisted quantity with its fitted line.
std::string render_plot(const std::filesystem::path& run_dir, const std::string& what);

}  // namespace snfl::cli

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "prefcore/core.hpp"

namespace prefcore {

inline constexpr std::string_view kLogFormat = "prefcore-log/1";

// Text log: a version line, a digest line, then one tab-separated record per
// line (t, user, action, feedback, channel, ';'-joined tags). Feedback is
// written with 17 significant digits so values survive a round trip.
void write_log(std::ostream& out, const InteractionLog& log,
               const std::string& digest);
void save_log(const std::filesystem::path& path, const InteractionLog& log,
              const std::string& digest);

struct LoadedLog {
  InteractionLog log;
  std::string digest;
};

LoadedLog read_log(std::istream& in);
LoadedLog load_log(const std::filesystem::path& path);

// Shared helpers for the text artifacts.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);

}  // namespace prefcore

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "prefcore/cf_model.hpp"
#include "prefcore/seq_model.hpp"

namespace prefcore {

inline constexpr std::string_view kModelFormat = "prefcore-model/1";

// A persisted model: exactly one of cf / seq is set. Sequential snapshots
// with knowledge attached are reported as kind "ke".
struct ModelSnapshot {
  std::string digest;
  std::optional<CfModel> cf;
  std::optional<SeqModel> seq;

  std::string kind() const;
};

// Text layout: version line, digest line, kind line, dimension line, then
// "block <name> <rows> <cols>" headers each followed by row-major values in
// %.17g, so parameters round-trip exactly.
void write_snapshot(std::ostream& out, const ModelSnapshot& snapshot);
ModelSnapshot read_snapshot(std::istream& in);

void save_snapshot(const std::filesystem::path& path, const ModelSnapshot& snapshot);
ModelSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace prefcore

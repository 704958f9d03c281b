#include "prefcore/log_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prefcore/error.hpp"

namespace prefcore {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse " + what + " from '" + text + "'");
  }
}

namespace {

template <class Int>
Int parse_int(const std::string& text, const std::string& what) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("cannot parse " + what + " from '" + text + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_log(std::ostream& out, const InteractionLog& log,
               const std::string& digest) {
  out << kLogFormat << '\n' << "digest " << digest << '\n';
  for (const auto& rec : log.records()) {
    out << rec.t << '\t' << raw(rec.user) << '\t' << raw(rec.action) << '\t'
        << format_double(rec.feedback.value) << '\t'
        << channel_name(rec.feedback.channel) << '\t';
    bool first = true;
    for (const auto& tag : rec.context) {
      if (!first) out << ';';
      out << tag;
      first = false;
    }
    out << '\n';
  }
}

void save_log(const std::filesystem::path& path, const InteractionLog& log,
              const std::string& digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_log(out, log, digest);
}

LoadedLog read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kLogFormat) {
    throw DataError("missing '" + std::string(kLogFormat) + "' header");
  }
  LoadedLog loaded;
  if (!std::getline(in, line) || line.rfind("digest ", 0) != 0) {
    throw DataError("missing digest line in log");
  }
  loaded.digest = line.substr(7);
  std::vector<InteractionRecord> records;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 6) {
      throw DataError("log line " + std::to_string(lineno) + ": expected 6 fields, got " +
                      std::to_string(fields.size()));
    }
    InteractionRecord rec;
    rec.t = parse_int<Tick>(fields[0], "timestamp");
    rec.user = user_id(parse_int<std::uint32_t>(fields[1], "user id"));
    rec.action = action_id(parse_int<std::uint32_t>(fields[2], "action id"));
    rec.feedback = Feedback(parse_double(fields[3], "feedback"),
                            parse_channel(fields[4]));
    if (!fields[5].empty()) {
      for (auto& tag : split(fields[5], ';')) {
        if (!tag.empty()) rec.context.insert(tag);
      }
    }
    records.push_back(std::move(rec));
  }
  loaded.log = InteractionLog::from_records(std::move(records));
  return loaded;
}

LoadedLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open log " + path.string());
  return read_log(in);
}

}  // namespace prefcore

#include "cmpbayes/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "cmpbayes/error.hpp"

namespace cmpbayes {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::int64_t parse_count(std::string_view field, std::size_t line_no, std::string_view what) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParseError,
                fmt::format("line {}: {} '{}' is not an integer", line_no, what, field));
  }
  if (value < 0) {
    throw Error(ErrorCode::kParseError, fmt::format("line {}: {} must be nonnegative, got {}", line_no, what, value));
  }
  return value;
}

}  // namespace

std::vector<FrequencyPair> CountDataset::frequencies() const {
  std::map<std::int64_t, std::int64_t> tally;
  for (std::int64_t x : counts) ++tally[x];
  std::vector<FrequencyPair> out;
  out.reserve(tally.size());
  for (const auto& [value, count] : tally) out.push_back({value, count});
  return out;
}

CountDataset parse_dataset(std::string_view text, std::string name) {
  CountDataset ds;
  ds.name = std::move(name);
  std::size_t columns = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (columns == 0) {
      columns = fields.size();
      if (columns > 2) {
        throw Error(ErrorCode::kParseError,
                    fmt::format("line {}: expected 1 or 2 columns, found {}", line_no, columns));
      }
    } else if (fields.size() != columns) {
      throw Error(ErrorCode::kParseError,
                  fmt::format("line {}: expected {} column(s), found {}", line_no, columns, fields.size()));
    }

    if (columns == 1) {
      ds.counts.push_back(parse_count(fields[0], line_no, "count"));
    } else {
      const std::int64_t value = parse_count(fields[0], line_no, "value");
      const std::int64_t count = parse_count(fields[1], line_no, "frequency");
      if (count == 0) {
        throw Error(ErrorCode::kParseError, fmt::format("line {}: frequency must be positive", line_no));
      }
      ds.counts.insert(ds.counts.end(), static_cast<std::size_t>(count), value);
    }
  }
  if (ds.counts.empty()) throw Error(ErrorCode::kEmptyData, fmt::format("dataset '{}' has no counts", ds.name));
  return ds;
}

CountDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open dataset '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_dataset(buffer.str(), path.stem().string());
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::filesystem::path data_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return env;
  return fallback;
}

std::filesystem::path resolve_dataset(std::string_view name_or_path, const std::filesystem::path& data_dir) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  for (const char* ext : {"", ".txt", ".tsv"}) {
    auto candidate = data_dir / (std::string(name_or_path) + ext);
    if (std::filesystem::is_regular_file(candidate)) return candidate;
  }
  throw Error(ErrorCode::kIo, fmt::format("dataset '{}' not found (looked in {})", name_or_path, data_dir.string()));
}

}  // namespace cmpbayes

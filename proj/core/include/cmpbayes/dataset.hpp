#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cmpbayes/stats.hpp"

namespace cmpbayes {

struct FrequencyPair {
  std::int64_t value = 0;
  std::int64_t count = 0;
};

struct CountDataset {
  std::string name;
  std::vector<std::int64_t> counts;

  /// Distinct values in ascending order with their multiplicities.
  std::vector<FrequencyPair> frequencies() const;
  SufficientStats stats() const { return sufficient_stats(counts); }
};

/// Parses either one count per line, or "value<TAB>count" frequency lines
/// (any whitespace separates the columns). Blank lines and lines starting
/// with '#' are skipped. The layout is taken from the first data line and
/// must not change. Errors carry the 1-based line number.
CountDataset parse_dataset(std::string_view text, std::string name = "data");
CountDataset load_dataset(const std::filesystem::path& path);

/// Environment variable naming the directory of bundled datasets.
inline constexpr const char* kDataDirEnv = "CMPBAYES_DATA_DIR";

/// $CMPBAYES_DATA_DIR if set, otherwise fallback.
std::filesystem::path data_directory(const std::filesystem::path& fallback);

/// An existing path is used as is. Otherwise a bare name is looked up in
/// data_dir as <name>, <name>.txt or <name>.tsv.
std::filesystem::path resolve_dataset(std::string_view name_or_path, const std::filesystem::path& data_dir);

}  // namespace cmpbayes

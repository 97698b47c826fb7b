#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wsol/dataset.hpp"
#include "wsol/trainer.hpp"

namespace wsol {

/// Every tunable of a run. Serialized as UTF-8 "key = value" lines with '#'
/// comments; keys are grouped by prefix: synth., train., mask., ablation.,
/// model., eval.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;

  /// Sets one key. Unknown keys and unparsable values throw ConfigError
  /// carrying `line` (0 for command-line overrides).
  void set(std::string_view key, std::string_view value, int line = 0);
  std::string get(std::string_view key) const;
  /// All keys in a stable order.
  static const std::vector<std::string>& keys();

  /// Cross-field consistency (e.g. model classes follow synth.n_classes).
  void finalize();

  /// Effective configuration, one "key = value" line per key.
  std::string to_text() const;
};

RunConfig parse_config(std::istream& in);
/// Throws ConfigError if the file cannot be read.
RunConfig load_config(const std::filesystem::path& path);

/// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Comma-separated ablation names: no-ca, no-fc, no-nonlocal, no-dfg, cls-only.
AblationFlags parse_ablation(std::string_view list);
std::string ablation_name(const AblationFlags& flags);

}  // namespace wsol

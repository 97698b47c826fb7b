#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wsol::cli {

/// Process exit codes. Stable: scripts depend on them.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // I/O or unexpected error
  kBadConfig = 2,     // unreadable config, unknown key, bad value, bad arguments
  kNonFinite = 3,     // training aborted on a NaN/Inf loss
  kBadFile = 4,       // corrupt checkpoint, score map or ground-truth file
  kIdMismatch = 5,    // score maps and ground truth disagree on image ids
};

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::string ablation;
  std::vector<std::string> overrides;  // key=value
};

struct ScoreArgs {
  std::filesystem::path checkpoint;
  std::uint64_t data_seed = 1;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;  // synthetic-data settings
  std::vector<std::string> overrides;
};

struct EvalArgs {
  std::filesystem::path maps;
  std::filesystem::path gt;
  std::string deltas = "0.3,0.5,0.7";
  std::size_t n_thresholds = 100;
  std::optional<std::filesystem::path> out;
};

struct ExportArgs {
  std::filesystem::path map;
  std::filesystem::path out;
};

/// Writes <out>/checkpoint.wsck, <out>/metrics.csv and <out>/config.txt.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
/// Writes <out>/maps/<image_id>.wsm, <out>/predictions.csv and <out>/gt.txt.
int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& err);
/// Prints MaxBoxAccV2; writes the key=value report to args.out when set.
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_export_heatmap(const ExportArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wsol::cli

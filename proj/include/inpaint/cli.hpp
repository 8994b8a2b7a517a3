#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace inpaint {

// Exit statuses of the command entry points.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // I/O, decode or other runtime errors
  kExitUsage = 2,    // invalid configuration or arguments
  kExitAborted = 3,  // training stopped on a non-finite loss
};

// Empty checkpoint paths resolve to default_home() / "model.ckpt".
std::filesystem::path resolve_checkpoint(const std::filesystem::path& checkpoint);

struct TrainArgs {
  std::filesystem::path config;
  // Continue from this checkpoint; the config file then only supplies the
  // dataset location when given.
  std::optional<std::filesystem::path> resume;
};
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct CompleteArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::filesystem::path mask;
  std::filesystem::path out;
};
int cmd_complete(const CompleteArgs& args, std::ostream& out, std::ostream& err);

struct EvaluateArgs {
  std::filesystem::path checkpoint;
  // A training config (its "dataset" object is used) or a bare dataset spec.
  std::filesystem::path config;
  std::string regime = "both";  // center, random or both
  int mask_size = 56;
  std::uint64_t seed = 0;
  // Directory for report.txt / report.csv / report.json; empty:
  // default_home() / "eval".
  std::filesystem::path out_dir;
};
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);

struct ServeArgs {
  std::filesystem::path checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_side = 4096;
};
int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err);

}  // namespace inpaint

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "camvox/calib.hpp"
#include "camvox/preprocessing.hpp"

namespace camvox::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kSuccess = 0,
  kRejected = 2,
  kInputError = 3,
  kInsufficientStructure = 4,
  kInternalError = 1,
};

struct UndistortArgs {
  fs::path cloud;
  fs::path imu;
  std::optional<fs::path> frames;     // frame bounds; whole cloud is one frame when absent
  std::optional<fs::path> reference;  // expected output, for an RMS summary
  fs::path out;
  UndistortOptions options;
};

struct ProjectArgs {
  fs::path cloud;
  fs::path intrinsics;
  fs::path extrinsics;
  std::optional<fs::path> image;  // overlay base; reflectivity when absent
  std::string out_prefix;
  double close_threshold = kDefaultCloseThreshold;
  double overlay_max_depth = 60.0;
};

struct CalibrateArgs {
  fs::path image;
  fs::path cloud;
  fs::path intrinsics;
  fs::path init;
  fs::path out;
  std::optional<fs::path> report;
  std::optional<fs::path> imu;
  std::optional<fs::path> overlay;
  bool assume_stationary = false;
  std::string scene_id;
  MatchConfig match;
  double margin = kDefaultUpdateMargin;
  StationaryConfig stationary;
};

struct SynthArgs {
  fs::path out_dir;
  std::uint64_t seed = 0;
  int frames = 50;
  bool featureless = false;
  std::array<double, 3> init_offset_deg{0.0, 0.0, 2.0};  // roll, pitch, yaw of the emitted init.json
  int moving_frames = 3;
};

/// One line per pipeline stage on stderr: `stage=<name> ms=<elapsed> [key=value ...]`.
void log_stage(const std::string& stage, double ms, const std::string& extra = {});

int cmd_undistort(const UndistortArgs& a);
int cmd_project(const ProjectArgs& a);
int cmd_calibrate(const CalibrateArgs& a);
int cmd_synth(const SynthArgs& a);

}  // namespace camvox::cli

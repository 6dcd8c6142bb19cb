// Demonstration records, featurization and persistence.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"

namespace ftutor {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr const char* kFeatureSchema = "ft8-v1";
inline constexpr std::size_t kFeatureCount = 8;

// Feature layout, in order:
//   0 sin(heading error)        1 cos(heading error)
//   2 altitude error / 100 m    3 airspeed error / 10 m/s
//   4 pitch_att / pitch_limit   5 roll_att / roll_limit
//   6 pitch_rate * dt           7 roll_rate * dt
// Errors are target minus current.
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr double kAltitudeScale = 100.0;
inline constexpr double kAirspeedScale = 10.0;

FeatureVector featurize(const AircraftState& state, const TaskSpec& task,
                        const SimParams& params);

struct Sample {
  FeatureVector features{};
  ControlInput action;
  int trial_id = 0;
  double t = 0.0;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<TaskSpec> tasks;  // indexed by trial_id
  SimParams params;
  int schema_version = kDatasetSchemaVersion;

  std::size_t trial_count() const { return tasks.size(); }
  bool operator==(const Dataset&) const = default;
};

/// Throws Error(Schema) if trial ids are not contiguous or time does not
/// increase within a trial.
void validate(const Dataset& dataset);

std::string serialize(const Dataset& dataset);
Dataset deserialize(const std::string& text);

void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

/// Splits whole trials into (train, validation). Trial ids are renumbered
/// from zero inside each half; each task keeps its seed.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction,
                                  std::uint64_t seed);

/// Runs the expert closed-loop for `n_trials` fresh tasks and records every
/// tick. Recorded (and flown) actions carry seeded Gaussian noise.
Dataset generate_demos(int n_trials, double duration, const ExpertGains& gains,
                       const SimParams& params, std::uint64_t seed);

}  // namespace ftutor

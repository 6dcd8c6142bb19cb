#include "flighttutor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flighttutor/error.hpp"
#include "flighttutor/rng.hpp"
#include "json_io.hpp"

namespace ftutor {

FeatureVector featurize(const AircraftState& state, const TaskSpec& task,
                        const SimParams& params) {
  const double err =
      heading_error(state.heading, task.target_heading) * std::numbers::pi / 180.0;
  return {std::sin(err),
          std::cos(err),
          (task.target_altitude - state.altitude) / kAltitudeScale,
          (task.target_airspeed - state.airspeed) / kAirspeedScale,
          state.pitch_att / params.pitch_limit,
          state.roll_att / params.roll_limit,
          state.pitch_rate * params.dt,
          state.roll_rate * params.dt};
}

void validate(const Dataset& dataset) {
  int prev_trial = -1;
  double prev_t = 0.0;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    if (s.trial_id < 0 ||
        static_cast<std::size_t>(s.trial_id) >= dataset.tasks.size())
      throw Error(ErrorCode::Schema, "sample " + std::to_string(i) +
                                         ": trial id without task metadata");
    if (s.trial_id == prev_trial) {
      if (!(s.t > prev_t))
        throw Error(ErrorCode::Schema, "sample " + std::to_string(i) +
                                           ": time not increasing within trial");
    } else if (s.trial_id != prev_trial + 1) {
      throw Error(ErrorCode::Schema,
                  "sample " + std::to_string(i) + ": trial ids not contiguous");
    }
    for (double f : s.features) {
      if (!std::isfinite(f))
        throw Error(ErrorCode::Schema,
                    "sample " + std::to_string(i) + ": non-finite feature");
    }
    if (!(std::abs(s.action.pitch()) <= 1.0 && std::abs(s.action.roll()) <= 1.0))
      throw Error(ErrorCode::Schema,
                  "sample " + std::to_string(i) + ": action outside [-1, 1]");
    if (!std::isfinite(s.t))
      throw Error(ErrorCode::Schema, "sample " + std::to_string(i) + ": non-finite time");
    prev_trial = s.trial_id;
    prev_t = s.t;
  }
}

namespace {

json header_json(const Dataset& d) {
  return json{{"schema_version", d.schema_version},
              {"feature_schema", kFeatureSchema},
              {"sim", d.params},
              {"tasks", d.tasks}};
}

json sample_json(const Sample& s) {
  return json{{"trial", s.trial_id},
              {"t", s.t},
              {"f", s.features},
              {"yp", s.action.pitch()},
              {"yr", s.action.roll()}};
}

}  // namespace

std::string serialize(const Dataset& dataset) {
  std::string out = header_json(dataset).dump();
  out += '\n';
  for (const Sample& s : dataset.samples) {
    out += sample_json(s).dump();
    out += '\n';
  }
  return out;
}

Dataset deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset d;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const json j = parse_line(line, line_no);
    try {
      if (!have_header) {
        const int version = field<int>(j, "schema_version");
        if (version != kDatasetSchemaVersion)
          throw Error(ErrorCode::Schema,
                      "unsupported dataset schema version " + std::to_string(version));
        if (field<std::string>(j, "feature_schema") != kFeatureSchema)
          throw Error(ErrorCode::Schema, "unsupported feature schema");
        d.schema_version = version;
        d.params = field<SimParams>(j, "sim");
        d.tasks = field<std::vector<TaskSpec>>(j, "tasks");
        have_header = true;
        continue;
      }
      Sample s;
      s.trial_id = field<int>(j, "trial");
      s.t = field<double>(j, "t");
      s.features = field<FeatureVector>(j, "f");
      s.action = ControlInput(field<double>(j, "yp"), field<double>(j, "yr"));
      d.samples.push_back(s);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::Parse, "line 1: missing dataset header");
  validate(d);
  return d;
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << serialize(dataset);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction,
                                  std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "val_fraction must be in [0, 1)");
  const std::size_t n = dataset.trial_count();
  const auto n_val = static_cast<std::size_t>(
      std::floor(val_fraction * static_cast<double>(n) + 1e-9));

  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, SeedStream::Split));
  rng.shuffle(order.begin(), order.end());

  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  Dataset train, val;
  train.params = val.params = dataset.params;
  std::vector<int> remap(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = is_val[i] ? val : train;
    remap[i] = static_cast<int>(dst.tasks.size());
    dst.tasks.push_back(dataset.tasks[i]);
  }
  for (const Sample& s : dataset.samples) {
    Sample copy = s;
    copy.trial_id = remap[s.trial_id];
    (is_val[s.trial_id] ? val : train).samples.push_back(copy);
  }
  return {std::move(train), std::move(val)};
}

Dataset generate_demos(int n_trials, double duration, const ExpertGains& gains,
                       const SimParams& params, std::uint64_t seed) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidArgument, "n_trials must be >= 1");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::InvalidArgument, "duration must be > 0");
  params.validate();
  gains.validate(params);

  const auto ticks = static_cast<long>(std::llround(duration / params.dt));
  Dataset d;
  d.params = params;
  d.samples.reserve(static_cast<std::size_t>(n_trials * ticks));
  for (int trial = 0; trial < n_trials; ++trial) {
    const TaskSpec task = sample_trial_task(seed, SeedStream::Demo,
                                            static_cast<std::uint64_t>(trial),
                                            params, duration);
    d.tasks.push_back(task);
    Rng noise(splitmix64(task.seed ^ 0x6e6f697365ULL));
    AircraftState state = initial_state(task, params);
    for (long k = 0; k < ticks; ++k) {
      const ControlInput clean = expert_policy(state, task, gains, params);
      ControlInput action = clean;
      if (gains.action_noise_std > 0.0) {
        const double np = noise.normal() * gains.action_noise_std;
        const double nr = noise.normal() * gains.action_noise_std;
        action = ControlInput(clean.pitch() + np, clean.roll() + nr);
      }
      d.samples.push_back(Sample{featurize(state, task, params), action, trial, state.t});
      state = step(state, action, params);
    }
  }
  return d;
}

}  // namespace ftutor

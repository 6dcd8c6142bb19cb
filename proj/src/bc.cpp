#include "flighttutor/bc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "flighttutor/error.hpp"
#include "flighttutor/rng.hpp"
#include "json_io.hpp"

namespace ftutor {
namespace {

constexpr const char* kPolicyFormat = "flighttutor-policy";
constexpr int kPolicyVersion = 1;
// tanh rounds to exactly +-1 for |z| > ~19; keep outputs strictly inside.
const double kOutputBound = std::nextafter(1.0, 0.0);

// Activations of every layer for one input; acts[0] is the input.
struct Activations {
  std::vector<std::vector<double>> acts;
};

void check_schema(const Policy& policy) {
  if (policy.feature_schema != kFeatureSchema)
    throw Error(ErrorCode::Schema, "policy feature schema '" + policy.feature_schema +
                                       "' does not match '" + kFeatureSchema + "'");
  if (policy.layer_sizes.empty() ||
      policy.layer_sizes.front() != static_cast<int>(kFeatureCount) ||
      policy.layer_sizes.back() != 2)
    throw Error(ErrorCode::Schema, "policy input/output shape mismatch");
}

void run_forward(const Policy& policy, const FeatureVector& features,
                 Activations& out) {
  out.acts.resize(policy.layers.size() + 1);
  out.acts[0].assign(features.begin(), features.end());
  for (std::size_t l = 0; l < policy.layers.size(); ++l) {
    const DenseLayer& layer = policy.layers[l];
    const std::vector<double>& x = out.acts[l];
    std::vector<double>& y = out.acts[l + 1];
    y.resize(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      const double* w = &layer.weights[static_cast<std::size_t>(o * layer.in)];
      double z = layer.biases[static_cast<std::size_t>(o)];
      for (int i = 0; i < layer.in; ++i) z += w[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = std::tanh(z);
    }
  }
  for (double& v : out.acts.back()) v = std::clamp(v, -kOutputBound, kOutputBound);
}

std::vector<DenseLayer> zero_like(const Policy& policy) {
  std::vector<DenseLayer> g = policy.layers;
  for (DenseLayer& l : g) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
  return g;
}

// Adds the gradient of ||pi(s) - a||^2 for one sample into `grad`.
void accumulate(const Policy& policy, const Sample& sample, Activations& fwd,
                std::vector<double>& delta, std::vector<double>& prev_delta,
                std::vector<DenseLayer>& grad) {
  run_forward(policy, sample.features, fwd);
  const std::vector<double>& y = fwd.acts.back();
  const double target[2] = {sample.action.pitch(), sample.action.roll()};
  delta.resize(2);
  for (std::size_t k = 0; k < 2; ++k)
    delta[k] = 2.0 * (y[k] - target[k]) * (1.0 - y[k] * y[k]);

  for (std::size_t l = policy.layers.size(); l-- > 0;) {
    const DenseLayer& layer = policy.layers[l];
    DenseLayer& g = grad[l];
    const std::vector<double>& x = fwd.acts[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      double* gw = &g.weights[static_cast<std::size_t>(o * layer.in)];
      for (int i = 0; i < layer.in; ++i) gw[i] += d * x[static_cast<std::size_t>(i)];
      g.biases[static_cast<std::size_t>(o)] += d;
    }
    if (l == 0) break;
    prev_delta.assign(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      const double* w = &layer.weights[static_cast<std::size_t>(o * layer.in)];
      for (int i = 0; i < layer.in; ++i) prev_delta[static_cast<std::size_t>(i)] += w[i] * d;
    }
    for (int i = 0; i < layer.in; ++i) {
      const double h = x[static_cast<std::size_t>(i)];
      prev_delta[static_cast<std::size_t>(i)] *= 1.0 - h * h;
    }
    std::swap(delta, prev_delta);
  }
}

double squared_error(const ControlInput& predicted, const ControlInput& expert) {
  const double dp = predicted.pitch() - expert.pitch();
  const double dr = predicted.roll() - expert.roll();
  return dp * dp + dr * dr;
}

double mean_loss(const Policy& policy, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  return bc_loss(policy, samples).mean;
}

}  // namespace

std::size_t Policy::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

Policy make_policy(const std::vector<int>& layer_sizes) {
  if (layer_sizes.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "policy needs at least two layer sizes");
  Policy p;
  p.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1)
      throw Error(ErrorCode::InvalidArgument, "layer sizes must be positive");
    DenseLayer layer;
    layer.in = layer_sizes[l];
    layer.out = layer_sizes[l + 1];
    layer.weights.assign(static_cast<std::size_t>(layer.in * layer.out), 0.0);
    layer.biases.assign(static_cast<std::size_t>(layer.out), 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Policy init_policy(std::uint64_t seed, const std::vector<int>& layer_sizes) {
  Policy p = make_policy(layer_sizes);
  Rng rng(seed);
  for (DenseLayer& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    for (double& b : layer.biases) b = rng.uniform(-bound, bound);
  }
  p.meta.seed = seed;
  return p;
}

ControlInput forward(const Policy& policy, const FeatureVector& features) {
  check_schema(policy);
  Activations a;
  run_forward(policy, features, a);
  return ControlInput(a.acts.back()[0], a.acts.back()[1]);
}

LossValue bc_loss(const Policy& policy, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "bc_loss: empty batch");
  check_schema(policy);
  Activations a;
  LossValue v;
  for (const Sample& s : batch) {
    run_forward(policy, s.features, a);
    v.sum += squared_error(ControlInput(a.acts.back()[0], a.acts.back()[1]), s.action);
  }
  v.mean = v.sum / static_cast<double>(batch.size());
  return v;
}

std::vector<DenseLayer> bc_grad(const Policy& policy, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "bc_grad: empty batch");
  check_schema(policy);
  std::vector<DenseLayer> grad = zero_like(policy);
  Activations fwd;
  std::vector<double> delta, prev;
  for (const Sample& s : batch) accumulate(policy, s, fwd, delta, prev, grad);
  return grad;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size < 1 || max_epochs < 1 ||
      eval_every < 1 || patience < 1)
    throw Error(ErrorCode::InvalidArgument,
                "train config: learning_rate, batch_size, max_epochs, eval_every "
                "and patience must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train.val_fraction must be in [0, 1)");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "train.lr_final_fraction must be in (0, 1]");
}

std::string TrainingCurve::to_table() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch\ttrain_loss\tval_loss\theading_error\n";
  std::size_t e = 0;
  for (const EpochRecord& r : epochs) {
    out << r.epoch << '\t' << r.train_loss << '\t' << r.val_loss << '\t';
    while (e < evals.size() && evals[e].epoch < r.epoch) ++e;
    if (e < evals.size() && evals[e].epoch == r.epoch) out << evals[e].heading_error;
    out << '\n';
  }
  return out.str();
}

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const EvalHook& eval_hook) {
  config.validate();
  if (dataset.samples.empty())
    throw Error(ErrorCode::InvalidArgument, "train: dataset is empty");
  validate(dataset);

  auto [train_set, val_set] = split(dataset, config.val_fraction, config.seed);
  if (train_set.samples.empty())
    throw Error(ErrorCode::InvalidArgument, "train: no training trials after split");

  Policy policy = init_policy(derive_seed(config.seed, SeedStream::Init));
  policy.scales.pitch_limit = dataset.params.pitch_limit;
  policy.scales.roll_limit = dataset.params.roll_limit;
  policy.scales.dt = dataset.params.dt;
  policy.meta.seed = config.seed;

  TrainingCurve curve;
  curve.epochs.push_back({0, mean_loss(policy, train_set.samples),
                          mean_loss(policy, val_set.samples)});

  const std::vector<Sample>& samples = train_set.samples;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, SeedStream::Shuffle));

  std::vector<DenseLayer> grad = zero_like(policy);
  Activations fwd;
  std::vector<double> delta, prev;

  Policy best = policy;
  double best_metric = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;
  int epoch = 0;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double progress =
        static_cast<double>(epoch - 1) / static_cast<double>(config.max_epochs);
    const double lr = config.learning_rate *
                      (1.0 - progress * (1.0 - config.lr_final_fraction));
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      for (DenseLayer& g : grad) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.biases.begin(), g.biases.end(), 0.0);
      }
      for (std::size_t k = start; k < end; ++k)
        accumulate(policy, samples[order[k]], fwd, delta, prev, grad);
      // Mean over the minibatch keeps the step size independent of batch size.
      const double step = lr / static_cast<double>(end - start);
      for (std::size_t l = 0; l < policy.layers.size(); ++l) {
        DenseLayer& p = policy.layers[l];
        const DenseLayer& g = grad[l];
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= step * g.weights[i];
        for (std::size_t i = 0; i < p.biases.size(); ++i) p.biases[i] -= step * g.biases[i];
      }
    }

    const EpochRecord rec{epoch, mean_loss(policy, samples),
                          mean_loss(policy, val_set.samples)};
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw Error(ErrorCode::Diverged,
                  "training diverged at epoch " + std::to_string(epoch) +
                      " (non-finite loss); lower train.learning_rate");
    curve.epochs.push_back(rec);

    if (eval_hook && epoch % config.eval_every == 0) {
      const double metric = eval_hook(policy);
      curve.evals.push_back({epoch, metric});
      if (metric < best_metric) {
        best_metric = metric;
        best = policy;
        best_epoch = epoch;
        stale = 0;
      } else if (++stale >= config.patience) {
        curve.early_stopped = true;
        break;
      }
    }
  }
  const int epochs_run = std::min(epoch, config.max_epochs);

  if (!eval_hook || curve.evals.empty()) {
    best = policy;
    best_epoch = epochs_run;
    best_metric = 0.0;
  }
  curve.best_epoch = best_epoch;
  best.meta.epochs = epochs_run;
  best.meta.best_epoch = best_epoch;
  best.meta.best_eval = best_metric;
  best.meta.train_loss = curve.epochs[static_cast<std::size_t>(best_epoch)].train_loss;
  best.meta.val_loss = curve.epochs[static_cast<std::size_t>(best_epoch)].val_loss;
  return {std::move(best), std::move(curve)};
}

std::string serialize(const Policy& policy) {
  json layers = json::array();
  for (const DenseLayer& l : policy.layers)
    layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.weights}, {"b", l.biases}});
  const json j{
      {"format", kPolicyFormat},
      {"version", kPolicyVersion},
      {"feature_schema", policy.feature_schema},
      {"activation", "tanh"},
      {"layer_sizes", policy.layer_sizes},
      {"scales",
       {{"altitude", policy.scales.altitude},
        {"airspeed", policy.scales.airspeed},
        {"pitch_limit", policy.scales.pitch_limit},
        {"roll_limit", policy.scales.roll_limit},
        {"dt", policy.scales.dt}}},
      {"meta",
       {{"seed", policy.meta.seed},
        {"epochs", policy.meta.epochs},
        {"best_epoch", policy.meta.best_epoch},
        {"train_loss", policy.meta.train_loss},
        {"val_loss", policy.meta.val_loss},
        {"best_eval", policy.meta.best_eval}}},
      {"layers", layers}};
  return j.dump() + "\n";
}

Policy deserialize_policy(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed policy file: ") + e.what());
  }
  if (field<std::string>(j, "format") != kPolicyFormat)
    throw Error(ErrorCode::Schema, "not a policy file");
  if (field<int>(j, "version") != kPolicyVersion)
    throw Error(ErrorCode::Schema, "unsupported policy version");
  if (field<std::string>(j, "activation") != "tanh")
    throw Error(ErrorCode::Schema, "unsupported activation");

  Policy p = make_policy(field<std::vector<int>>(j, "layer_sizes"));
  p.feature_schema = field<std::string>(j, "feature_schema");
  const json& scales = j.at("scales");
  p.scales.altitude = field<double>(scales, "altitude");
  p.scales.airspeed = field<double>(scales, "airspeed");
  p.scales.pitch_limit = field<double>(scales, "pitch_limit");
  p.scales.roll_limit = field<double>(scales, "roll_limit");
  p.scales.dt = field<double>(scales, "dt");
  const json& meta = j.at("meta");
  p.meta.seed = field<std::uint64_t>(meta, "seed");
  p.meta.epochs = field<int>(meta, "epochs");
  p.meta.best_epoch = field<int>(meta, "best_epoch");
  p.meta.train_loss = field<double>(meta, "train_loss");
  p.meta.val_loss = field<double>(meta, "val_loss");
  p.meta.best_eval = field<double>(meta, "best_eval");

  const json& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != p.layers.size())
    throw Error(ErrorCode::Schema, "policy layer count does not match layer_sizes");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    DenseLayer& layer = p.layers[l];
    if (field<int>(layers[l], "in") != layer.in || field<int>(layers[l], "out") != layer.out)
      throw Error(ErrorCode::Schema, "policy layer " + std::to_string(l) + " shape mismatch");
    auto w = field<std::vector<double>>(layers[l], "w");
    auto b = field<std::vector<double>>(layers[l], "b");
    if (w.size() != layer.weights.size() || b.size() != layer.biases.size())
      throw Error(ErrorCode::Schema, "policy layer " + std::to_string(l) + " parameter count mismatch");
    for (double v : w)
      if (!std::isfinite(v)) throw Error(ErrorCode::Schema, "non-finite policy parameter");
    layer.weights = std::move(w);
    layer.biases = std::move(b);
  }
  check_schema(p);
  return p;
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << serialize(policy);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_policy(buf.str());
}

}  // namespace ftutor

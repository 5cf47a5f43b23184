#include "netsr/controller.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "netsr/autodiff.hpp"

namespace netsr {

namespace {

enum Tensor : std::size_t {
  kInW,
  kInB,
  kGateW,
  kGateB,
  kCandW,
  kCandB,
  kLayersW,
  kLayersB,
  kUnitsW,
  kUnitsB,
  kOpsW,
  kOpsB,
  kTensorCount
};

std::vector<Matrix> shaped_tensors(const ControllerConfig& c) {
  const std::size_t h = c.hidden;
  std::vector<Matrix> t(kTensorCount);
  t[kInW] = Matrix(h, c.input_size());
  t[kInB] = Matrix(h, 1);
  t[kGateW] = Matrix(h, 2 * h);
  t[kGateB] = Matrix(h, 1);
  t[kCandW] = Matrix(h, 2 * h);
  t[kCandB] = Matrix(h, 1);
  t[kLayersW] = Matrix(c.layer_counts.size(), h);
  t[kLayersB] = Matrix(c.layer_counts.size(), 1);
  t[kUnitsW] = Matrix(c.unit_counts.size(), h);
  t[kUnitsB] = Matrix(c.unit_counts.size(), 1);
  t[kOpsW] = Matrix(c.operators.size(), h);
  t[kOpsB] = Matrix(c.operators.size(), 1);
  return t;
}

bool is_bias(std::size_t i) { return i % 2 == 1; }

// Chooses the indices drawn at one step given its probability vector.
using Chooser = std::function<std::vector<std::size_t>(Head head, std::size_t step, std::span<const double> probs,
                                                       std::size_t draws)>;

struct Unrolled {
  ad::Var log_prob;
  ad::Var entropy;
  std::vector<ad::Var> leaves;
  DecisionTrace trace;
  std::vector<std::vector<double>> step_probabilities;
};

// Runs the cell over the whole decision sequence. Sampling and replay share
// this path so that both produce bit-identical log-probabilities.
Unrolled unroll(const ControllerParams& params, ad::Tape& tape, std::span<const double> initial_input,
                const Chooser& choose) {
  const ControllerConfig& cfg = params.config;
  Unrolled u;
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const Matrix& m = params.tensors[i];
    u.leaves.push_back(is_bias(i) ? tape.vector(m.data) : tape.matrix(m));
  }
  const auto& p = u.leaves;
  u.trace.initial_input.assign(initial_input.begin(), initial_input.end());

  const std::vector<double> zeros(cfg.hidden, 0.0);
  ad::Var h = tape.vector(zeros);
  ad::Var input = tape.vector(initial_input);
  ad::Var log_prob = tape.scalar(0.0);
  ad::Var entropy = tape.scalar(0.0);

  std::size_t step = 0;
  auto cell_step = [&](Head head, std::size_t draws) {
    ad::Var x = ad::affine(p[kInW], input, p[kInB]);
    const ad::Var parts[] = {x, h};
    ad::Var joint = ad::concat(parts);
    ad::Var gate = ad::sigmoid(ad::affine(p[kGateW], joint, p[kGateB]));
    ad::Var cand = ad::tanh(ad::affine(p[kCandW], joint, p[kCandB]));
    h = h + gate * (cand - h);

    const std::size_t w = 2 * static_cast<std::size_t>(head) + kLayersW;
    ad::Var logits = ad::affine(p[w], h, p[w + 1]);
    ad::Var probs = ad::softmax(logits);
    const auto pv = probs.value();
    u.step_probabilities.emplace_back(pv.begin(), pv.end());

    std::vector<std::size_t> chosen = choose(head, step, pv, draws);
    if (chosen.size() != draws) throw std::invalid_argument("controller trace: wrong number of draws");
    for (std::size_t c : chosen) {
      if (c >= pv.size()) {
        throw std::invalid_argument("controller trace: index " + std::to_string(c) + " out of range for library of size " +
                                    std::to_string(pv.size()));
      }
      log_prob = log_prob + ad::categorical_log_prob(logits, c);
    }
    entropy = entropy + ad::categorical_entropy(logits);
    u.trace.decisions.push_back({head, chosen});
    input = ad::pad(probs, cfg.input_size());
    ++step;
    return chosen;
  };

  const std::size_t layers = cfg.layer_counts[cell_step(Head::Layers, 1)[0]];
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t units = cfg.unit_counts[cell_step(Head::Units, 1)[0]];
    cell_step(Head::Operators, units);
  }
  u.log_prob = log_prob;
  u.entropy = entropy;
  return u;
}

std::size_t draw(std::span<const double> probs, Rng& rng) {
  const double r = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return i;
  }
  // Rounding left the cumulative sum just below 1.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

std::vector<double> flat_gradient(const std::vector<ad::Var>& leaves) {
  std::vector<double> g;
  for (const ad::Var& v : leaves) {
    const auto s = v.grad();
    g.insert(g.end(), s.begin(), s.end());
  }
  return g;
}

}  // namespace

void ControllerConfig::validate() const {
  if (hidden == 0) throw std::invalid_argument("controller hidden size must be positive");
  if (layer_counts.empty()) throw std::invalid_argument("layer-count library is empty");
  if (unit_counts.empty()) throw std::invalid_argument("unit-count library is empty");
  if (operators.empty()) throw std::invalid_argument("operator library is empty");
  for (auto v : layer_counts)
    if (v == 0) throw std::invalid_argument("layer-count library contains 0");
  for (auto v : unit_counts)
    if (v == 0) throw std::invalid_argument("unit-count library contains 0");
  for (Op op : operators)
    if (op == Op::Neg) throw std::invalid_argument("operator library contains 'neg'");
}

std::size_t ControllerConfig::input_size() const {
  return std::max({layer_counts.size(), unit_counts.size(), operators.size()});
}

ArchitectureLimits ControllerConfig::limits() const {
  return {*std::max_element(layer_counts.begin(), layer_counts.end()),
          *std::max_element(unit_counts.begin(), unit_counts.end())};
}

std::size_t ControllerParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::vector<double> ControllerParams::flat() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& t : tensors) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void ControllerParams::set_flat(std::span<const double> values) {
  if (values.size() != size()) {
    throw std::invalid_argument("controller parameters: expected " + std::to_string(size()) + " values, got " +
                                std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& t : tensors)
    for (double& v : t.data) v = values[k++];
}

bool ControllerParams::all_finite() const {
  for (const auto& t : tensors)
    for (double v : t.data)
      if (!std::isfinite(v)) return false;
  return true;
}

ControllerParams zero_controller(const ControllerConfig& config) {
  config.validate();
  return {config, shaped_tensors(config)};
}

ControllerParams init_controller(const ControllerConfig& config, std::uint64_t seed) {
  ControllerParams p = zero_controller(config);
  Rng rng(seed);
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    if (is_bias(i)) continue;
    Matrix& m = p.tensors[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols));
    for (double& v : m.data) v = rng.uniform(-bound, bound);
  }
  return p;
}

EpisodeSample sample_architecture(const ControllerParams& params, Rng& rng) {
  std::vector<double> initial(params.config.input_size());
  for (double& v : initial) v = rng.uniform();
  ad::Tape tape;
  Unrolled u = unroll(params, tape, initial, [&](Head, std::size_t, std::span<const double> probs, std::size_t n) {
    std::vector<std::size_t> out(n);
    for (auto& c : out) c = draw(probs, rng);
    return out;
  });
  EpisodeSample s;
  s.log_prob = u.log_prob.item();
  s.entropy = u.entropy.item();
  s.trace = std::move(u.trace);
  s.step_probabilities = std::move(u.step_probabilities);
  s.descriptor = descriptor_of(params.config, s.trace);
  return s;
}

ArchitectureDescriptor descriptor_of(const ControllerConfig& config, const DecisionTrace& trace) {
  const auto& d = trace.decisions;
  auto bad = [](const std::string& why) { return std::invalid_argument("controller trace: " + why); };
  if (d.empty() || d[0].head != Head::Layers || d[0].choices.size() != 1) throw bad("missing layer-count decision");
  if (d[0].choices[0] >= config.layer_counts.size()) throw bad("layer-count index out of range");
  const std::size_t layers = config.layer_counts[d[0].choices[0]];
  if (d.size() != 1 + 2 * layers) throw bad("expected " + std::to_string(1 + 2 * layers) + " decisions");
  ArchitectureDescriptor out;
  for (std::size_t l = 0; l < layers; ++l) {
    const Decision& units = d[1 + 2 * l];
    const Decision& ops = d[2 + 2 * l];
    if (units.head != Head::Units || units.choices.size() != 1 || units.choices[0] >= config.unit_counts.size()) {
      throw bad("bad unit-count decision for layer " + std::to_string(l));
    }
    if (ops.head != Head::Operators || ops.choices.size() != config.unit_counts[units.choices[0]]) {
      throw bad("bad operator decision for layer " + std::to_string(l));
    }
    std::vector<Op> layer;
    for (std::size_t c : ops.choices) {
      if (c >= config.operators.size()) throw bad("operator index out of range");
      layer.push_back(config.operators[c]);
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

TraceScore log_prob_and_entropy(const ControllerParams& params, const DecisionTrace& trace, bool with_gradients) {
  descriptor_of(params.config, trace);
  if (trace.initial_input.size() != params.config.input_size()) {
    throw std::invalid_argument("controller trace: initial input has wrong size");
  }
  ad::Tape tape;
  Unrolled u = unroll(params, tape, trace.initial_input,
                      [&](Head head, std::size_t step, std::span<const double>, std::size_t) {
                        const Decision& d = trace.decisions.at(step);
                        if (d.head != head) throw std::invalid_argument("controller trace: head mismatch");
                        return d.choices;
                      });
  TraceScore s;
  s.log_prob = u.log_prob.item();
  s.entropy = u.entropy.item();
  if (with_gradients) {
    tape.backward(u.log_prob);
    s.d_log_prob = flat_gradient(u.leaves);
    tape.backward(u.entropy);
    s.d_entropy = flat_gradient(u.leaves);
  }
  return s;
}

nlohmann::json to_json(const ControllerParams& params) {
  const auto& c = params.config;
  nlohmann::json ops = nlohmann::json::array();
  for (Op op : c.operators) ops.push_back(std::string(op_name(op)));
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors) tensors.push_back({{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}});
  return {{"hidden", c.hidden},
          {"layer_counts", c.layer_counts},
          {"unit_counts", c.unit_counts},
          {"operators", ops},
          {"tensors", tensors}};
}

ControllerParams controller_from_json(const nlohmann::json& doc) {
  ControllerConfig c;
  c.hidden = doc.at("hidden").get<std::size_t>();
  c.layer_counts = doc.at("layer_counts").get<std::vector<std::size_t>>();
  c.unit_counts = doc.at("unit_counts").get<std::vector<std::size_t>>();
  c.operators.clear();
  for (const auto& name : doc.at("operators")) {
    const auto op = op_from_name(name.get<std::string>());
    if (!op) throw std::invalid_argument("controller checkpoint: unknown operator " + name.dump());
    c.operators.push_back(*op);
  }
  ControllerParams p = zero_controller(c);
  const auto& tensors = doc.at("tensors");
  if (tensors.size() != p.tensors.size()) throw std::invalid_argument("controller checkpoint: wrong tensor count");
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    Matrix& m = p.tensors[i];
    const auto& t = tensors[i];
    auto data = t.at("data").get<std::vector<double>>();
    if (t.at("rows").get<std::size_t>() != m.rows || t.at("cols").get<std::size_t>() != m.cols ||
        data.size() != m.size()) {
      throw std::invalid_argument("controller checkpoint: tensor " + std::to_string(i) + " has the wrong shape");
    }
    m.data = std::move(data);
  }
  return p;
}

}  // namespace netsr

#include "netsr/symnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "netsr/rng.hpp"

namespace netsr {

void ArchitectureDescriptor::validate(const ArchitectureLimits& limits) const {
  if (layers.empty()) throw std::invalid_argument("architecture has no layers");
  if (layers.size() > limits.max_layers) {
    throw std::invalid_argument("architecture has " + std::to_string(layers.size()) + " layers, limit is " +
                                std::to_string(limits.max_layers));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& ops = layers[i];
    if (ops.empty() || ops.size() > limits.max_units) {
      throw std::invalid_argument("layer " + std::to_string(i) + " has " + std::to_string(ops.size()) +
                                  " units, expected 1.." + std::to_string(limits.max_units));
    }
    for (Op op : ops) {
      if (op == Op::Neg) throw std::invalid_argument("layer " + std::to_string(i) + " uses 'neg' as a unit");
    }
  }
}

std::string ArchitectureDescriptor::str() const {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += " | ";
    for (std::size_t j = 0; j < layers[i].size(); ++j) {
      if (j) out += ",";
      out += op_name(layers[i][j]);
    }
  }
  return out;
}

LayerLayout layout_of(std::span<const Op> ops) {
  LayerLayout l;
  for (Op op : ops) (is_unary(op) ? l.unary : l.binary).push_back(op);
  return l;
}

std::vector<LayerLayout> SymbolicNetwork::layouts() const {
  std::vector<LayerLayout> out;
  out.reserve(descriptor.layers.size());
  for (const auto& ops : descriptor.layers) out.push_back(layout_of(ops));
  return out;
}

std::size_t SymbolicNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

std::size_t SymbolicNetwork::zero_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(std::count(w.data.begin(), w.data.end(), 0.0));
  for (const auto& b : biases) n += static_cast<std::size_t>(std::count(b.begin(), b.end(), 0.0));
  return n;
}

bool SymbolicNetwork::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (const auto& w : weights)
    if (!std::all_of(w.data.begin(), w.data.end(), finite)) return false;
  for (const auto& b : biases)
    if (!std::all_of(b.begin(), b.end(), finite)) return false;
  return true;
}

SymbolicNetwork instantiate(const ArchitectureDescriptor& descriptor, std::size_t input_dim, std::uint64_t seed,
                            bool bias) {
  if (input_dim < 1) throw std::invalid_argument("instantiate: input_dim must be at least 1");
  descriptor.validate(ArchitectureLimits{descriptor.layer_count(), 64});

  SymbolicNetwork net;
  net.descriptor = descriptor;
  net.input_dim = input_dim;
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  auto add_layer = [&](std::size_t rows) {
    Matrix w(rows, fan_in);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + rows));
    for (double& v : w.data) v = rng.normal(0.0, stddev);
    net.weights.push_back(std::move(w));
    if (bias) net.biases.emplace_back(rows, 0.0);
  };
  for (const auto& ops : descriptor.layers) {
    const LayerLayout l = layout_of(ops);
    add_layer(l.intermediate_dim());
    fan_in = l.output_dim();
  }
  add_layer(1);
  return net;
}

namespace {

void check_input(const SymbolicNetwork& net, std::size_t cols) {
  if (cols != net.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(cols) + " columns, network expects " +
                                std::to_string(net.input_dim));
  }
}

}  // namespace

std::vector<double> forward(const SymbolicNetwork& net, const Matrix& x, bool guarded) {
  check_input(net, x.cols);
  const auto layouts = net.layouts();
  std::vector<double> h, z, next, out(x.rows);
  for (std::size_t k = 0; k < x.rows; ++k) {
    h.assign(x.row(k).begin(), x.row(k).end());
    for (std::size_t l = 0; l <= layouts.size(); ++l) {
      const Matrix& w = net.weights[l];
      z.assign(w.rows, 0.0);
      for (std::size_t i = 0; i < w.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) s += w(i, j) * h[j];
        if (net.has_bias()) s += net.biases[l][i];
        z[i] = s;
      }
      if (l == layouts.size()) {
        out[k] = z[0];
        break;
      }
      const LayerLayout& lay = layouts[l];
      const std::size_t u = lay.unary.size();
      next.resize(lay.output_dim());
      for (std::size_t i = 0; i < u; ++i) next[i] = eval_unary(lay.unary[i], z[i], guarded);
      for (std::size_t j = 0; j < lay.binary.size(); ++j) {
        next[u + j] = eval_binary(lay.binary[j], z[u + 2 * j], z[u + 2 * j + 1], guarded);
      }
      h.swap(next);
    }
  }
  return out;
}

NetworkLeaves place_parameters(const SymbolicNetwork& net, ad::Tape& tape) {
  NetworkLeaves leaves;
  leaves.weights.reserve(net.weights.size());
  for (const auto& w : net.weights) leaves.weights.push_back(tape.matrix(w));
  for (const auto& b : net.biases) leaves.biases.push_back(tape.vector(b));
  return leaves;
}

ad::Var forward_on_tape(const SymbolicNetwork& net, const NetworkLeaves& leaves, ad::Var input, bool guarded) {
  check_input(net, input.shape().cols);
  ad::Var h = input;
  std::vector<ad::Var> units;
  const std::size_t layer_count = net.descriptor.layers.size();
  for (std::size_t l = 0; l < layer_count; ++l) {
    const LayerLayout lay = layout_of(net.descriptor.layers[l]);
    ad::Var z = ad::affine(leaves.weights[l], h, net.has_bias() ? leaves.biases[l] : ad::Var{});
    units.clear();
    const std::size_t u = lay.unary.size();
    for (std::size_t i = 0; i < u; ++i) units.push_back(ad::unary(lay.unary[i], ad::column(z, i), guarded));
    for (std::size_t j = 0; j < lay.binary.size(); ++j) {
      units.push_back(
          ad::binary(lay.binary[j], ad::column(z, u + 2 * j), ad::column(z, u + 2 * j + 1), guarded));
    }
    h = ad::stack_columns(units);
  }
  ad::Var out = ad::affine(leaves.weights[layer_count], h, net.has_bias() ? leaves.biases[layer_count] : ad::Var{});
  return ad::column(out, 0);
}

// ---------------------------------------------------------------------------
// Training

double adaptive_clip_threshold(std::span<const double> window, double c, std::size_t capacity) {
  if (capacity == 0) return 0.0;
  const double total = std::accumulate(window.begin(), window.end(), 0.0);
  return c / static_cast<double>(capacity) * total;
}

double clip_scale(double norm, double gamma) {
  if (norm <= gamma) return 1.0;
  double s = gamma / norm;
  // Round down so that s * norm never exceeds gamma.
  while (s > 0.0 && s * norm > gamma) s = std::nextafter(s, 0.0);
  return s;
}

void ClipWindow::push(double norm) {
  norms_.push_back(norm);
  if (norms_.size() > capacity_) norms_.pop_front();
}

double ClipWindow::threshold(double c) const {
  if (capacity_ == 0) return 0.0;
  double total = 0.0;
  for (double v : norms_) total += v;
  return c / static_cast<double>(capacity_) * total;
}

TrainResult train(SymbolicNetwork net, const Dataset& data, const TrainConfig& config) {
  data.validate();
  check_input(net, data.dims());
  TrainResult result;
  result.loss_trace.reserve(config.stage1_epochs + config.stage2_epochs);

  ad::Tape tape;
  ClipWindow window(config.clip_window);
  const std::size_t layers = net.weights.size();
  std::vector<double> layer_norm(layers);

  const std::size_t total_epochs = config.stage1_epochs + config.stage2_epochs;
  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const bool regularize = epoch >= config.stage1_epochs && config.reg_weight != 0.0;
    tape.clear();
    const NetworkLeaves leaves = place_parameters(net, tape);
    const ad::Var input = tape.matrix(data.x);
    const ad::Var target = tape.vector(data.y);
    const ad::Var pred = forward_on_tape(net, leaves, input, true);
    ad::Var loss = ad::mean(ad::square(pred - target));
    if (regularize) {
      ad::Var penalty = ad::sum(ad::l05_star(leaves.weights[0], config.transition));
      for (std::size_t l = 1; l < layers; ++l) penalty = penalty + ad::sum(ad::l05_star(leaves.weights[l], config.transition));
      for (const ad::Var& b : leaves.biases) penalty = penalty + ad::sum(ad::l05_star(b, config.transition));
      loss = loss + ad::scale(penalty, config.reg_weight);
    }
    const double loss_value = loss.item();
    result.loss_trace.push_back(loss_value);
    if (!std::isfinite(loss_value)) {
      result.failed = true;
      result.failure = "non-finite loss at epoch " + std::to_string(epoch);
      break;
    }
    tape.backward(loss);

    double sq_total = 0.0;
    double norm_sum = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      double sq = 0.0;
      for (double g : leaves.weights[l].grad()) sq += g * g;
      if (net.has_bias())
        for (double g : leaves.biases[l].grad()) sq += g * g;
      layer_norm[l] = std::sqrt(sq);
      norm_sum += layer_norm[l];
      sq_total += sq;
    }
    if (!std::isfinite(sq_total)) {
      result.failed = true;
      result.failure = "non-finite gradient at epoch " + std::to_string(epoch);
      break;
    }
    double step_scale = config.learning_rate;
    if (config.adaptive_clip) {
      window.push(norm_sum);
      const double gamma = window.threshold(config.clip_factor);
      step_scale *= clip_scale(std::sqrt(sq_total), gamma);
    }
    for (std::size_t l = 0; l < layers; ++l) {
      auto g = leaves.weights[l].grad();
      auto& w = net.weights[l].data;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step_scale * g[i];
      if (net.has_bias()) {
        auto gb = leaves.biases[l].grad();
        auto& b = net.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= step_scale * gb[i];
      }
    }
  }
  if (!result.failed && !net.all_finite()) {
    result.failed = true;
    result.failure = "non-finite weights after training";
  }
  result.net = std::move(net);
  return result;
}

SymbolicNetwork prune(SymbolicNetwork net, double beta) {
  if (beta < 0.0) throw std::invalid_argument("prune: threshold must be non-negative");
  auto cut = [beta](double& v) {
    if (std::abs(v) < beta) v = 0.0;
  };
  for (auto& w : net.weights) std::for_each(w.data.begin(), w.data.end(), cut);
  for (auto& b : net.biases) std::for_each(b.begin(), b.end(), cut);
  return net;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const SymbolicNetwork& net) {
  nlohmann::json doc;
  doc["input_dim"] = net.input_dim;
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (const auto& ops : net.descriptor.layers) {
    auto names = nlohmann::json::array();
    for (Op op : ops) names.push_back(std::string(op_name(op)));
    layers.push_back(names);
  }
  auto& weights = doc["weights"] = nlohmann::json::array();
  for (const auto& w : net.weights) weights.push_back({{"rows", w.rows}, {"cols", w.cols}, {"data", w.data}});
  doc["biases"] = net.biases;
  return doc;
}

SymbolicNetwork network_from_json(const nlohmann::json& doc) {
  SymbolicNetwork net;
  net.input_dim = doc.at("input_dim").get<std::size_t>();
  for (const auto& layer : doc.at("layers")) {
    std::vector<Op> ops;
    for (const auto& name : layer) {
      const auto op = op_from_name(name.get<std::string>());
      if (!op) throw std::invalid_argument("unknown operator '" + name.get<std::string>() + "'");
      ops.push_back(*op);
    }
    net.descriptor.layers.push_back(std::move(ops));
  }
  for (const auto& w : doc.at("weights")) {
    net.weights.emplace_back(w.at("rows").get<std::size_t>(), w.at("cols").get<std::size_t>(),
                             w.at("data").get<std::vector<double>>());
  }
  net.biases = doc.value("biases", std::vector<std::vector<double>>{});
  if (net.weights.size() != net.descriptor.layers.size() + 1) {
    throw std::invalid_argument("network document has " + std::to_string(net.weights.size()) +
                                " weight matrices for " + std::to_string(net.descriptor.layers.size()) + " layers");
  }
  return net;
}

}  // namespace netsr

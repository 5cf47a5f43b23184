#pragma once

// Symbolic networks: feed-forward layers whose units apply algebraic
// operators, followed by a linear read-out to one output.

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netsr/autodiff.hpp"
#include "netsr/dataset.hpp"
#include "netsr/matrix.hpp"
#include "netsr/ops.hpp"

namespace netsr {

struct ArchitectureLimits {
  std::size_t max_layers = 5;
  std::size_t max_units = 6;
};

/// Layer count plus the operators of each layer, in sampling order.
struct ArchitectureDescriptor {
  std::vector<std::vector<Op>> layers;

  std::size_t layer_count() const { return layers.size(); }

  /// Throws std::invalid_argument on an empty layer list, a layer with no
  /// units, a `Neg` unit, or sizes above `limits`.
  void validate(const ArchitectureLimits& limits = {}) const;
  std::string str() const;

  friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;
};

/// Unit arrangement of one layer: unary units take the first u affine
/// components, binary units take consecutive pairs after them.
struct LayerLayout {
  std::vector<Op> unary;
  std::vector<Op> binary;

  std::size_t intermediate_dim() const { return unary.size() + 2 * binary.size(); }
  std::size_t output_dim() const { return unary.size() + binary.size(); }
};

LayerLayout layout_of(std::span<const Op> ops);

struct SymbolicNetwork {
  ArchitectureDescriptor descriptor;
  std::size_t input_dim = 0;
  /// One matrix per operator layer, then the 1 x n read-out.
  std::vector<Matrix> weights;
  /// Empty when biases are disabled; otherwise one vector per weight matrix.
  std::vector<std::vector<double>> biases;

  bool has_bias() const { return !biases.empty(); }
  std::vector<LayerLayout> layouts() const;
  std::size_t parameter_count() const;
  std::size_t zero_count() const;
  bool all_finite() const;
};

/// Weights drawn from N(0, 2 / (fan_in + fan_out)); biases start at zero.
SymbolicNetwork instantiate(const ArchitectureDescriptor& descriptor, std::size_t input_dim, std::uint64_t seed,
                            bool bias = false);

/// Network output for every row of `x`.
std::vector<double> forward(const SymbolicNetwork& net, const Matrix& x, bool guarded = true);

/// Parameter leaves of a network on a tape, ordered like `net.weights` and
/// `net.biases`.
struct NetworkLeaves {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

NetworkLeaves place_parameters(const SymbolicNetwork& net, ad::Tape& tape);

/// Records the forward pass on a tape; `input` is a matrix(n, input_dim).
ad::Var forward_on_tape(const SymbolicNetwork& net, const NetworkLeaves& leaves, ad::Var input, bool guarded = true);

struct TrainConfig {
  double learning_rate = 0.1;
  double reg_weight = 0.005;
  std::size_t stage1_epochs = 10000;
  std::size_t stage2_epochs = 10000;
  bool adaptive_clip = true;
  std::size_t clip_window = 50;
  double clip_factor = 0.1;
  double prune_threshold = 0.01;
  double transition = 0.05;
};

struct TrainResult {
  SymbolicNetwork net;
  std::vector<double> loss_trace;
  bool failed = false;
  std::string failure;
};

/// Two-stage full-batch gradient descent: MSE for stage 1, MSE plus the
/// smoothed L0.5 penalty for stage 2. Stops and flags the result as failed
/// when the loss becomes non-finite.
TrainResult train(SymbolicNetwork net, const Dataset& data, const TrainConfig& config);

/// gamma = (c / capacity) * sum(window). Entries not yet pushed count as 0.
double adaptive_clip_threshold(std::span<const double> window, double c, std::size_t capacity);

/// Factor in [0, 1] that brings a gradient of norm `norm` within `gamma`.
double clip_scale(double norm, double gamma);

/// Fixed-capacity queue of recent gradient norms.
class ClipWindow {
 public:
  explicit ClipWindow(std::size_t capacity) : capacity_(capacity) {}

  void push(double norm);
  double threshold(double c) const;
  std::size_t size() const { return norms_.size(); }

 private:
  std::size_t capacity_;
  std::deque<double> norms_;
};

/// Zeroes every weight and bias with |w| < beta. Idempotent.
SymbolicNetwork prune(SymbolicNetwork net, double beta);

nlohmann::json to_json(const SymbolicNetwork& net);
SymbolicNetwork network_from_json(const nlohmann::json& doc);

}  // namespace netsr

#pragma once

// Recurrent policy over architecture descriptors. One cell step emits a
// categorical for the layer count; each layer then takes one step for its
// unit count and one step whose categorical is drawn from once per unit.

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netsr/matrix.hpp"
#include "netsr/ops.hpp"
#include "netsr/rng.hpp"
#include "netsr/symnet.hpp"

namespace netsr {

struct ControllerConfig {
  std::size_t hidden = 32;
  std::vector<std::size_t> layer_counts{1, 2, 3, 4, 5};
  std::vector<std::size_t> unit_counts{1, 2, 3, 4, 5, 6};
  std::vector<Op> operators = default_operator_library();

  /// Throws std::invalid_argument on empty or non-positive libraries, or an
  /// operator library containing `neg`.
  void validate() const;
  /// Size of the zero-padded probability vector fed back as cell input.
  std::size_t input_size() const;
  ArchitectureLimits limits() const;
};

enum class Head : std::uint8_t { Layers = 0, Units = 1, Operators = 2 };

struct Decision {
  Head head;
  std::vector<std::size_t> choices;

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct DecisionTrace {
  std::vector<double> initial_input;
  std::vector<Decision> decisions;

  friend bool operator==(const DecisionTrace&, const DecisionTrace&) = default;
};

struct ControllerParams {
  ControllerConfig config;
  /// Input projection, gate, candidate and the three heads; weights then biases.
  std::vector<Matrix> tensors;

  std::size_t size() const;
  std::vector<double> flat() const;
  void set_flat(std::span<const double> values);
  bool all_finite() const;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
ControllerParams init_controller(const ControllerConfig& config, std::uint64_t seed);
/// All parameters zero: every head is uniform.
ControllerParams zero_controller(const ControllerConfig& config);

struct EpisodeSample {
  ArchitectureDescriptor descriptor;
  double log_prob = 0.0;
  double entropy = 0.0;
  DecisionTrace trace;
  /// Probability vector of every cell step, in order.
  std::vector<std::vector<double>> step_probabilities;
};

EpisodeSample sample_architecture(const ControllerParams& params, Rng& rng);

/// Descriptor named by a trace. Throws std::invalid_argument on an invalid
/// trace.
ArchitectureDescriptor descriptor_of(const ControllerConfig& config, const DecisionTrace& trace);

struct TraceScore {
  double log_prob = 0.0;
  double entropy = 0.0;
  /// Gradients with respect to the flat parameter vector.
  std::vector<double> d_log_prob;
  std::vector<double> d_entropy;
};

/// Re-evaluates a stored trace under `params`. Gradients are filled only when
/// `with_gradients` is set. Throws std::invalid_argument on an invalid trace.
TraceScore log_prob_and_entropy(const ControllerParams& params, const DecisionTrace& trace,
                                bool with_gradients = false);

nlohmann::json to_json(const ControllerParams& params);
ControllerParams controller_from_json(const nlohmann::json& doc);

}  // namespace netsr

#pragma once

// Outer search loop: sample architectures, train and prune networks, extract
// and refine expressions, score them, and update the controller with a
// risk-seeking policy gradient.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netsr/constopt.hpp"
#include "netsr/controller.hpp"
#include "netsr/dataset.hpp"
#include "netsr/expr.hpp"
#include "netsr/symnet.hpp"

namespace netsr {

enum class PolicyOptimizer : std::uint8_t { Sgd, Adam };

std::string_view optimizer_name(PolicyOptimizer o);
std::optional<PolicyOptimizer> optimizer_from_name(std::string_view name);

struct SearchConfig {
  double controller_lr = 0.0006;
  double entropy_weight = 0.005;
  double risk = 0.5;
  std::size_t batch = 10;
  std::size_t epochs = 100;
  double reward_threshold = 0.999;
  /// Optional extra stop rule on training R^2.
  std::optional<double> stop_r2;
  PolicyOptimizer optimizer = PolicyOptimizer::Adam;
  bool bias = false;
  ControllerConfig controller;
  TrainConfig train;
  RefineConfig refine;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  /// Throws std::invalid_argument when a value is out of range.
  void validate() const;
};

struct CandidateRecord {
  std::size_t epoch = 0;
  std::size_t index = 0;
  EpisodeSample sample;
  std::uint64_t network_seed = 0;
  std::size_t parameter_count = 0;
  std::size_t zero_count = 0;
  bool failed = false;
  std::string failure;
  Expression extracted;
  Expression refined;
  double mse = 0.0;
  double reward = 0.0;
  double seconds = 0.0;
};

/// 1 / (1 + mse) for finite mse, 0 otherwise.
double reward(double mse);

/// Nearest-rank (1 - risk) quantile: sorted ascending, element
/// ceil((1 - risk) * n) - 1, clamped to the valid range.
double risk_quantile(std::span<const double> rewards, double risk);

struct PolicyGradient {
  double threshold = 0.0;
  std::size_t survivors = 0;
  /// Reward-weighted log-probability term and entropy term, flat layout.
  std::vector<double> reward_term;
  std::vector<double> entropy_term;
};

PolicyGradient policy_gradient(const ControllerParams& params, std::span<const CandidateRecord> batch, double risk,
                               double entropy_weight);

/// Gradient-ascent step on the controller. Adam keeps its moments here.
class PolicyStepper {
 public:
  PolicyStepper(PolicyOptimizer kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}
  void step(ControllerParams& params, std::span<const double> direction);

 private:
  PolicyOptimizer kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Computes the policy gradient for `batch` and applies one ascent step.
/// Returns the gradient used.
PolicyGradient policy_update(ControllerParams& params, std::span<const CandidateRecord> batch,
                             const SearchConfig& config, PolicyStepper& stepper);

/// Full candidate pipeline for one descriptor on the training data.
CandidateRecord evaluate_candidate(const ArchitectureDescriptor& descriptor, const Dataset& train,
                                   const SearchConfig& config, std::uint64_t network_seed);

struct EpochSummary {
  std::size_t epoch = 0;
  std::vector<double> rewards;
  std::vector<std::string> expressions;
  double threshold = 0.0;
  std::size_t survivors = 0;
  double mean_reward = 0.0;
  double best_reward = 0.0;
  std::string best_expression;
  double seconds = 0.0;
};

struct SearchResult {
  CandidateRecord best;
  std::vector<EpochSummary> history;
  ControllerParams controller;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochSummary&)>;

/// Runs the search on training data. Deterministic for a given config.
SearchResult run_search(const Dataset& train, const SearchConfig& config, const EpochCallback& on_epoch = {});

nlohmann::json history_to_json(const SearchResult& result);

}  // namespace netsr

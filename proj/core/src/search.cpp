#include "netsr/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "netsr/metrics.hpp"
#include "netsr/rng.hpp"

namespace netsr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string_view optimizer_name(PolicyOptimizer o) { return o == PolicyOptimizer::Sgd ? "sgd" : "adam"; }

std::optional<PolicyOptimizer> optimizer_from_name(std::string_view name) {
  if (name == "sgd") return PolicyOptimizer::Sgd;
  if (name == "adam") return PolicyOptimizer::Adam;
  return std::nullopt;
}

void SearchConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (!(risk > 0.0 && risk < 1.0)) fail("risk factor must be in (0, 1)");
  if (batch < 2) fail("batch size must be at least 2");
  if (epochs < 1) fail("epoch count must be at least 1");
  if (!(reward_threshold >= 0.0 && reward_threshold <= 1.0)) fail("reward threshold must be in [0, 1]");
  if (!(controller_lr > 0.0)) fail("controller learning rate must be positive");
  if (!(entropy_weight >= 0.0)) fail("entropy weight must be non-negative");
  if (!(train.learning_rate > 0.0)) fail("network learning rate must be positive");
  if (!(train.reg_weight >= 0.0)) fail("regularization weight must be non-negative");
  if (!(train.prune_threshold >= 0.0)) fail("prune threshold must be non-negative");
  if (!(train.transition > 0.0)) fail("regularizer transition must be positive");
  if (train.adaptive_clip && train.clip_window == 0) fail("clip window must be positive");
  if (workers == 0) fail("worker count must be positive");
  controller.validate();
}

double reward(double mse) {
  if (!std::isfinite(mse) || mse < 0.0) return 0.0;
  return 1.0 / (1.0 + mse);
}

double risk_quantile(std::span<const double> rewards, double risk) {
  if (rewards.empty()) throw std::invalid_argument("risk_quantile: empty reward list");
  std::vector<double> sorted(rewards.begin(), rewards.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double rank = std::ceil((1.0 - risk) * n) - 1.0;
  const std::size_t idx = static_cast<std::size_t>(std::clamp(rank, 0.0, n - 1.0));
  return sorted[idx];
}

PolicyGradient policy_gradient(const ControllerParams& params, std::span<const CandidateRecord> batch, double risk,
                               double entropy_weight) {
  PolicyGradient pg;
  pg.reward_term.assign(params.size(), 0.0);
  pg.entropy_term.assign(params.size(), 0.0);
  if (batch.empty()) return pg;

  std::vector<double> rewards;
  for (const auto& c : batch) rewards.push_back(c.reward);
  pg.threshold = risk_quantile(rewards, risk);

  std::vector<const CandidateRecord*> survivors;
  for (const auto& c : batch)
    if (c.reward >= pg.threshold) survivors.push_back(&c);
  pg.survivors = survivors.size();
  if (survivors.empty()) return pg;

  const double inv = 1.0 / static_cast<double>(survivors.size());
  for (const CandidateRecord* c : survivors) {
    const double weight = (c->reward - pg.threshold) * inv;
    const bool need_reward = weight != 0.0;
    const bool need_entropy = entropy_weight != 0.0;
    if (!need_reward && !need_entropy) continue;
    const TraceScore s = log_prob_and_entropy(params, c->sample.trace, true);
    for (std::size_t k = 0; k < pg.reward_term.size(); ++k) {
      if (need_reward) pg.reward_term[k] += weight * s.d_log_prob[k];
      if (need_entropy) pg.entropy_term[k] += entropy_weight * inv * s.d_entropy[k];
    }
  }
  return pg;
}

void PolicyStepper::step(ControllerParams& params, std::span<const double> direction) {
  std::vector<double> theta = params.flat();
  if (direction.size() != theta.size()) throw std::invalid_argument("policy step: direction has the wrong size");
  if (kind_ == PolicyOptimizer::Sgd) {
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += lr_ * direction[k];
  } else {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m_.size() != theta.size()) {
      m_.assign(theta.size(), 0.0);
      v_.assign(theta.size(), 0.0);
      t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * direction[k];
      v_[k] = b2 * v_[k] + (1.0 - b2) * direction[k] * direction[k];
      theta[k] += lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps);
    }
  }
  params.set_flat(theta);
}

PolicyGradient policy_update(ControllerParams& params, std::span<const CandidateRecord> batch,
                             const SearchConfig& config, PolicyStepper& stepper) {
  PolicyGradient pg = policy_gradient(params, batch, config.risk, config.entropy_weight);
  if (pg.survivors == 0) return pg;
  std::vector<double> direction(pg.reward_term.size());
  for (std::size_t k = 0; k < direction.size(); ++k) direction[k] = pg.reward_term[k] + pg.entropy_term[k];
  stepper.step(params, direction);
  return pg;
}

CandidateRecord evaluate_candidate(const ArchitectureDescriptor& descriptor, const Dataset& train,
                                   const SearchConfig& config, std::uint64_t network_seed) {
  const auto start = Clock::now();
  CandidateRecord rec;
  rec.network_seed = network_seed;
  try {
    SymbolicNetwork net = instantiate(descriptor, train.dims(), network_seed, config.bias);
    TrainResult trained = netsr::train(std::move(net), train, config.train);
    if (trained.failed) {
      rec.failed = true;
      rec.failure = trained.failure;
    } else {
      const SymbolicNetwork pruned = prune(std::move(trained.net), config.train.prune_threshold);
      rec.parameter_count = pruned.parameter_count();
      rec.zero_count = pruned.zero_count();
      rec.extracted = extract(pruned);
      RefineConfig rc = config.refine;
      rc.seed = derive_seed(network_seed, {7});
      // Refined constants can change sign, so tidy the tree once more.
      rec.refined = simplify(refine(rec.extracted, train, rc).expression);
      // Reported expressions use plain mathematical semantics.
      const std::vector<double> pred = evaluate(rec.refined, train.x, false);
      rec.mse = mean_squared_error(train.y, pred);
      rec.reward = reward(rec.mse);
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.failure = e.what();
  }
  if (rec.failed) {
    rec.mse = std::numeric_limits<double>::infinity();
    rec.reward = 0.0;
  }
  rec.seconds = seconds_since(start);
  return rec;
}

namespace {

bool meets_stop(const CandidateRecord& c, const Dataset& train, const SearchConfig& config) {
  if (c.reward > config.reward_threshold) return true;
  if (config.stop_r2 && !c.failed && std::isfinite(c.mse)) {
    try {
      const double r2 = r_squared(train.y, evaluate(c.refined, train.x, false));
      if (std::isfinite(r2) && r2 >= *config.stop_r2) return true;
    } catch (const std::invalid_argument&) {
    }
  }
  return false;
}

}  // namespace

SearchResult run_search(const Dataset& train, const SearchConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  train.validate();
  const auto start = Clock::now();

  SearchResult result;
  result.controller = init_controller(config.controller, derive_seed(config.seed, {0}));
  PolicyStepper stepper(config.optimizer, config.controller_lr);
  bool have_best = false;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    Rng rng(derive_seed(config.seed, {1, epoch}));
    std::vector<CandidateRecord> batch(config.batch);
    std::vector<EpisodeSample> samples;
    samples.reserve(config.batch);
    for (std::size_t j = 0; j < config.batch; ++j) samples.push_back(sample_architecture(result.controller, rng));

    // Candidates past the lowest index that met the stop rule are skipped;
    // every lower index still runs, so the outcome does not depend on timing.
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> stop_at{config.batch};
    auto worker = [&] {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= config.batch) return;
        if (j > stop_at.load()) continue;
        CandidateRecord rec =
            evaluate_candidate(samples[j].descriptor, train, config, derive_seed(config.seed, {2, epoch, j}));
        rec.epoch = epoch;
        rec.index = j;
        rec.sample = samples[j];
        const bool stop = meets_stop(rec, train, config);
        batch[j] = std::move(rec);
        if (stop) {
          std::size_t cur = stop_at.load();
          while (j < cur && !stop_at.compare_exchange_weak(cur, j)) {
          }
        }
      }
    };
    const std::size_t threads = std::min(config.workers, config.batch);
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    const std::size_t hit = stop_at.load();
    const std::size_t evaluated = hit < config.batch ? hit + 1 : config.batch;
    EpochSummary summary;
    summary.epoch = epoch;
    for (std::size_t j = 0; j < evaluated; ++j) {
      const CandidateRecord& c = batch[j];
      summary.rewards.push_back(c.reward);
      summary.expressions.push_back(c.failed ? std::string() : to_string(c.refined));
      if (!have_best || c.reward > result.best.reward) {
        result.best = c;
        have_best = true;
      }
    }
    double total = 0.0;
    for (double r : summary.rewards) total += r;
    summary.mean_reward = total / static_cast<double>(summary.rewards.size());
    result.epochs_run = epoch + 1;

    if (hit < config.batch) {
      result.best = batch[hit];
      result.early_stopped = true;
    } else {
      const PolicyGradient pg = policy_update(result.controller, batch, config, stepper);
      summary.threshold = pg.threshold;
      summary.survivors = pg.survivors;
    }
    summary.best_reward = result.best.reward;
    summary.best_expression = result.best.failed ? std::string() : to_string(result.best.refined);
    summary.seconds = seconds_since(epoch_start);
    result.history.push_back(summary);
    if (on_epoch) on_epoch(summary);
    if (result.early_stopped) break;
  }
  result.seconds = seconds_since(start);
  return result;
}

nlohmann::json history_to_json(const SearchResult& result) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.history) {
    epochs.push_back({{"epoch", e.epoch},
                      {"rewards", e.rewards},
                      {"expressions", e.expressions},
                      {"threshold", e.threshold},
                      {"survivors", e.survivors},
                      {"mean_reward", e.mean_reward},
                      {"best_reward", e.best_reward},
                      {"best_expression", e.best_expression},
                      {"seconds", e.seconds}});
  }
  const CandidateRecord& b = result.best;
  return {{"epochs_run", result.epochs_run},
          {"early_stopped", result.early_stopped},
          {"seconds", result.seconds},
          {"best",
           {{"epoch", b.epoch},
            {"index", b.index},
            {"architecture", b.sample.descriptor.str()},
            {"expression", b.failed ? std::string() : to_string(b.refined, {17})},
            {"mse", std::isfinite(b.mse) ? nlohmann::json(b.mse) : nlohmann::json(nullptr)},
            {"reward", b.reward}}},
          {"epochs", epochs}};
}

}  // namespace netsr

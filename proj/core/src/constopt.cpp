#include "netsr/constopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "netsr/autodiff.hpp"
#include "netsr/rng.hpp"

namespace netsr {

double guarded_mse(const Expression& e, const Dataset& data) {
  const std::vector<double> pred = evaluate(e, data.x, true);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - data.y[i];
    s += r * r;
  }
  return s / static_cast<double>(pred.size());
}

namespace {

// Objective and gradient over the constant vector, recorded on a reused tape.
class Objective {
 public:
  Objective(const Expression& e, const Dataset& data) : expr_(e), data_(data) {
    for (std::size_t j = 0; j < data.x.cols; ++j) {
      std::vector<double> col(data.x.rows);
      for (std::size_t i = 0; i < data.x.rows; ++i) col[i] = data.x(i, j);
      columns_.push_back(std::move(col));
    }
  }

  double operator()(const std::vector<double>& c, std::vector<double>& grad) {
    tape_.clear();
    std::vector<ad::Var> leaves;
    leaves.reserve(c.size());
    for (double v : c) leaves.push_back(tape_.scalar(v));
    std::vector<ad::Var> cols;
    for (const auto& col : columns_) cols.push_back(tape_.vector(col));
    ad::Var pred = to_tape(expr_, leaves, cols, true);
    ad::Var target = tape_.vector(data_.y);
    ad::Var loss = ad::mean(ad::square(pred - target));
    const double f = loss.item();
    grad.assign(c.size(), 0.0);
    if (!std::isfinite(f)) return f;
    tape_.backward(loss);
    for (std::size_t k = 0; k < c.size(); ++k) grad[k] = leaves[k].grad()[0];
    return f;
  }

 private:
  const Expression& expr_;
  const Dataset& data_;
  std::vector<std::vector<double>> columns_;
  ad::Tape tape_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Run {
  std::vector<double> x;
  double f;
  std::size_t iterations;
  bool converged;
};

Run bfgs(Objective& objective, std::vector<double> x, const RefineConfig& cfg) {
  const std::size_t k = x.size();
  std::vector<double> g;
  double f = objective(x, g);
  Run run{x, f, 0, false};
  if (!std::isfinite(f) || !all_finite(g)) return run;

  // Inverse Hessian approximation, row-major k x k.
  std::vector<double> h(k * k, 0.0);
  auto reset = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) h[i * k + i] = 1.0;
  };
  reset();
  bool scaled = false;

  std::vector<double> d(k), x_new(k), g_new(k), s(k), y(k), hy(k);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    if (inf_norm(g) < cfg.gradient_tolerance) {
      run.converged = true;
      break;
    }
    for (std::size_t i = 0; i < k; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc -= h[i * k + j] * g[j];
      d[i] = acc;
    }
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      reset();
      scaled = false;
      for (std::size_t i = 0; i < k; ++i) d[i] = -g[i];
      slope = dot(g, d);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (std::size_t halving = 0; halving <= cfg.max_halvings; ++halving) {
      for (std::size_t i = 0; i < k; ++i) x_new[i] = x[i] + step * d[i];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && all_finite(g_new) && f_new <= f + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    run.iterations = it + 1;
    if (!accepted) break;

    for (std::size_t i = 0; i < k; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      if (!scaled) {
        // Rescale the initial approximation before the first update.
        const double gamma = sy / dot(y, y);
        for (std::size_t i = 0; i < k; ++i) h[i * k + i] = gamma;
        scaled = true;
      }
      for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += h[i * k + j] * y[j];
        hy[i] = acc;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          h[i * k + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }
  if (inf_norm(g) < cfg.gradient_tolerance) run.converged = true;
  run.x = x;
  run.f = f;
  return run;
}

}  // namespace

RefineResult refine(const Expression& e, const Dataset& data, const RefineConfig& config) {
  data.validate();
  RefineResult out;
  out.expression = e;
  out.initial_mse = guarded_mse(e, data);
  out.mse = out.initial_mse;

  const std::vector<double> start = constants(e);
  if (start.empty()) {
    out.converged = std::isfinite(out.mse);
    return out;
  }
  if (!std::isfinite(out.initial_mse)) return out;

  Objective objective(e, data);
  Rng rng(config.seed);
  const std::size_t starts = std::max<std::size_t>(config.restarts, 1);
  for (std::size_t r = 0; r < starts; ++r) {
    std::vector<double> x0 = start;
    if (r > 0) {
      for (double& v : x0) v = v * (1.0 + 0.5 * rng.normal()) + 0.1 * rng.normal();
    }
    const Run run = bfgs(objective, x0, config);
    out.iterations += run.iterations;
    if (!std::isfinite(run.f) || !all_finite(run.x)) continue;
    Expression candidate = with_constants(e, run.x);
    // Score with the same evaluator as the initial MSE so the comparison is exact.
    const double mse = guarded_mse(candidate, data);
    if (std::isfinite(mse) && mse <= out.mse) {
      out.expression = std::move(candidate);
      out.mse = mse;
      out.converged = run.converged;
    } else if (r == 0) {
      out.converged = false;
    }
  }
  return out;
}

}  // namespace netsr

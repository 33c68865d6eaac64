#include "gmeta/meta_grad.hpp"

namespace gmeta {

AdaptResult adapt(ad::Tape& tape, InnerLoopObjective& objective, std::span<const ad::Var> theta0,
                  double alpha, int steps, MamlMode mode) {
  if (steps < 0) throw std::invalid_argument("inner step count must be >= 0");
  if (steps > 0 && !(alpha > 0.0)) {
    // alpha == 0 is allowed (no adaptation) but must not be negative or NaN.
    if (!(alpha == 0.0)) throw std::invalid_argument("inner learning rate must be >= 0");
  }
  AdaptResult r;
  r.params.assign(theta0.begin(), theta0.end());
  const bool create_graph = mode == MamlMode::Full;

  if (steps == 0) {
    try {
      r.support_losses.push_back(tape.value(objective.support_loss(tape, r.params)).item());
      r.query_loss = objective.query_loss(tape, r.params);
    } catch (const ad::NumericalError& e) {
      throw DivergenceError(0, e.what());
    }
    return r;
  }

  for (int step = 1; step <= steps; ++step) {
    try {
      const ad::Var loss = objective.support_loss(tape, r.params);
      r.support_losses.push_back(tape.value(loss).item());
      const auto grads = tape.gradient(loss, r.params, create_graph);
      std::vector<ad::Var> next(r.params.size());
      for (std::size_t i = 0; i < next.size(); ++i)
        next[i] = tape.sub(r.params[i], tape.scale(grads[i], alpha));
      r.params = std::move(next);
      if (step == steps) r.query_loss = objective.query_loss(tape, r.params);
    } catch (const ad::NumericalError& e) {
      throw DivergenceError(step, e.what());
    }
  }
  return r;
}

MetaGradient grad_through_updates(InnerLoopObjective& objective, const ParamSet& theta0,
                                  double alpha, int steps, MamlMode mode) {
  ad::Tape tape;
  const auto vars = theta0.bind(tape);
  AdaptResult r = adapt(tape, objective, vars, alpha, steps, mode);
  MetaGradient out;
  out.query_loss = tape.value(r.query_loss).item();
  out.support_losses = std::move(r.support_losses);
  std::vector<ad::Var> g;
  try {
    g = tape.gradient(r.query_loss, vars, false);
  } catch (const ad::NumericalError& e) {
    throw DivergenceError(steps, e.what());
  }
  out.grad = theta0.read(tape, g);
  return out;
}

}  // namespace gmeta

#pragma once

// Gradients through a chain of inner SGD updates.

#include <stdexcept>
#include <string>
#include <vector>

#include "gmeta/params.hpp"
#include "gmeta/tape.hpp"

namespace gmeta {

enum class MamlMode { Full, FirstOrder };

/// Per-task losses for the inner/outer loops. support_loss is called once per
/// inner step (on the pre-update parameters) and may stash state, such as
/// class prototypes, that the following query_loss call consumes.
class InnerLoopObjective {
 public:
  virtual ~InnerLoopObjective() = default;
  virtual ad::Var support_loss(ad::Tape& tape, std::span<const ad::Var> params) = 0;
  virtual ad::Var query_loss(ad::Tape& tape, std::span<const ad::Var> params) = 0;
};

/// Thrown when a loss turns non-finite inside the inner loop.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error("divergence at inner step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct AdaptResult {
  std::vector<ad::Var> params;  // theta after the last inner step
  ad::Var query_loss;           // query loss at the adapted parameters
  std::vector<double> support_losses;
};

/// Runs `steps` inner updates theta_j = theta_{j-1} - alpha * grad L_support,
/// starting from `theta0` (already on the tape), then evaluates the query
/// loss. With steps == 0 the support pass still runs (to build any state the
/// query needs) but no update happens. In Full mode the update chain stays
/// differentiable; in FirstOrder mode inner gradients are constants.
AdaptResult adapt(ad::Tape& tape, InnerLoopObjective& objective, std::span<const ad::Var> theta0,
                  double alpha, int steps, MamlMode mode);

struct MetaGradient {
  double query_loss = 0.0;
  ParamSet grad;
  std::vector<double> support_losses;
};

/// d(query loss after `steps` inner updates) / d(theta0).
MetaGradient grad_through_updates(InnerLoopObjective& objective, const ParamSet& theta0,
                                  double alpha, int steps, MamlMode mode = MamlMode::Full);

}  // namespace gmeta

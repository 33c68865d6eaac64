#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gmeta/tape.hpp"
#include "gmeta/tensor.hpp"

namespace gmeta {

/// Ordered collection of named parameter tensors.
class ParamSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  const std::vector<std::string>& names() const { return names_; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;

  /// this += alpha * other (shapes must match).
  ParamSet& axpy(double alpha, const ParamSet& other);
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  /// Record every tensor as a tape variable.
  std::vector<ad::Var> bind(ad::Tape& tape) const;
  /// Same names/layout as *this, values read from the tape.
  ParamSet read(const ad::Tape& tape, std::span<const ad::Var> vars) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// JSON checkpoint: {"params": [{"name", "shape": [r, c], "values": [...]}]}
std::string params_to_json(const ParamSet& p);
ParamSet params_from_json(const std::string& text);
void save_params(const std::filesystem::path& path, const ParamSet& p);
ParamSet load_params(const std::filesystem::path& path);

}  // namespace gmeta

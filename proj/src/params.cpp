#include "gmeta/params.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gmeta {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

bool ParamSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

Tensor& ParamSet::at(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (!tensors_[i].same_shape(other.tensors_[i])) return false;
  return true;
}

ParamSet& ParamSet::axpy(double alpha, const ParamSet& other) {
  if (!same_layout(other)) throw std::invalid_argument("ParamSet::axpy: layout mismatch");
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    kernels::active().axpy(alpha, other.tensors_[i].data(), tensors_[i].data(),
                           tensors_[i].size());
  return *this;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    z.add(names_[i], Tensor(tensors_[i].rows(), tensors_[i].cols()));
  return z;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& t : tensors_) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

void ParamSet::assign_flat(std::span<const double> values) {
  if (values.size() != scalar_count()) throw std::invalid_argument("assign_flat: wrong length");
  std::size_t off = 0;
  for (auto& t : tensors_) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), t.size(), t.data());
    off += t.size();
  }
}

std::vector<ad::Var> ParamSet::bind(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(tensors_.size());
  for (const auto& t : tensors_) vars.push_back(tape.variable(t));
  return vars;
}

ParamSet ParamSet::read(const ad::Tape& tape, std::span<const ad::Var> vars) const {
  if (vars.size() != tensors_.size()) throw std::invalid_argument("ParamSet::read: arity");
  ParamSet out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Tensor& v = tape.value(vars[i]);
    if (!v.same_shape(tensors_[i])) throw std::invalid_argument("ParamSet::read: shape");
    out.add(names_[i], v);
  }
  return out;
}

std::string params_to_json(const ParamSet& p) {
  nlohmann::json j;
  j["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    j["params"].push_back({{"name", p.names()[i]},
                           {"shape", {p[i].rows(), p[i].cols()}},
                           {"values", std::vector<double>(p[i].values().begin(),
                                                          p[i].values().end())}});
  }
  return j.dump(1);
}

ParamSet params_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ParamSet p;
  for (const auto& e : j.at("params")) {
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw std::runtime_error("parameter shape must have two dims");
    p.add(e.at("name").get<std::string>(),
          Tensor(shape[0], shape[1], e.at("values").get<std::vector<double>>()));
  }
  return p;
}

void save_params(const std::filesystem::path& path, const ParamSet& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << params_to_json(p) << '\n';
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

}  // namespace gmeta

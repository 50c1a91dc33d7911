// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/nn/parameters.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl::nn {

Tensor ParameterStore::create(const std::string& name, Shape shape, std::vector<double> values) {
  if (params_.count(name)) throw ContractViolation("duplicate parameter name: " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  params_.emplace(name, t);
  return t;
}

Tensor ParameterStore::create_normal(const std::string& name, Shape shape, double std, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = std * rng.normal();
  return create(name, std::move(shape), std::move(values));
}

Tensor ParameterStore::create_zeros(const std::string& name, Shape shape) {
  const std::size_t n = shape_size(shape);
  return create(name, std::move(shape), std::vector<double>(n, 0.0));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

Tensor ParameterStore::squared_norm() const {
  std::vector<Tensor> parts;
  parts.reserve(params_.size());
  for (const auto& [_, t] : params_) parts.push_back(sum(square(t)));
  if (parts.empty()) return Tensor::scalar(0.0);
  Tensor total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return total;
}

ParameterStore::Snapshot ParameterStore::snapshot() const {
  Snapshot s;
  for (const auto& [name, t] : params_) s.emplace(name, std::vector<double>(t.data().begin(), t.data().end()));
  return s;
}

void ParameterStore::restore(const Snapshot& snapshot) {
  if (snapshot.size() != params_.size()) throw ContractViolation("snapshot size mismatch");
  for (auto& [name, t] : params_) {
    auto it = snapshot.find(name);
    if (it == snapshot.end() || it->second.size() != t.size()) {
      throw ContractViolation("snapshot does not match parameter " + name);
    }
    auto dst = t.mutable_data();
    std::copy(it->second.begin(), it->second.end(), dst.begin());
  }
}

void ParameterStore::save(std::ostream& out) const {
  out << "cmbrl-params v1 " << params_.size() << '\n';
  out << std::hexfloat;
  for (const auto& [name, t] : params_) {
    out << name << ' ' << t.shape().size();
    for (auto d : t.shape()) out << ' ' << d;
    for (double v : t.data()) out << ' ' << v;
    out << '\n';
  }
  out << std::defaultfloat;
}

void ParameterStore::load(std::istream& in) {
  std::string magic, version;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != "cmbrl-params" || version != "v1") {
    throw ContractViolation("not a cmbrl-params v1 checkpoint");
  }
  if (count != params_.size()) {
    throw ContractViolation("checkpoint holds " + std::to_string(count) + " parameters, store has " +
                            std::to_string(params_.size()));
  }
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rank = 0;
    in >> name >> rank;
    Shape shape(rank);
    for (auto& d : shape) in >> d;
    auto it = params_.find(name);
    if (!in || it == params_.end() || it->second.shape() != shape) {
      throw ContractViolation("checkpoint parameter mismatch at '" + name + "'");
    }
    auto dst = it->second.mutable_data();
    for (auto& v : dst) {
      // operator>> does not parse hexfloat reliably across library versions
      std::string token;
      in >> token;
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (token.empty() || end != token.c_str() + token.size()) {
        throw ContractViolation("checkpoint: bad value '" + token + "' in " + name);
      }
    }
  }
}

void ParameterStore::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  save(out);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

void ParameterStore::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  load(in);
}

}  // namespace cmbrl::nn

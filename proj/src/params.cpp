#include "dgon/params.hpp"

#include <cmath>

#include "dgon/errors.hpp"

namespace dgon {

ParamId ParamStore::add(std::string name, Tensor initial) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Entry e;
  e.grad = Tensor::zeros_like(initial);
  e.first_moment = Tensor::zeros_like(initial);
  e.second_moment = Tensor::zeros_like(initial);
  e.value = std::move(initial);
  e.name = std::move(name);
  entries_.push_back(std::move(e));
  return ParamId{entries_.size() - 1};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::reset_optimizer() {
  for (auto& e : entries_) {
    e.first_moment.fill(0.0);
    e.second_moment.fill(0.0);
  }
  step_count_ = 0;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  for (const auto& e : store.entries_) {
    if (!e.grad.all_finite()) {
      throw DivergenceError("non-finite gradient in parameter '" + e.name + "'");
    }
  }
  ++store.step_count_;
  const double t = static_cast<double>(store.step_count_);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& e : store.entries_) {
    auto w = e.value.data();
    auto g = e.grad.data();
    auto m = e.first_moment.data();
    auto v = e.second_moment.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    e.grad.fill(0.0);
  }
}

}  // namespace dgon

#include "mvmt/param_store.hpp"

#include <cmath>

#include "mvmt/errors.hpp"

namespace mvmt {

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
    if (entries_.count(name)) raise(ErrorKind::State, "parameter already registered: " + name);
    Entry e;
    e.value = Tensor::zeros(shape);
    e.grad = Tensor::zeros(shape);
    e.adam_m = Tensor::zeros(shape);
    e.adam_v = Tensor::zeros(std::move(shape));
    return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::add_glorot(const std::string& name, std::vector<std::size_t> shape,
                               std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor& value = add(name, std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : value.data()) v = rng.uniform(-bound, bound);
    return value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) raise(ErrorKind::Lookup, "unknown parameter: " + name);
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) raise(ErrorKind::Lookup, "unknown parameter: " + name);
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

ag::Var ParamStore::bind(const std::string& name) {
    auto bound = bound_.find(name);
    if (bound != bound_.end()) return bound->second;
    ag::Var var = ag::leaf(entry(name).value);
    bound_.emplace(name, var);
    return var;
}

void ParamStore::collect_gradients() {
    for (auto& [name, var] : bound_) {
        if (!var->grad.empty()) entries_.at(name).grad += var->grad;
    }
    bound_.clear();
}

void ParamStore::zero_gradients() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::adam_step(double learning_rate, const AdamConfig& config) {
    if (!bound_.empty()) {
        raise(ErrorKind::State, "adam_step with uncollected gradients; call collect_gradients first");
    }
    if (!(learning_rate > 0.0)) raise(ErrorKind::Domain, "learning rate must be positive");
    for (auto& [name, e] : entries_) {
        if (e.grad.size() != e.value.size()) {
            raise(ErrorKind::State, "missing gradient for parameter " + name);
        }
        e.step += 1;
        const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(e.step));
        const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(e.step));
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            e.adam_m[i] = config.beta1 * e.adam_m[i] + (1.0 - config.beta1) * g;
            e.adam_v[i] = config.beta2 * e.adam_v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = e.adam_m[i] / bc1;
            const double v_hat = e.adam_v[i] / bc2;
            e.value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
        e.grad.fill(0.0);
    }
}

} // namespace mvmt

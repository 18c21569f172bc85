#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvmt/autograd.hpp"
#include "mvmt/rng.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Named trainable tensors with their gradient slots and Adam state.
/// Iteration order is the lexicographic name order of the underlying map,
/// which keeps every downstream consumer (updates, checkpoints, gradient
/// checks) deterministic.
class ParamStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor adam_m;
        Tensor adam_v;
        std::uint64_t step = 0;
    };

    /// Register a parameter initialized to zeros.
    Tensor& add(const std::string& name, std::vector<std::size_t> shape);
    /// Register with uniform [-a, a] init, a = sqrt(6 / (fan_in + fan_out)).
    Tensor& add_glorot(const std::string& name, std::vector<std::size_t> shape,
                       std::size_t fan_in, std::size_t fan_out, Rng& rng);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;
    Tensor& value(const std::string& name) { return entry(name).value; }
    const Tensor& grad(const std::string& name) const { return entry(name).grad; }

    std::size_t size() const { return entries_.size(); }
    std::vector<std::string> names() const;

    /// Bind a parameter into the current computation graph. Repeated binds of
    /// the same name between gradient collections return the same node, so a
    /// parameter reused across time steps accumulates one combined gradient.
    ag::Var bind(const std::string& name);

    /// Move gradients out of bound graph leaves into the store slots and
    /// release the graph references. Graph handles built before this call are
    /// detached afterwards: backward through them no longer reaches the store.
    void collect_gradients();

    bool has_pending_bindings() const { return !bound_.empty(); }

    void zero_gradients();

    /// Bias-corrected Adam update on every parameter; increments step counts
    /// and zeroes gradients afterwards.
    void adam_step(double learning_rate, const AdamConfig& config = {});

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [name, entry] : entries_) fn(name, entry);
    }
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& [name, entry] : entries_) fn(name, entry);
    }

private:
    std::map<std::string, Entry> entries_;
    std::map<std::string, ag::Var> bound_;
};

} // namespace mvmt

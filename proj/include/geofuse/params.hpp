#pragma once

#include <map>
#include <string>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/tensor.hpp"

namespace geofuse {

template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    bool learnable = true;  // false for BN running stats: never stepped
};

/// Named parameter tensors with gradient slots. Backed by std::map so every
/// iteration (init, SGD step, checkpointing) walks names in one fixed order.
template <typename T>
class ParamStore {
  public:
    Param<T>& add(const std::string& name, const std::vector<int>& shape, bool learnable = true) {
        auto [it, fresh] = items_.try_emplace(name);
        if (!fresh) throw DataError("param '" + name + "' registered twice");
        it->second.value = Tensor<T>(shape);
        it->second.grad = Tensor<T>(shape);
        it->second.learnable = learnable;
        return it->second;
    }

    Param<T>& at(const std::string& name) {
        auto it = items_.find(name);
        if (it == items_.end()) throw DataError("unknown param '" + name + "'");
        return it->second;
    }
    const Param<T>& at(const std::string& name) const {
        auto it = items_.find(name);
        if (it == items_.end()) throw DataError("unknown param '" + name + "'");
        return it->second;
    }
    bool has(const std::string& name) const { return items_.count(name) != 0; }

    void zero_grads() {
        for (auto& [name, p] : items_) p.grad.fill(T(0));
    }

    std::size_t size() const { return items_.size(); }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

  private:
    std::map<std::string, Param<T>> items_;
};

}  // namespace geofuse

#pragma once

#include <map>
#include <string>
#include <vector>

#include "bit/num/tape.hpp"

namespace bit::num {

// Named parameter set. Parameters are persistent leaf tensors; iteration is
// always in sorted name order so updates and serialization are deterministic.
class ParamStore {
public:
    struct Entry {
        Tensor tensor;
        bool trainable = true;
    };

    Tensor& create(const std::string& name, Array init, bool trainable = true) {
        if (params_.count(name)) throw NumericError("parameter already exists: " + name);
        auto& e = params_[name];
        e.tensor = Tensor::leaf(std::move(init), /*requires_grad=*/true);
        e.trainable = trainable;
        return e.tensor;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw NumericError("unknown parameter: " + name);
        return it->second.tensor;
    }

    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw NumericError("unknown parameter: " + name);
        return it->second.tensor;
    }

    bool trainable(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw NumericError("unknown parameter: " + name);
        return it->second.trainable;
    }

    void set_trainable(const std::string& name, bool v) {
        auto it = params_.find(name);
        if (it == params_.end()) throw NumericError("unknown parameter: " + name);
        it->second.trainable = v;
    }

    void zero_grad() {
        for (auto& [name, e] : params_) e.tensor.zero_grad();
    }

    size_t count() const { return params_.size(); }

    int64_t scalar_count() const {
        int64_t n = 0;
        for (const auto& [name, e] : params_) n += e.tensor.value().size();
        return n;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, e] : params_) out.push_back(name);
        return out;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Entry> params_;
};

}  // namespace bit::num

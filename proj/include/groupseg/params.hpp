#pragma once

#include <map>
#include <string>

#include "groupseg/checkpoint.hpp"
#include "groupseg/rng.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

// Named registry of leaf parameter tensors. Iteration is name-ordered, which
// fixes the optimizer update order and the checkpoint record order.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor leaf);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    std::map<std::string, Tensor>::const_iterator begin() const { return params_.begin(); }
    std::map<std::string, Tensor>::const_iterator end() const { return params_.end(); }

    void fill_checkpoint(Checkpoint& ckpt) const;
    // Copies values in from records with matching names; every parameter must
    // be present with a matching shape.
    void load_from_checkpoint(const Checkpoint& ckpt);

private:
    std::map<std::string, Tensor> params_;
};

// Initializers used for all model parameters.
Tensor trunc_normal_param(Shape shape, double stddev, Rng& rng);
Tensor zeros_param(Shape shape);
Tensor ones_param(Shape shape);
Tensor scalar_param(double v);

}  // namespace groupseg

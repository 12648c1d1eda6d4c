#include "groupseg/params.hpp"

namespace groupseg {

Tensor ParamStore::add(const std::string& name, Tensor leaf) {
    if (!leaf.node->parents.empty())
        throw dim_error("parameter '" + name + "' must be a leaf tensor");
    if (!params_.emplace(name, leaf).second)
        throw dim_error("duplicate parameter name '" + name + "'");
    return leaf;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw dim_error("unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::fill_checkpoint(Checkpoint& ckpt) const {
    for (const auto& [name, t] : params_) ckpt.put(name, t.shape(), t.value());
}

void ParamStore::load_from_checkpoint(const Checkpoint& ckpt) {
    for (auto& [name, t] : params_) {
        const auto& rec = ckpt.get(name);
        if (rec.shape != t.shape())
            throw data_error("checkpoint tensor '" + name + "' has shape " +
                             shape_str(rec.shape) + ", model expects " + shape_str(t.shape()));
        t.node->value = rec.data;
        t.node->grad.clear();
    }
}

Tensor trunc_normal_param(Shape shape, double stddev, Rng& rng) {
    std::int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = rng.truncated_normal(stddev);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

Tensor scalar_param(double v) { return Tensor::scalar(v, true); }

}  // namespace groupseg

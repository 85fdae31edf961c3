#include "powertrace/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "powertrace/errors.hpp"

namespace powertrace {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_)) {
        throw ShapeError("tensor of shape " + shape_to_string(shape_) + " given " + std::to_string(data_.size()) +
                         " values");
    }
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::size_t ParamStore::add(std::string name, Tensor init) {
    for (const auto& p : params_) {
        if (p.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
    Parameter p;
    p.name = std::move(name);
    p.grad = Tensor(init.shape());
    p.m = Tensor(init.shape());
    p.v = Tensor(init.shape());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    throw DataError("no parameter named '" + name + "'");
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::vector<Tensor> ParamStore::snapshot() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ParamStore::restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw ShapeError("snapshot has the wrong number of tensors");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape() != params_[i].value.shape()) {
            throw ShapeError("snapshot tensor " + params_[i].name + " has shape " + shape_to_string(values[i].shape()) +
                             ", expected " + shape_to_string(params_[i].value.shape()));
        }
        params_[i].value = values[i];
    }
}

}  // namespace powertrace

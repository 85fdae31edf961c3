#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace powertrace {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& vector() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double item() const;
    Tensor reshaped(Shape shape) const;
    bool all_finite() const;
    void fill(double v);

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    // Adam first and second moments.
    Tensor m;
    Tensor v;
};

// Named trainable tensors plus optimizer state. Layout is fixed once a model is built.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor init);

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::size_t index_of(const std::string& name) const;

    std::size_t scalar_count() const;
    void zero_grad();

    std::vector<Tensor> snapshot() const;
    void restore(const std::vector<Tensor>& values);

    std::int64_t step = 0;
    std::uint64_t init_seed = 0;

private:
    std::vector<Parameter> params_;
};

}  // namespace powertrace

#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace forchestra::nn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Cache-line aligned so vectorized kernels split loops the same way on
/// every allocation; otherwise reductions round differently run to run.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }

    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    /// Throws DimensionError when data.size() != product(shape).
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    /// 1-D tensor holding `values`.
    static Tensor vector(std::vector<double> values);
    /// 2-D tensor from nested rows; rows must have equal length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }
    /// Copy of the elements.
    std::vector<double> values() const { return {data_.begin(), data_.end()}; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;

    /// Value of a single-element tensor.
    double item() const;

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double value);
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Storage data_;
};

}  // namespace forchestra::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace msdci {

/// Dense row-major tensor of doubles, rank 1..4.
/// Images and feature maps use the layout batch x channel x height x width.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors for rank-4 tensors.
    double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double v);
    bool all_finite() const;

    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

/// Throws std::invalid_argument naming `op` and both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// Elementwise arithmetic (shapes must match exactly; no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs(const Tensor& a);

// MSDT container: magic "MSDT", u32 version, u32 rank, u32 extents,
// then the payload as little-endian IEEE-754 f64.
void write_tensor(const Tensor& t, std::ostream& os);
Tensor read_tensor(std::istream& is);
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

}  // namespace msdci

#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace groupface {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Dense row-major float64 array with an optional gradient buffer.
///
/// Tensor is a handle: copies share the same storage, so a parameter held by
/// a model and the same parameter referenced from a recorded Graph operation
/// are one object. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  /// Builds an N x D matrix from nested rows; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return defined() && size() == 1; }

  std::span<double> data();
  std::span<const double> data() const;
  double& operator[](std::size_t i) { return data()[i]; }
  double operator[](std::size_t i) const { return data()[i]; }
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool has_grad() const;
  /// Allocates a zero gradient buffer if none exists.
  void ensure_grad();
  /// Allocates (if needed) and zeroes the gradient buffer.
  void zero_grad();
  void drop_grad();
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Writable gradient view through any handle. Backward closures hold const
  /// copies of their inputs but still accumulate into the shared buffer.
  std::span<double> grad_buffer() const;

  /// Deep copy of the values; the copy carries no gradient.
  Tensor clone() const;
  /// Row slice [begin, end) of a rank-2 tensor, copied.
  Tensor rows_slice(std::size_t begin, std::size_t end) const;

  /// True when both handles refer to the same storage.
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }
  const void* id() const { return storage_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool grad_allocated = false;
  };
  std::shared_ptr<Storage> storage_;

  Storage& storage();
  const Storage& storage() const;
};

}  // namespace groupface

#include "groupface/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace groupface {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (auto extent : shape) {
    if (extent == 0) throw std::invalid_argument("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill) : storage_(std::make_shared<Storage>()) {
  validate_shape(shape);
  storage_->values.assign(element_count(shape), fill);
  storage_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : storage_(std::make_shared<Storage>()) {
  validate_shape(shape);
  if (element_count(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + to_string(shape) + " needs " +
                                std::to_string(element_count(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  storage_->shape = std::move(shape);
  storage_->values = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw std::invalid_argument("matrix needs at least one row");
  const std::size_t width = rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * width);
  for (const auto& row : rows) {
    if (row.size() != width) throw std::invalid_argument("matrix rows must have equal length");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), width}, std::move(values));
}

Tensor::Storage& Tensor::storage() {
  if (!storage_) throw std::logic_error("use of an undefined tensor");
  return *storage_;
}

const Tensor::Storage& Tensor::storage() const {
  if (!storage_) throw std::logic_error("use of an undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::size() const { return storage().values.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows() needs a rank-2 tensor, got " + to_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols() needs a rank-2 tensor, got " + to_string(shape()));
  return shape()[1];
}

std::span<double> Tensor::data() { return storage().values; }
std::span<const double> Tensor::data() const { return storage().values; }

double& Tensor::at(std::size_t row, std::size_t col) { return storage().values[row * cols() + col]; }
double Tensor::at(std::size_t row, std::size_t col) const { return storage().values[row * cols() + col]; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() needs a single-element tensor, got " + to_string(shape()));
  return storage().values.front();
}

bool Tensor::has_grad() const { return storage_ && storage_->grad_allocated; }

void Tensor::ensure_grad() {
  auto& s = storage();
  if (!s.grad_allocated) {
    s.grad.assign(s.values.size(), 0.0);
    s.grad_allocated = true;
  }
}

void Tensor::zero_grad() {
  ensure_grad();
  std::fill(storage().grad.begin(), storage().grad.end(), 0.0);
}

void Tensor::drop_grad() {
  auto& s = storage();
  s.grad.clear();
  s.grad.shrink_to_fit();
  s.grad_allocated = false;
}

std::span<double> Tensor::grad() {
  if (!has_grad()) throw std::logic_error("tensor " + to_string(shape()) + " has no gradient buffer");
  return storage().grad;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor " + to_string(shape()) + " has no gradient buffer");
  return storage().grad;
}

std::span<double> Tensor::grad_buffer() const {
  if (!has_grad()) throw std::logic_error("tensor " + to_string(shape()) + " has no gradient buffer");
  return storage_->grad;
}

Tensor Tensor::clone() const {
  const auto& s = storage();
  return Tensor(s.shape, s.values);
}

Tensor Tensor::rows_slice(std::size_t begin, std::size_t end) const {
  const std::size_t width = cols();
  if (begin >= end || end > rows()) {
    throw std::invalid_argument("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") out of range for " + to_string(shape()));
  }
  const auto values = data();
  return Tensor({end - begin, width},
                std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(begin * width),
                                    values.begin() + static_cast<std::ptrdiff_t>(end * width)));
}

}  // namespace groupface

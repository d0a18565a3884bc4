// Copyright 2026 The bert4rec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bert4rec {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage shared by all handles of one tensor. `grad` stays empty until the
// backward pass (or zero_grad) touches it.
struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
};

// Dense row-major float64 array with shape metadata. Copies of a Tensor are
// handles to the same storage, so a parameter table can be used in several
// places of the graph (tied embeddings) and updated in exactly one spot.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }

  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return data_->shape.at(axis); }
  std::size_t numel() const { return data_->values.size(); }

  std::span<const double> values() const { return data_->values; }
  // Writable view; used by optimizers, initializers, and finite differences.
  std::span<double> mutable_values() { return data_->values; }
  double item() const;
  double operator[](std::size_t i) const { return data_->values[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }

  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const double> grad() const { return data_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }
  const std::shared_ptr<TensorData>& storage() const { return data_; }

  Tensor clone() const;

 private:
  explicit Tensor(std::shared_ptr<TensorData> data) : data_(std::move(data)) {}

  std::shared_ptr<TensorData> data_;
};

// Ordered record of primitive operations executed during one forward pass.
// Operations record themselves only while a Tape is active on the current
// thread (see Tape::Scope) and at least one input requires a gradient;
// without an active tape the same code runs as plain inference.
class Tape {
 public:
  struct Record {
    const char* op;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward;
  };

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(const char* op, const Tensor& output, std::function<void()> backward);
  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  void clear() { records_.clear(); }

 private:
  std::vector<Record> records_;
};

// Reverse-mode sweep from a scalar loss. Replays the tape in reverse order,
// accumulating into the grad of every tensor that requires one, then clears
// the tape. Callers zero parameter grads beforehand so that parameters not
// reached by the loss end with zero gradients.
void backward(const Tensor& loss, Tape& tape);

// Keeps freed tensor buffers in the process heap instead of returning them to
// the OS after every step. Process-wide; safe to call repeatedly.
void retain_freed_memory();

}  // namespace bert4rec

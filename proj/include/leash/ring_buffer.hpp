#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace leash {

/// Fixed-capacity FIFO that overwrites its oldest entry. Storage is allocated
/// once at construction.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : data_(capacity) { assert(capacity > 0); }

  void push(const T& value) {
    data_[head_] = value;
    head_ = (head_ + 1) % data_.size();
    if (size_ < data_.size()) ++size_;
  }

  /// ago = 0 is the newest element.
  const T& back(std::size_t ago = 0) const {
    assert(ago < size_);
    return data_[(head_ + data_.size() - 1 - ago) % data_.size()];
  }

  /// i = 0 is the oldest retained element.
  const T& operator[](std::size_t i) const { return back(size_ - 1 - i); }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return data_.size(); }
  bool full() const { return size_ == data_.size(); }
  std::size_t heap_bytes() const { return data_.capacity() * sizeof(T); }

 private:
  std::vector<T> data_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace leash

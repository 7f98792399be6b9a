#pragma once

#include <algorithm>
#include <cstddef>

namespace hvox {

// Byte accounting for construction working state. Tracks the running total
// and its high-water mark; it does not see the output buffer.
class MemoryAccount {
 public:
  void acquire(std::size_t bytes) {
    current_ += bytes;
    peak_ = std::max(peak_, current_);
  }
  void release(std::size_t bytes) { current_ -= std::min(bytes, current_); }

  std::size_t current() const { return current_; }
  std::size_t peak() const { return peak_; }

 private:
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

// RAII charge against an optional account.
class ScopedCharge {
 public:
  ScopedCharge(MemoryAccount* account, std::size_t bytes) : account_(account), bytes_(bytes) {
    if (account_) account_->acquire(bytes_);
  }
  ~ScopedCharge() {
    if (account_) account_->release(bytes_);
  }
  ScopedCharge(const ScopedCharge&) = delete;
  ScopedCharge& operator=(const ScopedCharge&) = delete;

 private:
  MemoryAccount* account_;
  std::size_t bytes_;
};

}  // namespace hvox

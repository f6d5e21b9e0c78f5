// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

// Tracked working-set accounting.
//
// Workspace buffers of the neighbor search, the completion model and the
// objectives register their size here. Counters are per thread, so a case
// evaluated on one worker reports only its own peak.
namespace shapefill::memtrack {

void acquire(std::size_t bytes);
void release(std::size_t bytes);

std::size_t current();
std::size_t peak();

// Restart peak measurement from the current live size.
void reset_peak();

// RAII registration of a buffer size.
class Lease {
 public:
  Lease() = default;
  explicit Lease(std::size_t bytes) : bytes_(bytes) { acquire(bytes_); }
  Lease(const Lease&) = delete;
  Lease& operator=(const Lease&) = delete;
  Lease(Lease&& other) noexcept : bytes_(other.bytes_) { other.bytes_ = 0; }
  Lease& operator=(Lease&& other) noexcept {
    if (this != &other) {
      release(bytes_);
      bytes_ = other.bytes_;
      other.bytes_ = 0;
    }
    return *this;
  }
  ~Lease() { release(bytes_); }

  void grow(std::size_t bytes) {
    acquire(bytes);
    bytes_ += bytes;
  }
  std::size_t bytes() const { return bytes_; }

 private:
  std::size_t bytes_ = 0;
};

// Measures the peak reached while the scope is alive, relative to the live
// size at construction.
class PeakScope {
 public:
  PeakScope();
  ~PeakScope();
  PeakScope(const PeakScope&) = delete;
  PeakScope& operator=(const PeakScope&) = delete;

  std::size_t peak_bytes() const;

 private:
  std::size_t baseline_;
  std::size_t outer_peak_;
};

}  // namespace shapefill::memtrack

// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/memtrack.hpp"

#include <algorithm>

namespace shapefill::memtrack {
namespace {

thread_local std::size_t g_current = 0;
thread_local std::size_t g_peak = 0;

}  // namespace

void acquire(std::size_t bytes) {
  g_current += bytes;
  g_peak = std::max(g_peak, g_current);
}

void release(std::size_t bytes) { g_current -= std::min(bytes, g_current); }

std::size_t current() { return g_current; }
std::size_t peak() { return g_peak; }
void reset_peak() { g_peak = g_current; }

PeakScope::PeakScope() : baseline_(g_current), outer_peak_(g_peak) { g_peak = g_current; }

PeakScope::~PeakScope() { g_peak = std::max(outer_peak_, g_peak); }

std::size_t PeakScope::peak_bytes() const { return g_peak - std::min(baseline_, g_peak); }

}  // namespace shapefill::memtrack

// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "shapefill/io.hpp"

namespace shapefill::io {

// Inflates a gzip or zlib stream; ValidationError on corrupt input.
std::string gunzip(std::string_view compressed);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace shapefill::io

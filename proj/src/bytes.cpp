// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/bytes.hpp"

#include <fstream>
#include <iterator>

namespace spac {

std::vector<uint8_t>
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorCode::kIoError, "cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void
write_file(const std::string& path, std::span<const uint8_t> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out)
    fail(ErrorCode::kIoError, "write failed for " + path);
}

}  // namespace spac

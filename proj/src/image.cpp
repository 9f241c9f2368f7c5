// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/image.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <string_view>

#include "farnet/errors.hpp"

namespace farnet {

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.channels != 3) throw DataError("ppm encoding needs 3 channels");
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') break;
    token.push_back(c);
    ++pos;
  }
  return token;
}

std::size_t parse_dim(const std::string& token, const std::string& source) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError(source + ": malformed ppm header");
  }
  return static_cast<std::size_t>(std::stoull(token));
}

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& source) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw DataError(source + ": not a binary ppm (P6)");
  Image image;
  image.width = parse_dim(next_token(bytes, pos), source);
  image.height = parse_dim(next_token(bytes, pos), source);
  if (parse_dim(next_token(bytes, pos), source) != 255) throw DataError(source + ": only maxval 255 is supported");
  ++pos;  // single whitespace byte before the raster
  image.channels = 3;
  const std::size_t expected = image.width * image.height * 3;
  if (image.width == 0 || image.height == 0 || pos > bytes.size() || bytes.size() - pos != expected) {
    throw DataError(source + ": truncated or oversized pixel payload");
  }
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return image;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write: " + path.string());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace farnet

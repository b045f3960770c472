#include "dsirc/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace dsirc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

using HeaderMap = std::map<std::string, std::string>;

HeaderMap parse_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ENVI header: " + path);

  HeaderMap keys;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (lower(trim(line)) == "envi") continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    // brace-delimited values may span lines
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos && std::getline(in, line)) value += " " + trim(line);
    }
    const auto it = keys.find(key);
    if (it != keys.end() && lower(it->second) != lower(value)) {
      throw IoError("ENVI header " + path + " declares '" + key + "' twice with different values");
    }
    keys[key] = value;
  }
  return keys;
}

const std::string& require(const HeaderMap& keys, const std::string& key, const std::string& path) {
  const auto it = keys.find(key);
  if (it == keys.end()) throw IoError("ENVI header " + path + " is missing '" + key + "'");
  return it->second;
}

long parse_int(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw IoError("ENVI header key '" + key + "' is not an integer: " + text);
}

// Maps (row, col, band) to the element offset inside a file of the given interleave.
std::size_t file_offset(Interleave il, std::size_t h, std::size_t w, std::size_t b, std::size_t row,
                        std::size_t col, std::size_t band) {
  switch (il) {
    case Interleave::Bsq: return (band * h + row) * w + col;
    case Interleave::Bil: return (row * b + band) * w + col;
    case Interleave::Bip: return (row * w + col) * b + band;
  }
  return 0;
}

}  // namespace

Interleave parse_interleave(const std::string& text) {
  const std::string v = lower(trim(text));
  if (v == "bsq") return Interleave::Bsq;
  if (v == "bil") return Interleave::Bil;
  if (v == "bip") return Interleave::Bip;
  throw IoError("unknown interleave '" + text + "' (expected bsq, bil or bip)");
}

std::string to_string(Interleave interleave) {
  switch (interleave) {
    case Interleave::Bsq: return "bsq";
    case Interleave::Bil: return "bil";
    case Interleave::Bip: return "bip";
  }
  return "bsq";
}

ImageCube load_envi(const std::string& header_path, const std::string& data_path) {
  const HeaderMap keys = parse_header(header_path);
  const long width = parse_int(require(keys, "samples", header_path), "samples");
  const long height = parse_int(require(keys, "lines", header_path), "lines");
  const long bands = parse_int(require(keys, "bands", header_path), "bands");
  const Interleave il = parse_interleave(require(keys, "interleave", header_path));
  const long data_type = parse_int(require(keys, "data type", header_path), "data type");
  const long byte_order = parse_int(require(keys, "byte order", header_path), "byte order");
  long offset = 0;
  if (const auto it = keys.find("header offset"); it != keys.end()) offset = parse_int(it->second, "header offset");

  if (width < 1 || height < 1 || bands < 1) {
    throw IoError("ENVI header " + header_path + " declares a non-positive dimension");
  }
  if (data_type != 4) {
    throw IoError("ENVI header " + header_path + ": only data type 4 (32-bit float) is supported, got " +
                  std::to_string(data_type));
  }
  if (byte_order != 0 && byte_order != 1) {
    throw IoError("ENVI header " + header_path + ": byte order must be 0 or 1");
  }
  if (offset < 0) throw IoError("ENVI header " + header_path + ": negative header offset");

  const std::size_t h = height, w = width, b = bands;
  const std::size_t count = h * w * b;
  std::error_code ec;
  const auto size = std::filesystem::file_size(data_path, ec);
  if (ec) throw IoError("cannot open ENVI data file: " + data_path);
  if (size != count * 4 + static_cast<std::size_t>(offset)) {
    throw IoError("ENVI data file " + data_path + " has " + std::to_string(size) + " bytes, expected " +
                  std::to_string(count * 4 + offset));
  }

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw IoError("cannot open ENVI data file: " + data_path);
  in.seekg(offset);
  std::vector<char> raw(count * 4);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("short read on ENVI data file: " + data_path);
  }

  const bool file_little = byte_order == 0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  std::vector<double> data(count);
  for (std::size_t band = 0; band < b; ++band) {
    for (std::size_t row = 0; row < h; ++row) {
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t src = file_offset(il, h, w, b, row, col, band);
        std::uint32_t bits;
        std::memcpy(&bits, raw.data() + src * 4, 4);
        if (swap) bits = __builtin_bswap32(bits);
        const float value = std::bit_cast<float>(bits);
        if (!std::isfinite(value)) {
          throw IoError("ENVI data file " + data_path + " holds a non-finite value at element " +
                               std::to_string(src));
        }
        data[(band * h + row) * w + col] = value;
      }
    }
  }
  return ImageCube(static_cast<int>(height), static_cast<int>(width), static_cast<int>(bands), std::move(data));
}

void save_envi(const ImageCube& cube, const std::string& header_path, const std::string& data_path,
               Interleave interleave) {
  {
    std::ofstream hdr(header_path);
    if (!hdr) throw IoError("cannot write ENVI header: " + header_path);
    hdr << "ENVI\n"
        << "samples = " << cube.width() << "\n"
        << "lines = " << cube.height() << "\n"
        << "bands = " << cube.bands() << "\n"
        << "header offset = 0\n"
        << "data type = 4\n"
        << "interleave = " << to_string(interleave) << "\n"
        << "byte order = 0\n";
  }
  const std::size_t h = cube.height(), w = cube.width(), b = cube.bands();
  std::vector<char> raw(h * w * b * 4);
  for (std::size_t band = 0; band < b; ++band) {
    for (std::size_t row = 0; row < h; ++row) {
      for (std::size_t col = 0; col < w; ++col) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(cube.at(row, col, band)));
        if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
        std::memcpy(raw.data() + file_offset(interleave, h, w, b, row, col, band) * 4, &bits, 4);
      }
    }
  }
  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw IoError("cannot write ENVI data file: " + data_path);
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

}  // namespace dsirc

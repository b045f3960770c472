#include "dsirc/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dsirc {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 17> kPalette{{
    {0, 0, 0},
    {230, 25, 75},
    {60, 180, 75},
    {255, 225, 25},
    {0, 130, 200},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
    {240, 50, 230},
    {210, 245, 60},
    {250, 190, 212},
    {0, 128, 128},
    {220, 190, 255},
    {170, 110, 40},
    {255, 250, 200},
    {128, 0, 0},
    {170, 255, 195},
}};

void check_grid(const LabelMap& labels, int height, int width) {
  if (height < 1 || width < 1 || static_cast<std::size_t>(height) * width != labels.size()) {
    throw ConfigError("label map of " + std::to_string(labels.size()) + " entries does not fit a " +
                      std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
}

}  // namespace

std::array<std::uint8_t, 3> label_color(int label) {
  if (label <= 0) return kPalette[0];
  return kPalette[1 + (label - 1) % 16];
}

void write_label_csv(const std::string& path, const LabelMap& labels, int width) {
  if (width < 1) throw ConfigError("label CSV needs a positive grid width");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write label CSV: " + path);
  out << "index,row,col,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << ',' << i / width << ',' << i % width << ',' << labels[i] << '\n';
  }
}

LabelMap read_label_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("label CSV is empty: " + path);
  LabelMap labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    long index = 0, row = 0, col = 0, label = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(fields >> index >> c1 >> row >> c2 >> col >> c3 >> label) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw IoError("malformed label CSV line " + std::to_string(line_no) + " in " + path);
    }
    if (index != static_cast<long>(labels.size())) {
      throw IoError("label CSV " + path + " is not in index order at line " + std::to_string(line_no));
    }
    if (label < 0) throw IoError("negative label at line " + std::to_string(line_no) + " in " + path);
    labels.push_back(static_cast<int>(label));
  }
  return labels;
}

void write_label_pgm(const std::string& path, const LabelMap& labels, int height, int width) {
  check_grid(labels, height, width);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PGM: " + path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (int label : labels) {
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::clamp(label, 0, 255))));
  }
}

void write_label_ppm(const std::string& path, const LabelMap& labels, int height, int width) {
  check_grid(labels, height, width);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PPM: " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  for (int label : labels) {
    const auto rgb = label_color(label);
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
  }
}

}  // namespace dsirc

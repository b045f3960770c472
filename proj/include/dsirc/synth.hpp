#pragma once

// Synthetic linearly mixed scenes with known ground truth.

#include "dsirc/core.hpp"

#include <cstdint>

namespace dsirc {

struct SynthConfig {
  int height = 40;
  int width = 40;
  int bands = 30;
  int endmembers = 4;
  /// Blob grid; blob (r, c) is owned by endmember (r * blob_cols + c) mod endmembers.
  int blob_rows = 2;
  int blob_cols = 2;
  /// Pixels over which the owner's abundance ramps from 0.5 at a border to 1.
  double mixing_width = 3.0;
  /// Noise standard deviation as a fraction of the clean signal range.
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthScene {
  ImageCube cube;
  ImageCube clean;
  LabelMap gt;           // owning endmember + 1, row-major
  Matrix endmembers;     // p x B
  Matrix abundances;     // N x p, rows sum to 1
};

/// Smooth random spectra: sums of 2-4 Gaussian bumps over the band index, in [0, 1].
///
/// Candidates correlating above 0.9 with an accepted spectrum are redrawn;
/// throws ConfigError after 1000 draws.
Matrix random_endmembers(int p, int bands, std::uint64_t seed);

SynthScene synth_hsi(const SynthConfig& config);

}  // namespace dsirc

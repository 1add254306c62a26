#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scalefit/types.hpp"

namespace scalefit {

/// Rectangular evaluation grid. Held-out lists must be subsets of the value
/// lists; a row is held out when its x or its d_f appears there.
struct GridSpec {
  std::vector<Real> x_values;
  std::vector<Real> d_f_values;
  std::vector<Real> held_out_x;
  std::vector<Real> held_out_d_f;
};

struct NoiseSpec {
  Real sigma = 0;
  std::uint64_t seed = 0;
};

struct RunLabels {
  std::string task = "synthetic";
  Method method = Method::fmt;
};

/// splitmix64: the 64-bit mixer from Vigna's public-domain generator.
/// State advances by the golden-ratio increment per draw.
struct Splitmix64 {
  std::uint64_t state = 0;
  std::uint64_t next();
};

/// Standard normal draw for one grid cell, independent across (seed, row,
/// col, attempt): a splitmix64 stream keyed on all four indices feeds
/// Box-Muller (u1 in (0,1], u2 in [0,1), z = sqrt(-2 ln u1) cos(2 pi u2)).
Real gaussian_draw(std::uint64_t seed, std::uint64_t row, std::uint64_t col,
                   std::uint64_t attempt);

/// Evaluates the law on the grid and perturbs each loss with sigma-scaled
/// Gaussian noise. Row order: x outer, d_f inner, both in list order. A draw
/// pushing a loss to <= 0 is redrawn with the next attempt index, at most 100
/// times, before NoiseError. sigma = 0 reproduces the law exactly.
std::vector<Run> generate(const JointLaw& law, const GridSpec& grid,
                          const NoiseSpec& noise, const RunLabels& labels = {});

}  // namespace scalefit

#include "scalefit/synth.hpp"

#include <algorithm>
#include <cmath>

#include "scalefit/laws.hpp"

namespace scalefit {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

bool contains(const std::vector<Real>& values, Real needle) {
  return std::find(values.begin(), values.end(), needle) != values.end();
}

void validate_grid(const GridSpec& grid) {
  if (grid.x_values.empty() || grid.d_f_values.empty()) {
    throw ArgumentError("grid needs x and d_f values");
  }
  for (Real x : grid.x_values) {
    if (!(x > 0)) throw DomainError("grid x values must be positive");
  }
  for (Real d : grid.d_f_values) {
    if (!(d > 0)) throw DomainError("grid d_f values must be positive");
  }
  for (Real x : grid.held_out_x) {
    if (!contains(grid.x_values, x)) {
      throw ArgumentError("held_out_x entries must appear in x_values");
    }
  }
  for (Real d : grid.held_out_d_f) {
    if (!contains(grid.d_f_values, d)) {
      throw ArgumentError("held_out_d_f entries must appear in d_f_values");
    }
  }
}

}  // namespace

std::uint64_t Splitmix64::next() {
  state += kGolden;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Real gaussian_draw(std::uint64_t seed, std::uint64_t row, std::uint64_t col,
                   std::uint64_t attempt) {
  // Key the stream on all four indices through repeated finalization, so
  // cells are independent and order of generation is irrelevant.
  Splitmix64 g{seed};
  g.state = g.next() ^ (row * 0xA24BAED4963EE407ull);
  g.state = g.next() ^ (col * 0x9FB21C651E98DF25ull);
  g.state = g.next() ^ (attempt * kGolden);

  // Box-Muller with u1 in (0, 1], u2 in [0, 1).
  const Real u1 =
      static_cast<Real>((g.next() >> 11) + 1) * 0x1.0p-53;
  const Real u2 = static_cast<Real>(g.next() >> 11) * 0x1.0p-53;
  return std::sqrt(-2 * std::log(u1)) *
         std::cos(2 * 3.14159265358979323846 * u2);
}

std::vector<Run> generate(const JointLaw& law, const GridSpec& grid,
                          const NoiseSpec& noise, const RunLabels& labels) {
  validate(law);
  validate_grid(grid);
  if (!(noise.sigma >= 0)) throw ArgumentError("sigma must be non-negative");

  std::vector<Run> runs;
  runs.reserve(grid.x_values.size() * grid.d_f_values.size());
  for (std::size_t i = 0; i < grid.x_values.size(); ++i) {
    const Real x = grid.x_values[i];
    for (std::size_t j = 0; j < grid.d_f_values.size(); ++j) {
      const Real d_f = grid.d_f_values[j];
      Real loss = predict_joint(law, x, d_f);
      if (noise.sigma > 0) {
        std::uint64_t attempt = 0;
        Real noisy;
        do {
          if (attempt >= 100) {
            throw NoiseError(
                "could not draw a positive loss within 100 attempts");
          }
          noisy = loss + noise.sigma * gaussian_draw(noise.seed, i, j, attempt);
          ++attempt;
        } while (!(noisy > 0));
        loss = noisy;
      }
      Run run;
      run.task = labels.task;
      run.method = labels.method;
      run.factor = law.factor;
      run.x = x;
      run.d_f = d_f;
      run.loss = loss;
      run.split = contains(grid.held_out_x, x) || contains(grid.held_out_d_f, d_f)
                      ? Split::held_out
                      : Split::fit;
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

}  // namespace scalefit

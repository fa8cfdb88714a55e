#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "dfd/image.hpp"

namespace dfd {

/// Full complex DFT grid; bin (u, v) is row-frequency u, column-frequency v.
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<double> real;
  std::vector<double> imag;

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(u) * width + v; }
  std::complex<double> at(int u, int v) const { return {real[index(u, v)], imag[index(u, v)]}; }
};

struct AmplitudePhase {
  int height = 0;
  int width = 0;
  std::vector<double> amplitude;
  std::vector<double> phase;  ///< atan2(imag, real) in (-pi, pi]; 0 for a zero bin
};

/// Energy summed per integer radius (distance to the centered DC bin, rounded).
/// Bins run 0..floor(min(H,W)/2); corner bins further out fold into the last
/// bin so the profile conserves total amplitude.
struct RadialProfile {
  std::vector<int> radius;
  std::vector<double> energy;
};

struct FrequencyPair {
  Image low;
  Image high;
};

/// Binomial 5x5 blur (reflect-101) followed by dropping even rows/columns.
Image pyr_down(const Image& img);
/// Zero-interleave into odd rows/columns of a target_h x target_w grid, then
/// blur with the binomial kernel scaled by 4.
Image pyr_up(const Image& img, int target_h, int target_w);
/// low = up(down(img)), high = img - low. Requires even dimensions.
FrequencyPair split_frequency(const Image& img);

/// Exact 2D DFT of a single-channel image (multi-channel input is reduced to
/// luminance first).
Spectrum dft2(const Image& img);
AmplitudePhase amplitude_phase(const Spectrum& s);
/// Moves the DC bin to (H/2, W/2).
Spectrum fftshift(const Spectrum& s);
/// Bins a spectrum that has already been center-shifted.
RadialProfile radial_energy(const Spectrum& centered);
/// Convenience: luminance -> dft2 -> fftshift -> radial_energy.
RadialProfile radial_energy_of(const Image& img);

/// Counts of 8-bit quantized luminance.
std::array<std::uint64_t, 256> gray_histogram(const Image& img);

/// Mean energy over bins with radius > r_max / 2.
double high_band_energy(const RadialProfile& profile);

/// Per-set averages of the radial profile and of the normalized gray
/// histogram (each image's histogram sums to 1).
struct SetSpectrum {
  RadialProfile mean_profile;
  std::array<double, 256> mean_histogram{};
  double high_band = 0.0;  ///< high_band_energy(mean_profile)
  std::size_t images = 0;
};

/// ArgumentError on an empty set or on images of differing sizes.
SetSpectrum analyze_set(const std::vector<Image>& images);

/// Sum of absolute bin differences, in [0, 2] for normalized histograms.
double histogram_l1(const std::array<double, 256>& a, const std::array<double, 256>& b);

}  // namespace dfd

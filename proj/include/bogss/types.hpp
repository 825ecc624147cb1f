#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bogss {

using cplx = std::complex<double>;
using Signal = std::vector<double>;
/// One Signal per channel, all of equal length.
using MultiSignal = std::vector<Signal>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major complex tensor of rank 3.
class CTensor3 {
 public:
  CTensor3() = default;
  CTensor3(std::size_t d0, std::size_t d1, std::size_t d2)
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2) {}

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  cplx& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * d1_ + j) * d2_ + k];
  }
  const cplx& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * d1_ + j) * d2_ + k];
  }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool operator==(const CTensor3&) const = default;

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<cplx> data_;
};

/// Dense row-major complex tensor of rank 2.
class CTensor2 {
 public:
  CTensor2() = default;
  CTensor2(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool operator==(const CTensor2&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<cplx> data_;
};

/// Split real/imaginary planes laid out frequency-major: for every (f, m)
/// there is a contiguous run of `frames` values. This is the layout the
/// arithmetic kernels consume; they vectorize along time.
class FreqPlanes {
 public:
  FreqPlanes() = default;
  FreqPlanes(std::size_t freqs, std::size_t channels, std::size_t frames)
      : freqs_(freqs), channels_(channels), frames_(frames),
        re_(freqs * channels * frames), im_(freqs * channels * frames) {}

  std::size_t freqs() const { return freqs_; }
  std::size_t channels() const { return channels_; }
  std::size_t frames() const { return frames_; }

  double* re(std::size_t f, std::size_t m = 0) { return re_.data() + (f * channels_ + m) * frames_; }
  double* im(std::size_t f, std::size_t m = 0) { return im_.data() + (f * channels_ + m) * frames_; }
  const double* re(std::size_t f, std::size_t m = 0) const {
    return re_.data() + (f * channels_ + m) * frames_;
  }
  const double* im(std::size_t f, std::size_t m = 0) const {
    return im_.data() + (f * channels_ + m) * frames_;
  }

  cplx at(std::size_t t, std::size_t f, std::size_t m) const {
    return {re(f, m)[t], im(f, m)[t]};
  }
  void set(std::size_t t, std::size_t f, std::size_t m, cplx v) {
    re(f, m)[t] = v.real();
    im(f, m)[t] = v.imag();
  }

 private:
  std::size_t freqs_ = 0, channels_ = 0, frames_ = 0;
  std::vector<double> re_, im_;
};

/// (T, F, M) tensor -> frequency-major planes.
FreqPlanes to_planes(const CTensor3& tfm);
/// Frequency-major planes -> (T, F, M) tensor.
CTensor3 from_planes(const FreqPlanes& planes);

}  // namespace bogss

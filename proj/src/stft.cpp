#include "fastfca/stft.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace fastfca {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void validate_params(int frame_len, int shift) {
  if (!is_power_of_two(frame_len))
    throw std::invalid_argument("stft: frame length must be a power of two");
  if (shift * 2 != frame_len)
    throw std::invalid_argument("stft: shift must be frame_len/2");
}

}  // namespace

Spectrogram Spectrogram::zero(int channels, int bins, int frames) {
  Spectrogram s;
  s.channels = channels;
  s.bins = bins;
  s.frames = frames;
  s.f.assign(bins, CMat::Zero(channels, frames));
  return s;
}

RVec sqrt_hann_window(int frame_len) {
  // Periodic Hann; squared windows at 50% overlap sum to exactly 1.
  RVec w(frame_len);
  for (int k = 0; k < frame_len; ++k)
    w(k) = std::sqrt(0.5 - 0.5 * std::cos(2.0 * M_PI * k / frame_len));
  return w;
}

int stft_frame_count(Eigen::Index length, int frame_len, int shift,
                     StftPadding pad) {
  if (pad == StftPadding::centered)
    return static_cast<int>((length + shift - 1) / shift) + 1;
  if (length < frame_len)
    throw std::invalid_argument("stft: signal shorter than one frame");
  return static_cast<int>((length - frame_len) / shift) + 1;
}

Spectrogram stft(const MultichannelWave& wave, int frame_len, int shift,
                 StftPadding pad) {
  validate_params(frame_len, shift);
  const Eigen::Index len = wave.length();
  if (len < frame_len)
    throw std::invalid_argument("stft: signal shorter than one frame");
  const int channels = wave.channels();
  const int bins = frame_len / 2 + 1;
  const int frames = stft_frame_count(len, frame_len, shift, pad);
  const Eigen::Index offset = (pad == StftPadding::centered) ? shift : 0;

  const RVec window = sqrt_hann_window(frame_len);
  Spectrogram out = Spectrogram::zero(channels, bins, frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(frame_len);
  std::vector<Complex> spectrum;
  for (int ch = 0; ch < channels; ++ch) {
    for (int j = 0; j < frames; ++j) {
      const Eigen::Index start =
          static_cast<Eigen::Index>(j) * shift - offset;
      for (int k = 0; k < frame_len; ++k) {
        const Eigen::Index t = start + k;
        frame[k] =
            (t >= 0 && t < len) ? wave.samples(ch, t) * window(k) : 0.0;
      }
      fft.fwd(spectrum, frame);
      for (int b = 0; b < bins; ++b) out.f[b](ch, j) = spectrum[b];
    }
  }
  return out;
}

MultichannelWave istft(const Spectrogram& spec, int frame_len, int shift,
                       Eigen::Index out_len, double sample_rate,
                       StftPadding pad) {
  validate_params(frame_len, shift);
  if (spec.bins != frame_len / 2 + 1)
    throw std::invalid_argument("istft: bin count does not match frame_len");
  if (spec.frames != stft_frame_count(out_len, frame_len, shift, pad))
    throw std::invalid_argument(
        "istft: frame count inconsistent with out_len and padding");

  const int channels = spec.channels;
  const Eigen::Index offset = (pad == StftPadding::centered) ? shift : 0;
  const Eigen::Index buf_len =
      static_cast<Eigen::Index>(spec.frames - 1) * shift + frame_len;
  const RVec window = sqrt_hann_window(frame_len);

  RVec wsum = RVec::Zero(buf_len);
  for (int j = 0; j < spec.frames; ++j)
    wsum.segment(static_cast<Eigen::Index>(j) * shift, frame_len) +=
        window.cwiseProduct(window);

  MultichannelWave wave;
  wave.sample_rate = sample_rate;
  wave.samples = RMat::Zero(channels, out_len);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> spectrum(spec.bins);
  std::vector<double> frame;
  RMat acc = RMat::Zero(channels, buf_len);
  for (int ch = 0; ch < channels; ++ch) {
    for (int j = 0; j < spec.frames; ++j) {
      for (int b = 0; b < spec.bins; ++b) spectrum[b] = spec.f[b](ch, j);
      fft.inv(frame, spectrum);
      for (int k = 0; k < frame_len; ++k)
        acc(ch, static_cast<Eigen::Index>(j) * shift + k) +=
            window(k) * frame[k];
    }
  }
  for (int ch = 0; ch < channels; ++ch)
    for (Eigen::Index t = 0; t < out_len; ++t) {
      const Eigen::Index p = t + offset;
      if (p < buf_len) wave.samples(ch, t) = acc(ch, p) / std::max(wsum(p), 1e-12);
    }
  return wave;
}

}  // namespace fastfca

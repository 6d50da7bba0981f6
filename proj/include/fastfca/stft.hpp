// stft.hpp -- STFT analysis/synthesis with a square-root Hann window at 50%
// overlap, plus the multichannel time/frequency containers.

#pragma once

#include <vector>

#include "fastfca/types.hpp"

namespace fastfca {

struct MultichannelWave {
  double sample_rate = 0.0;
  RMat samples;  // channels x length, values nominally in [-1, 1]
  int channels() const { return static_cast<int>(samples.rows()); }
  Eigen::Index length() const { return samples.cols(); }
};

// One-sided complex spectrogram; f[i] holds the channels x frames slice of
// frequency bin i.  bins == fft_size/2 + 1.
struct Spectrogram {
  int channels = 0, bins = 0, frames = 0;
  std::vector<CMat> f;

  static Spectrogram zero(int channels, int bins, int frames);
  bool shape_matches(const Spectrogram& o) const {
    return channels == o.channels && bins == o.bins && frames == o.frames;
  }
};

// Frame placement at the signal edges.
//   centered:    zero-pad frame_len/2 on both sides, so every input sample
//                is covered by a full analysis/synthesis window pair and the
//                round trip is exact everywhere.
//   full_frames: no padding; only frames lying fully inside the signal.
//                The round trip is exact on the interior only.  This is the
//                convention behind the usual batch frame count
//                (length - frame_len)/shift + 1, e.g. 8 s at 16 kHz with
//                1024/512 gives 249 frames.
enum class StftPadding { centered, full_frames };

RVec sqrt_hann_window(int frame_len);

int stft_frame_count(Eigen::Index length, int frame_len, int shift,
                     StftPadding pad);

Spectrogram stft(const MultichannelWave& wave, int frame_len, int shift,
                 StftPadding pad = StftPadding::centered);

MultichannelWave istft(const Spectrogram& spec, int frame_len, int shift,
                       Eigen::Index out_len, double sample_rate,
                       StftPadding pad = StftPadding::centered);

}  // namespace fastfca

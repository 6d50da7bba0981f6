#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>

#include "fastfca/stft.hpp"
#include "fastfca/wav.hpp"
#include "testutil.hpp"

using namespace fastfca;
using namespace fastfca::test;

namespace {

MultichannelWave random_wave(int channels, Eigen::Index len, double fs,
                             std::mt19937& rng) {
  MultichannelWave w;
  w.sample_rate = fs;
  w.samples = RMat(channels, len);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (Eigen::Index t = 0; t < len; ++t)
    for (int ch = 0; ch < channels; ++ch) w.samples(ch, t) = d(rng);
  return w;
}

// Crude speech-shaped signal: white noise through a one-pole lowpass plus a
// slow amplitude modulation.
MultichannelWave speechish_wave(int channels, Eigen::Index len, double fs,
                                std::mt19937& rng) {
  MultichannelWave w = random_wave(channels, len, fs, rng);
  for (int ch = 0; ch < channels; ++ch) {
    double state = 0.0;
    for (Eigen::Index t = 0; t < len; ++t) {
      state = 0.95 * state + 0.05 * w.samples(ch, t);
      w.samples(ch, t) =
          state * (0.6 + 0.4 * std::sin(2.0 * M_PI * 3.0 * t / fs));
    }
  }
  return w;
}

// Direct quadratic-time DFT of one windowed frame; independent of the FFT
// path used by stft().
CVec windowed_dft_frame(const RVec& frame, const RVec& window) {
  const int n = static_cast<int>(frame.size());
  CVec spec = CVec::Zero(n / 2 + 1);
  for (int b = 0; b <= n / 2; ++b) {
    Complex acc(0, 0);
    for (int k = 0; k < n; ++k)
      acc += frame(k) * window(k) *
             std::exp(Complex(0, -2.0 * M_PI * b * k / n));
    spec(b) = acc;
  }
  return spec;
}

double one_sided_energy(const Spectrogram& s, int ch, int j, int fft_len) {
  double e = std::norm(s.f[0](ch, j)) + std::norm(s.f[s.bins - 1](ch, j));
  for (int b = 1; b + 1 < s.bins; ++b) e += 2.0 * std::norm(s.f[b](ch, j));
  return e / fft_len;
}

}  // namespace

TEST_CASE("sqrt-Hann satisfies COLA at 50% overlap") {
  for (int frame_len : {64, 256, 1024}) {
    RVec w = sqrt_hann_window(frame_len);
    const int shift = frame_len / 2;
    for (int k = 0; k < shift; ++k)
      CHECK(w(k) * w(k) + w(k + shift) * w(k + shift) ==
            doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stft of zero signal is zero") {
  MultichannelWave w;
  w.sample_rate = 16000;
  w.samples = RMat::Zero(2, 4000);
  Spectrogram s = stft(w, 512, 256);
  for (const auto& slice : s.f) CHECK(slice.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft parameter validation") {
  std::mt19937 rng(21);
  MultichannelWave w = random_wave(1, 4000, 16000, rng);
  CHECK_THROWS_AS(stft(w, 1000, 500), std::invalid_argument);  // not pow2
  CHECK_THROWS_AS(stft(w, 1024, 256), std::invalid_argument);  // shift ratio
  MultichannelWave tiny = random_wave(1, 100, 16000, rng);
  CHECK_THROWS_AS(stft(tiny, 1024, 512), std::invalid_argument);
}

TEST_CASE("bin-centered sinusoid concentrates in the window mainlobe") {
  const int frame_len = 1024, shift = 512, bin = 100;
  const double fs = 16000;
  MultichannelWave w;
  w.sample_rate = fs;
  w.samples = RMat(1, 8 * frame_len);
  for (Eigen::Index t = 0; t < w.length(); ++t)
    w.samples(0, t) = std::cos(2.0 * M_PI * bin * t / frame_len + 0.3);
  Spectrogram s = stft(w, frame_len, shift, StftPadding::full_frames);

  // Oracle: direct DFT of the same windowed frame.
  const RVec window = sqrt_hann_window(frame_len);
  const int j = 4;  // an interior frame
  RVec frame = w.samples.row(0).segment(j * shift, frame_len).transpose();
  CVec oracle = windowed_dft_frame(frame, window);
  for (int b = 0; b < s.bins; ++b)
    CHECK(std::abs(s.f[b](0, j) - oracle(b)) < 1e-8 * oracle.norm());

  // Concentration figures frozen from the oracle: the center bin carries
  // ~81.06% of the frame energy and the bin+-1 mainlobe ~99.07%.
  const double total = one_sided_energy(s, 0, j, frame_len);
  const double center = 2.0 * std::norm(s.f[bin](0, j)) / frame_len;
  const double mainlobe = center + 2.0 * (std::norm(s.f[bin - 1](0, j)) +
                                          std::norm(s.f[bin + 1](0, j))) /
                                       frame_len;
  CHECK(center / total > 0.81);
  CHECK(center / total < 0.82);
  CHECK(mainlobe / total > 0.99);
}

TEST_CASE("frame count conventions for 8 s at 16 kHz") {
  const Eigen::Index len = 8 * 16000;
  CHECK(stft_frame_count(len, 1024, 512, StftPadding::full_frames) == 249);
  const int bins = 1024 / 2 + 1;
  CHECK(bins * stft_frame_count(len, 1024, 512, StftPadding::full_frames) ==
        127737);
  CHECK(stft_frame_count(len, 1024, 512, StftPadding::centered) == 251);
}

TEST_CASE("frame-wise Parseval identity") {
  std::mt19937 rng(22);
  const int frame_len = 256, shift = 128;
  MultichannelWave w = random_wave(2, 3000, 16000, rng);
  Spectrogram s = stft(w, frame_len, shift, StftPadding::full_frames);
  const RVec window = sqrt_hann_window(frame_len);
  for (int j = 0; j < s.frames; j += 3) {
    for (int ch = 0; ch < 2; ++ch) {
      RVec frame =
          w.samples.row(ch).segment(j * shift, frame_len).transpose();
      const double time_energy = frame.cwiseProduct(window).squaredNorm();
      CHECK(one_sided_energy(s, ch, j, frame_len) ==
            doctest::Approx(time_energy).epsilon(1e-9));
    }
  }
}

TEST_CASE("istft round trip") {
  std::mt19937 rng(23);
  SUBCASE("centered padding reconstructs everywhere") {
    for (Eigen::Index len : {4000, 4097}) {
      MultichannelWave w = random_wave(2, len, 16000, rng);
      Spectrogram s = stft(w, 512, 256);
      MultichannelWave back = istft(s, 512, 256, len, 16000);
      CHECK((back.samples - w.samples).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("zero spectrogram gives zero signal") {
    Spectrogram s = Spectrogram::zero(1, 257, 9);
    MultichannelWave back = istft(s, 512, 256, 2048, 16000);
    CHECK(back.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("speech-shaped signal, relative L2") {
    MultichannelWave w = speechish_wave(2, 16000, 16000, rng);
    Spectrogram s = stft(w, 1024, 512);
    MultichannelWave back = istft(s, 1024, 512, w.length(), 16000);
    CHECK((back.samples - w.samples).norm() / w.samples.norm() < 1e-9);
  }
  SUBCASE("full_frames padding reconstructs the interior") {
    MultichannelWave w = random_wave(1, 4096, 16000, rng);
    Spectrogram s = stft(w, 512, 256, StftPadding::full_frames);
    MultichannelWave back =
        istft(s, 512, 256, w.length(), 16000, StftPadding::full_frames);
    const Eigen::Index lo = 256, hi = (s.frames - 1) * 256 + 512 - 256;
    for (Eigen::Index t = lo; t < hi; ++t)
      CHECK(std::abs(back.samples(0, t) - w.samples(0, t)) < 1e-10);
  }
  SUBCASE("parameter mismatch is rejected") {
    MultichannelWave w = random_wave(1, 4000, 16000, rng);
    Spectrogram s = stft(w, 512, 256);
    CHECK_THROWS_AS(istft(s, 1024, 512, 4000, 16000), std::invalid_argument);
    CHECK_THROWS_AS(istft(s, 512, 256, 9999, 16000), std::invalid_argument);
  }
}

TEST_CASE("wav round trips") {
  std::mt19937 rng(24);
  MultichannelWave w = random_wave(3, 777, 22050, rng);
  const std::string dir = "/tmp/fastfca_test_wav";
  REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0);

  SUBCASE("float32 is bit-exact") {
    // Quantize the fixture to float precision so the round trip is exact.
    for (Eigen::Index t = 0; t < w.length(); ++t)
      for (int ch = 0; ch < 3; ++ch)
        w.samples(ch, t) = static_cast<float>(w.samples(ch, t));
    write_wav(dir + "/f32.wav", w, WavFormat::float32);
    MultichannelWave r = read_wav(dir + "/f32.wav");
    CHECK(r.sample_rate == 22050);
    CHECK(r.channels() == 3);
    CHECK(r.length() == 777);
    CHECK((r.samples - w.samples).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pcm16 within one quantization step") {
    write_wav(dir + "/p16.wav", w, WavFormat::pcm16);
    MultichannelWave r = read_wav(dir + "/p16.wav");
    CHECK((r.samples - w.samples).cwiseAbs().maxCoeff() <=
          std::pow(2.0, -15));
  }
  SUBCASE("malformed and unsupported files are rejected") {
    {
      std::ofstream junk(dir + "/junk.wav", std::ios::binary);
      junk << "this is not a wav file at all";
    }
    CHECK_THROWS(read_wav(dir + "/junk.wav"));
    CHECK_THROWS(read_wav(dir + "/does_not_exist.wav"));

    // 24-bit PCM is unsupported.
    write_wav(dir + "/ok.wav", w, WavFormat::pcm16);
    std::ifstream in(dir + "/ok.wav", std::ios::binary);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    buf[34] = 24;  // bits-per-sample field
    std::ofstream out(dir + "/bad_codec.wav", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    CHECK_THROWS(read_wav(dir + "/bad_codec.wav"));

    // Truncated data chunk: frame count no longer divides evenly.
    std::vector<char> cut(buf.begin(), buf.end() - 3);
    uint32_t data_size;
    std::memcpy(&data_size, cut.data() + 40, 4);
    data_size -= 3;
    std::memcpy(cut.data() + 40, &data_size, 4);
    uint32_t riff = static_cast<uint32_t>(cut.size() - 8);
    std::memcpy(cut.data() + 4, &riff, 4);
    std::ofstream out2(dir + "/truncated.wav", std::ios::binary);
    out2.write(cut.data(), static_cast<std::streamsize>(cut.size()));
    out2.close();
    CHECK_THROWS(read_wav(dir + "/truncated.wav"));
  }
}

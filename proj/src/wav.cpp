#include "fastfca/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace fastfca {

namespace {

// Little-endian host assumed (checked once at read/write time).
bool host_is_little_endian() {
  const uint16_t probe = 1;
  uint8_t byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

void require_le() {
  if (!host_is_little_endian())
    throw std::runtime_error("wav: big-endian hosts are not supported");
}

template <typename T>
T read_pod(const std::vector<char>& buf, size_t at) {
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  return v;
}

template <typename T>
void append_pod(std::vector<char>& buf, T v) {
  const size_t at = buf.size();
  buf.resize(at + sizeof(T));
  std::memcpy(buf.data() + at, &v, sizeof(T));
}

void append_tag(std::vector<char>& buf, const char* tag) {
  buf.insert(buf.end(), tag, tag + 4);
}

}  // namespace

MultichannelWave read_wav(const std::string& path) {
  require_le();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("wav: cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("wav: malformed RIFF header in " + path);

  uint16_t audio_format = 0, channels = 0, bits = 0, block_align = 0;
  uint32_t sample_rate = 0;
  size_t data_at = 0, data_size = 0;
  bool have_fmt = false, have_data = false;

  size_t at = 12;
  while (at + 8 <= buf.size()) {
    char tag[5] = {buf[at], buf[at + 1], buf[at + 2], buf[at + 3], 0};
    const uint32_t size = read_pod<uint32_t>(buf, at + 4);
    at += 8;
    if (at + size > buf.size())
      throw std::runtime_error("wav: truncated chunk '" + std::string(tag) +
                               "' in " + path);
    if (std::strcmp(tag, "fmt ") == 0) {
      if (size < 16) throw std::runtime_error("wav: malformed fmt chunk");
      audio_format = read_pod<uint16_t>(buf, at);
      channels = read_pod<uint16_t>(buf, at + 2);
      sample_rate = read_pod<uint32_t>(buf, at + 4);
      block_align = read_pod<uint16_t>(buf, at + 12);
      bits = read_pod<uint16_t>(buf, at + 14);
      have_fmt = true;
    } else if (std::strcmp(tag, "data") == 0) {
      data_at = at;
      data_size = size;
      have_data = true;
    }
    at += size + (size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("wav: missing fmt or data chunk in " + path);
  if (channels == 0 || sample_rate == 0)
    throw std::runtime_error("wav: malformed fmt chunk in " + path);

  const bool pcm16 = (audio_format == 1 && bits == 16);
  const bool f32 = (audio_format == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw std::runtime_error("wav: unsupported codec (format " +
                             std::to_string(audio_format) + ", " +
                             std::to_string(bits) + " bits) in " + path);
  const size_t bytes_per_frame = channels * (bits / 8);
  if (block_align != bytes_per_frame || data_size % bytes_per_frame != 0)
    throw std::runtime_error(
        "wav: data size is not a whole number of frames in " + path);

  const size_t frames = data_size / bytes_per_frame;
  MultichannelWave wave;
  wave.sample_rate = sample_rate;
  wave.samples = RMat(channels, frames);
  for (size_t t = 0; t < frames; ++t) {
    for (int ch = 0; ch < channels; ++ch) {
      const size_t p = data_at + t * bytes_per_frame + ch * (bits / 8);
      if (pcm16) {
        wave.samples(ch, t) = read_pod<int16_t>(buf, p) / 32768.0;
      } else {
        wave.samples(ch, t) = read_pod<float>(buf, p);
      }
    }
  }
  return wave;
}

void write_wav(const std::string& path, const MultichannelWave& wave,
               WavFormat format) {
  require_le();
  if (wave.channels() < 1 || wave.sample_rate <= 0)
    throw std::invalid_argument("wav: empty wave or invalid sample rate");
  const int channels = wave.channels();
  const Eigen::Index frames = wave.length();
  const bool f32 = (format == WavFormat::float32);
  const uint16_t bits = f32 ? 32 : 16;
  const uint16_t block_align = static_cast<uint16_t>(channels * bits / 8);
  const uint32_t data_size = static_cast<uint32_t>(frames * block_align);
  const uint32_t rate = static_cast<uint32_t>(std::lround(wave.sample_rate));

  std::vector<char> buf;
  buf.reserve(64 + data_size);
  append_tag(buf, "RIFF");
  append_pod<uint32_t>(buf, 0);  // patched below
  append_tag(buf, "WAVE");
  append_tag(buf, "fmt ");
  append_pod<uint32_t>(buf, 16);
  append_pod<uint16_t>(buf, f32 ? 3 : 1);
  append_pod<uint16_t>(buf, static_cast<uint16_t>(channels));
  append_pod<uint32_t>(buf, rate);
  append_pod<uint32_t>(buf, rate * block_align);
  append_pod<uint16_t>(buf, block_align);
  append_pod<uint16_t>(buf, bits);
  if (f32) {  // fact chunk is required for non-PCM formats
    append_tag(buf, "fact");
    append_pod<uint32_t>(buf, 4);
    append_pod<uint32_t>(buf, static_cast<uint32_t>(frames));
  }
  append_tag(buf, "data");
  append_pod<uint32_t>(buf, data_size);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int ch = 0; ch < channels; ++ch) {
      const double x = wave.samples(ch, t);
      if (f32) {
        append_pod<float>(buf, static_cast<float>(x));
      } else {
        const double s = std::lround(x * 32768.0);
        append_pod<int16_t>(buf, static_cast<int16_t>(
                                     std::min(32767.0, std::max(-32768.0, s))));
      }
    }
  }
  const uint32_t riff_size = static_cast<uint32_t>(buf.size() - 8);
  std::memcpy(buf.data() + 4, &riff_size, 4);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("wav: short write to " + path);
}

}  // namespace fastfca

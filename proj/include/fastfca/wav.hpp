// wav.hpp -- RIFF/WAVE ingestion and emission, PCM16 and IEEE float32,
// interleaved multichannel, little-endian.

#pragma once

#include <string>

#include "fastfca/stft.hpp"

namespace fastfca {

enum class WavFormat { pcm16, float32 };

MultichannelWave read_wav(const std::string& path);

void write_wav(const std::string& path, const MultichannelWave& wave,
               WavFormat format = WavFormat::float32);

}  // namespace fastfca

#ifndef FBAEC_WAV_IO_H_
#define FBAEC_WAV_IO_H_

#include <filesystem>

#include "fbaec/spectral.h"

namespace fbaec {

enum class WavFormat { kPcm16, kFloat32 };

// Mono RIFF/WAVE, 16-bit PCM or 32-bit IEEE float. PCM samples map to
// v / 32768.
AudioBuffer ReadWav(const std::filesystem::path& path);

// PCM16 quantizes to round(x * 32768) clamped to the int16 range.
void WriteWav(const std::filesystem::path& path, const AudioBuffer& audio,
              WavFormat format = WavFormat::kFloat32);

}  // namespace fbaec

#endif  // FBAEC_WAV_IO_H_

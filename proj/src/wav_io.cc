#include "fbaec/wav_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fbaec/errors.h"

namespace fbaec {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

std::uint32_t U32At(const std::vector<std::uint8_t>& b, std::size_t pos) {
  return static_cast<std::uint32_t>(b[pos]) |
         (static_cast<std::uint32_t>(b[pos + 1]) << 8) |
         (static_cast<std::uint32_t>(b[pos + 2]) << 16) |
         (static_cast<std::uint32_t>(b[pos + 3]) << 24);
}

std::uint16_t U16At(const std::vector<std::uint8_t>& b, std::size_t pos) {
  return static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
}

void PutU32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void PutU16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

void PutTag(std::vector<std::uint8_t>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

}  // namespace

AudioBuffer ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t len = U32At(b, pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (len < 16 || body + len > b.size()) {
        throw FormatError(name + ": truncated fmt chunk");
      }
      format = U16At(b, body);
      channels = U16At(b, body + 2);
      rate = U32At(b, body + 4);
      bits = U16At(b, body + 14);
      if (format == kFormatExtensible && len >= 26) {
        format = U16At(b, body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data_pos = body;
      data_len = std::min<std::size_t>(len, b.size() - body);
      have_data = true;
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || !have_data) {
    throw FormatError(name + ": missing fmt or data chunk");
  }
  if (channels != 1) {
    throw FormatError(name + ": only mono files are supported");
  }

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(U16At(b, data_pos + 2 * i));
      audio.samples[i] = v / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      audio.samples[i] = std::bit_cast<float>(U32At(b, data_pos + 4 * i));
    }
  } else {
    throw FormatError(name + ": unsupported sample format (need PCM16 or "
                             "float32)");
  }
  ValidateAudio(audio);
  return audio;
}

void WriteWav(const std::filesystem::path& path, const AudioBuffer& audio,
              WavFormat format) {
  CheckSampleRate(audio.sample_rate);
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(audio.size() * (bits / 8));

  std::vector<std::uint8_t> b;
  b.reserve(44 + data_len);
  PutTag(b, "RIFF");
  PutU32(b, 36 + data_len);
  PutTag(b, "WAVE");
  PutTag(b, "fmt ");
  PutU32(b, 16);
  PutU16(b, pcm ? kFormatPcm : kFormatFloat);
  PutU16(b, 1);
  PutU32(b, static_cast<std::uint32_t>(audio.sample_rate));
  PutU32(b, static_cast<std::uint32_t>(audio.sample_rate) * (bits / 8));
  PutU16(b, bits / 8);
  PutU16(b, bits);
  PutTag(b, "data");
  PutU32(b, data_len);
  for (double x : audio.samples) {
    if (pcm) {
      const double scaled = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
      PutU16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      PutU32(b, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace fbaec

#include "earlydet/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "earlydet/error.hpp"

namespace earlydet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
T read_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact("missing file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InputError(name + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw InputError(name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw InputError(name + ": short fmt chunk");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && size >= 40) {
        format = read_le<std::uint16_t>(chunk + 32);  // sub-format GUID prefix
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (format == 0 || data == nullptr) {
    throw InputError(name + ": missing fmt or data chunk");
  }
  if (channels != 1) {
    throw InputError(name + ": expected mono audio, got " +
                     std::to_string(channels) + " channels");
  }

  AudioBuffer audio;
  audio.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    audio.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
      audio.samples[i] = read_le<std::int16_t>(data + 2 * i) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    audio.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
      audio.samples[i] = read_le<float>(data + 4 * i);
    }
  } else {
    throw InputError(name + ": unsupported encoding (format " +
                     std::to_string(format) + ", " + std::to_string(bits) +
                     " bits)");
  }
  return audio;
}

namespace {

std::int16_t pcm16_code(double s) {
  const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
  return static_cast<std::int16_t>(std::lround(clipped * 32768.0));
}

}  // namespace

AudioBuffer quantize_pcm16(const AudioBuffer& audio) {
  AudioBuffer out = audio;
  for (double& s : out.samples) s = pcm16_code(s) / 32768.0;
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));

  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, format);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * (bits / 8));
  put_le<std::uint16_t>(out, bits / 8);
  put_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_size);
  for (double s : audio.samples) {
    if (encoding == WavEncoding::kPcm16) {
      put_le<std::int16_t>(out, pcm16_code(s));
    } else {
      put_le<float>(out, static_cast<float>(s));
    }
  }
}

void write_feature_file(const std::filesystem::path& path, const FeatureFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "earlydet-features 1\n"
      << "count " << file.framewise.cols() << "\n"
      << "dim " << file.framewise.rows() << "\n"
      << "hop_s " << file.hop_s << "\n"
      << "frame_s " << file.frame_s << "\n";
  if (!file.config_hash.empty()) out << "config_hash " << file.config_hash << "\n";
  out << "end_header\n";
  // Column-major dim x count storage is exactly row-major count x dim.
  out.write(reinterpret_cast<const char*>(file.framewise.data()),
            static_cast<std::streamsize>(file.framewise.size() * sizeof(float)));
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact("missing feature file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line != "earlydet-features 1") {
    throw InputError(path.string() + ": not an earlydet feature file");
  }
  long count = -1;
  long dim = -1;
  FeatureFile file;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "count") fields >> count;
    else if (key == "dim") fields >> dim;
    else if (key == "hop_s") fields >> file.hop_s;
    else if (key == "frame_s") fields >> file.frame_s;
    else if (key == "config_hash") fields >> file.config_hash;
  }
  if (line != "end_header" || count < 0 || dim <= 0) {
    throw InputError(path.string() + ": malformed feature header");
  }
  file.framewise.resize(dim, count);
  in.read(reinterpret_cast<char*>(file.framewise.data()),
          static_cast<std::streamsize>(file.framewise.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(file.framewise.size() * sizeof(float))) {
    throw InputError(path.string() + ": truncated feature payload");
  }
  return file;
}

}  // namespace earlydet

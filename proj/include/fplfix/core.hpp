#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fplfix {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem / stream failures: missing files, truncated payloads.
class IoError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid input: bad magic, malformed CSV row, wrong version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input is valid but has no usable signal (zero vector, constant image).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

enum class Sensor : std::uint8_t { optical = 0, capacitive = 1, synthetic = 2 };

inline const char* to_string(Sensor s) {
  switch (s) {
    case Sensor::optical: return "optical";
    case Sensor::capacitive: return "capacitive";
    case Sensor::synthetic: return "synthetic";
  }
  return "?";
}

inline Sensor sensor_from_string(const std::string& s) {
  if (s == "optical") return Sensor::optical;
  if (s == "capacitive") return Sensor::capacitive;
  if (s == "synthetic") return Sensor::synthetic;
  throw FormatError("unknown sensor tag: '" + s + "'");
}

// Identifies one sample. (subject, finger) is the biometric instance;
// sample distinguishes captures of the same instance.
struct SampleKey {
  std::uint32_t subject = 0;
  std::uint16_t finger = 0;
  std::uint16_t sample = 0;
  Sensor sensor = Sensor::synthetic;

  std::uint64_t instance_id() const {
    return (std::uint64_t{subject} << 16) | finger;
  }

  friend bool operator==(const SampleKey& a, const SampleKey& b) {
    return a.subject == b.subject && a.finger == b.finger && a.sample == b.sample;
  }
  friend bool operator<(const SampleKey& a, const SampleKey& b) {
    if (a.subject != b.subject) return a.subject < b.subject;
    if (a.finger != b.finger) return a.finger < b.finger;
    return a.sample < b.sample;
  }

  std::string str() const {
    return std::to_string(subject) + ":" + std::to_string(finger) + ":" +
           std::to_string(sample);
  }
};

struct SampleRecord {
  std::string image_path;
  SampleKey key;
};

// Ridge ending or bifurcation: position in pixels, direction in [0, 2π).
struct Minutia {
  double x = 0;
  double y = 0;
  double theta = 0;
};

// Row-major 8-bit luminance image. Ridges are dark, valleys light.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw InvalidArgument("image dimensions must be positive");
  }

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
  }
};

}  // namespace fplfix

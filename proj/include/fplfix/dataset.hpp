#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fplfix/core.hpp"

namespace fplfix {

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline long parse_long(const std::string& s, const char* what, std::size_t row) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("row " + std::to_string(row) + ": bad " + what + " '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const char* what, std::size_t row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("row " + std::to_string(row) + ": bad " + what + " '" + s + "'");
  }
}

// Little-endian primitives. Archives are byte-exact across platforms.
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() {
    const std::uint8_t* b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const std::uint8_t* b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (std::uint32_t{b[1]} << 8) |
           (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void skip(std::size_t n) { take(n); }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (remaining() < n) throw FormatError("truncated payload");
    const std::uint8_t* r = p_;
    p_ += n;
    return r;
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw IoError("failed reading: " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing: " + path);
}

// Deterministic float-to-text; round-trips exactly through strtod.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr char kManifestHeader[] = "image_path,subject_id,finger_id,sample_id,sensor";

// Parses a manifest CSV. Records come back in file order; a duplicate
// (subject, finger, sample) key anywhere in the file is an error.
inline std::vector<SampleRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw FormatError("bad manifest header (expected '" + std::string(kManifestHeader) +
                      "'): " + path);
  }
  std::vector<SampleRecord> records;
  std::set<SampleKey> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != 5) {
      throw FormatError("row " + std::to_string(row) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
    }
    SampleRecord rec;
    rec.image_path = fields[0];
    const long subject = detail::parse_long(fields[1], "subject_id", row);
    const long finger = detail::parse_long(fields[2], "finger_id", row);
    const long sample = detail::parse_long(fields[3], "sample_id", row);
    if (subject < 0) throw FormatError("row " + std::to_string(row) + ": subject_id < 0");
    if (finger < 0 || finger > 9) {
      throw FormatError("row " + std::to_string(row) + ": finger_id outside 0..9");
    }
    if (sample < 0) throw FormatError("row " + std::to_string(row) + ": sample_id < 0");
    rec.key.subject = static_cast<std::uint32_t>(subject);
    rec.key.finger = static_cast<std::uint16_t>(finger);
    rec.key.sample = static_cast<std::uint16_t>(sample);
    try {
      rec.key.sensor = sensor_from_string(fields[4]);
    } catch (const FormatError& e) {
      throw FormatError("row " + std::to_string(row) + ": " + e.what());
    }
    if (!seen.insert(rec.key).second) {
      throw FormatError("row " + std::to_string(row) + ": duplicate key " + rec.key.str());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline void save_manifest(const std::vector<SampleRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << kManifestHeader << "\n";
  for (const auto& r : records) {
    out << r.image_path << "," << r.key.subject << "," << r.key.finger << ","
        << r.key.sample << "," << to_string(r.key.sensor) << "\n";
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

// Fixed-length embeddings keyed by sample. Every vector is unit-norm.
struct EmbeddingArchive {
  struct Record {
    SampleKey key;
    std::vector<float> vec;
  };

  std::uint32_t dim = 0;
  std::vector<Record> records;

  void validate() const {
    std::set<SampleKey> seen;
    for (const auto& r : records) {
      if (r.vec.size() != dim) {
        throw ContractViolation("archive record " + r.key.str() + " has dim " +
                                std::to_string(r.vec.size()) + ", expected " +
                                std::to_string(dim));
      }
      double norm2 = 0;
      for (float v : r.vec) norm2 += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
        throw ContractViolation("archive record " + r.key.str() + " is not unit-norm");
      }
      if (!seen.insert(r.key).second) {
        throw ContractViolation("archive has duplicate key " + r.key.str());
      }
    }
  }
};

inline constexpr char kArchiveMagic[4] = {'F', 'P', 'E', 'B'};
inline constexpr std::uint16_t kArchiveVersion = 1;

inline void write_archive(const EmbeddingArchive& archive, const std::string& path) {
  archive.validate();
  std::string out;
  out.reserve(18 + archive.records.size() * (12 + std::size_t{archive.dim} * 4));
  out.append(kArchiveMagic, 4);
  detail::put_u16(out, kArchiveVersion);
  detail::put_u32(out, archive.dim);
  detail::put_u64(out, archive.records.size());
  for (const auto& r : archive.records) {
    detail::put_u32(out, r.key.subject);
    detail::put_u16(out, r.key.finger);
    detail::put_u16(out, r.key.sample);
    out.push_back(static_cast<char>(r.key.sensor));
    out.append(3, '\0');
    for (float v : r.vec) detail::put_f32(out, v);
  }
  detail::write_file_bytes(path, out);
}

inline EmbeddingArchive read_archive(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader in(bytes.data(), bytes.size());
  char magic[4];
  for (char& c : magic) c = static_cast<char>(in.u8());
  if (std::memcmp(magic, kArchiveMagic, 4) != 0) {
    throw FormatError("bad archive magic: " + path);
  }
  const std::uint16_t version = in.u16();
  if (version != kArchiveVersion) {
    throw FormatError("unsupported archive version " + std::to_string(version) + ": " + path);
  }
  EmbeddingArchive archive;
  archive.dim = in.u32();
  const std::uint64_t count = in.u64();
  const std::size_t record_bytes = 12 + std::size_t{archive.dim} * 4;
  if (in.remaining() != count * record_bytes) {
    throw FormatError("archive payload size inconsistent with dim/count: " + path);
  }
  archive.records.resize(count);
  for (auto& r : archive.records) {
    r.key.subject = in.u32();
    r.key.finger = in.u16();
    r.key.sample = in.u16();
    const std::uint8_t sensor = in.u8();
    if (sensor > 2) throw FormatError("bad sensor tag in archive: " + path);
    r.key.sensor = static_cast<Sensor>(sensor);
    in.skip(3);
    r.vec.resize(archive.dim);
    for (auto& v : r.vec) v = in.f32();
  }
  archive.validate();
  return archive;
}

// One similarity score between a probe and a gallery sample.
struct ScoreEntry {
  SampleKey probe;
  SampleKey gallery;
  double score = 0;
};

struct ScoreSet {
  std::vector<ScoreEntry> mated;
  std::vector<ScoreEntry> non_mated;
};

inline constexpr char kScoreHeader[] = "probe_key,gallery_key,mated,score";

namespace detail {

inline SampleKey parse_key(const std::string& s, std::size_t row) {
  SampleKey key;
  const auto a = s.find(':');
  const auto b = s.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw FormatError("row " + std::to_string(row) + ": bad key '" + s + "'");
  }
  key.subject = static_cast<std::uint32_t>(parse_long(s.substr(0, a), "key subject", row));
  key.finger = static_cast<std::uint16_t>(parse_long(s.substr(a + 1, b - a - 1), "key finger", row));
  key.sample = static_cast<std::uint16_t>(parse_long(s.substr(b + 1), "key sample", row));
  return key;
}

}  // namespace detail

inline void save_scores(const ScoreSet& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores: " + path);
  out << kScoreHeader << "\n";
  for (const auto& e : scores.mated) {
    out << e.probe.str() << "," << e.gallery.str() << ",1," << detail::format_double(e.score)
        << "\n";
  }
  for (const auto& e : scores.non_mated) {
    out << e.probe.str() << "," << e.gallery.str() << ",0," << detail::format_double(e.score)
        << "\n";
  }
  if (!out) throw IoError("failed writing scores: " + path);
}

inline ScoreSet load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty score file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoreHeader) throw FormatError("bad score header: " + path);
  ScoreSet scores;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != 4) {
      throw FormatError("row " + std::to_string(row) + ": expected 4 fields");
    }
    ScoreEntry e;
    e.probe = detail::parse_key(fields[0], row);
    e.gallery = detail::parse_key(fields[1], row);
    e.score = detail::parse_double(fields[3], "score", row);
    if (fields[2] == "1") {
      scores.mated.push_back(e);
    } else if (fields[2] == "0") {
      scores.non_mated.push_back(e);
    } else {
      throw FormatError("row " + std::to_string(row) + ": mated flag must be 0 or 1");
    }
  }
  return scores;
}

// Minutiae CSV, shared by the synthetic ground truth and the detector output.
inline constexpr char kMinutiaeHeader[] = "subject_id,finger_id,sample_id,x,y,theta_deg";

inline void save_minutiae(const std::map<SampleKey, std::vector<Minutia>>& table,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write minutiae: " + path);
  out << kMinutiaeHeader << "\n";
  for (const auto& [key, list] : table) {
    for (const auto& m : list) {
      out << key.subject << "," << key.finger << "," << key.sample << ","
          << detail::format_double(m.x) << "," << detail::format_double(m.y) << ","
          << detail::format_double(m.theta * 180.0 / 3.141592653589793) << "\n";
    }
  }
  if (!out) throw IoError("failed writing minutiae: " + path);
}

inline std::map<SampleKey, std::vector<Minutia>> load_minutiae(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open minutiae: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty minutiae file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMinutiaeHeader) throw FormatError("bad minutiae header: " + path);
  std::map<SampleKey, std::vector<Minutia>> table;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != 6) {
      throw FormatError("row " + std::to_string(row) + ": expected 6 fields");
    }
    SampleKey key;
    key.subject = static_cast<std::uint32_t>(detail::parse_long(fields[0], "subject_id", row));
    key.finger = static_cast<std::uint16_t>(detail::parse_long(fields[1], "finger_id", row));
    key.sample = static_cast<std::uint16_t>(detail::parse_long(fields[2], "sample_id", row));
    Minutia m;
    m.x = detail::parse_double(fields[3], "x", row);
    m.y = detail::parse_double(fields[4], "y", row);
    m.theta = detail::parse_double(fields[5], "theta_deg", row) * 3.141592653589793 / 180.0;
    table[key].push_back(m);
  }
  return table;
}

}  // namespace fplfix

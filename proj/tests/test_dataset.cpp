#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <fstream>
#include <random>

#include "fplfix/dataset.hpp"
#include "fplfix/image_io.hpp"
#include "helpers.hpp"

using namespace fplfix;
using testutil::TempDir;

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

EmbeddingArchive random_archive(std::mt19937& rng, std::uint32_t dim, int instances,
                                int samples) {
  EmbeddingArchive a;
  a.dim = dim;
  for (int k = 0; k < instances; ++k) {
    for (int s = 0; s < samples; ++s) {
      EmbeddingArchive::Record rec;
      rec.key = {static_cast<std::uint32_t>(k / 10), static_cast<std::uint16_t>(k % 10),
                 static_cast<std::uint16_t>(s), Sensor::synthetic};
      rec.vec = testutil::random_unit_vector(rng, dim);
      a.records.push_back(std::move(rec));
    }
  }
  return a;
}

}  // namespace

TEST_CASE("manifest loads in file order", "[dataset]") {
  TempDir dir("manifest");
  write_text(dir.file("m.csv"),
             "image_path,subject_id,finger_id,sample_id,sensor\n"
             "a.pgm,0,0,0,optical\n"
             "b.pgm,0,0,1,capacitive\n"
             "c.pgm,1,9,0,synthetic\n");
  const auto records = load_manifest(dir.file("m.csv"));
  REQUIRE(records.size() == 3);
  CHECK(records[0].image_path == "a.pgm");
  CHECK(records[1].key.sample == 1);
  CHECK(records[1].key.sensor == Sensor::capacitive);
  CHECK(records[2].key.finger == 9);
}

TEST_CASE("manifest at evaluation-set scale", "[dataset]") {
  // 130 subjects x 10 fingers x 12 samples.
  TempDir dir("manifest_big");
  std::string csv = "image_path,subject_id,finger_id,sample_id,sensor\n";
  for (int subject = 0; subject < 130; ++subject) {
    for (int finger = 0; finger < 10; ++finger) {
      for (int sample = 0; sample < 12; ++sample) {
        csv += "img.pgm," + std::to_string(subject) + "," + std::to_string(finger) + "," +
               std::to_string(sample) + ",optical\n";
      }
    }
  }
  write_text(dir.file("m.csv"), csv);
  CHECK(load_manifest(dir.file("m.csv")).size() == 15600);
}

TEST_CASE("manifest header-only file yields empty list", "[dataset]") {
  TempDir dir("manifest_empty");
  write_text(dir.file("m.csv"), "image_path,subject_id,finger_id,sample_id,sensor\n");
  CHECK(load_manifest(dir.file("m.csv")).empty());
}

TEST_CASE("manifest rejects duplicates and malformed rows", "[dataset]") {
  TempDir dir("manifest_bad");
  write_text(dir.file("dup.csv"),
             "image_path,subject_id,finger_id,sample_id,sensor\n"
             "a.pgm,0,0,0,optical\n"
             "b.pgm,0,0,0,optical\n");
  CHECK_THROWS_AS(load_manifest(dir.file("dup.csv")), FormatError);
  CHECK_THROWS_WITH(load_manifest(dir.file("dup.csv")),
                    Catch::Matchers::ContainsSubstring("row 3"));

  write_text(dir.file("badnum.csv"),
             "image_path,subject_id,finger_id,sample_id,sensor\n"
             "a.pgm,zero,0,0,optical\n");
  CHECK_THROWS_WITH(load_manifest(dir.file("badnum.csv")),
                    Catch::Matchers::ContainsSubstring("row 2"));

  write_text(dir.file("badsensor.csv"),
             "image_path,subject_id,finger_id,sample_id,sensor\n"
             "a.pgm,0,0,0,thermal\n");
  CHECK_THROWS_AS(load_manifest(dir.file("badsensor.csv")), FormatError);

  CHECK_THROWS_AS(load_manifest(dir.file("missing.csv")), IoError);
}

TEST_CASE("manifest duplicate-key detection over random permutations", "[dataset]") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir("manifest_prop");
    std::vector<std::array<int, 3>> keys;
    for (int s = 0; s < 4; ++s) {
      for (int f = 0; f < 3; ++f) {
        for (int i = 0; i < 2; ++i) keys.push_back({s, f, i});
      }
    }
    std::shuffle(keys.begin(), keys.end(), rng);
    const bool inject_dup = trial % 2 == 0;
    if (inject_dup) keys.push_back(keys[rng() % keys.size()]);
    std::string csv = "image_path,subject_id,finger_id,sample_id,sensor\n";
    for (const auto& k : keys) {
      csv += "x.pgm," + std::to_string(k[0]) + "," + std::to_string(k[1]) + "," +
             std::to_string(k[2]) + ",synthetic\n";
    }
    write_text(dir.file("m.csv"), csv);
    if (inject_dup) {
      CHECK_THROWS_AS(load_manifest(dir.file("m.csv")), FormatError);
    } else {
      CHECK(load_manifest(dir.file("m.csv")).size() == keys.size());
    }
  }
}

TEST_CASE("PGM decode is pixel-exact", "[dataset]") {
  TempDir dir("pgm");

  GrayImage zeros(299, 299, 0);
  save_pgm(zeros, dir.file("zeros.pgm"));
  const GrayImage loaded = load_image(dir.file("zeros.pgm"));
  CHECK(loaded.width == 299);
  CHECK(loaded.height == 299);
  CHECK(loaded == zeros);

  write_text(dir.file("tiny.pgm"), "P2\n2 2\n255\n0 255\n255 0\n");
  const GrayImage tiny = load_image(dir.file("tiny.pgm"));
  REQUIRE(tiny.data.size() == 4);
  CHECK(tiny.data == std::vector<std::uint8_t>{0, 255, 255, 0});
}

TEST_CASE("image loader rejects color and broken input", "[dataset]") {
  TempDir dir("badimg");
  // 1x1 RGB PNG, pre-encoded.
  static const unsigned char rgb_png[] = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
      0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00,
      0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x78,
      0x9c, 0x63, 0xe0, 0x12, 0x91, 0x03, 0x00, 0x00, 0x68, 0x00, 0x3d, 0x54, 0x08, 0xa3,
      0xf7, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  {
    std::ofstream out(dir.file("rgb.png"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(rgb_png), sizeof(rgb_png));
  }
  CHECK_THROWS_AS(load_image(dir.file("rgb.png")), FormatError);

  write_text(dir.file("trunc.pgm"), "P5\n10 10\n255\nabc");
  CHECK_THROWS_AS(load_image(dir.file("trunc.pgm")), IoError);

  write_text(dir.file("deep.pgm"), "P5\n2 2\n65535\n");
  CHECK_THROWS_AS(load_image(dir.file("deep.pgm")), FormatError);

  write_text(dir.file("junk.bin"), "NOTANIMAGE");
  CHECK_THROWS_AS(load_image(dir.file("junk.bin")), FormatError);
}

TEST_CASE("grayscale PNG round-trips through libpng", "[dataset]") {
  // 2x1 gray PNG with pixels {7, 200}.
  static const unsigned char gray_png[] = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
      0x44, 0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
      0x00, 0xd1, 0x49, 0x20, 0x56, 0x00, 0x00, 0x00, 0x0b, 0x49, 0x44, 0x41, 0x54, 0x78,
      0x9c, 0x63, 0x60, 0x3f, 0x01, 0x00, 0x00, 0xd9, 0x00, 0xd0, 0xd7, 0xa6, 0x22, 0x3c,
      0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  TempDir dir("gpng");
  {
    std::ofstream out(dir.file("g.png"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(gray_png), sizeof(gray_png));
  }
  const GrayImage img = load_image(dir.file("g.png"));
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 1);
  CHECK(img.data[0] == 7);
  CHECK(img.data[1] == 200);
}

TEST_CASE("archive round-trip is bit-exact", "[dataset]") {
  TempDir dir("archive");
  std::mt19937 rng(11);

  EmbeddingArchive one;
  one.dim = 512;
  one.records.push_back({{3, 1, 7, Sensor::optical}, testutil::random_unit_vector(rng, 512)});
  write_archive(one, dir.file("one.fpeb"));
  const EmbeddingArchive back = read_archive(dir.file("one.fpeb"));
  REQUIRE(back.dim == 512);
  REQUIRE(back.records.size() == 1);
  CHECK(back.records[0].key == one.records[0].key);
  CHECK(back.records[0].key.sensor == Sensor::optical);
  CHECK(back.records[0].vec == one.records[0].vec);

  // Property: random archives round-trip bit-exactly.
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint32_t dim = 1 + rng() % 64;
    const EmbeddingArchive a = random_archive(rng, dim, 1 + rng() % 5, 1 + rng() % 4);
    const std::string path = dir.file("t" + std::to_string(trial) + ".fpeb");
    write_archive(a, path);
    const EmbeddingArchive b = read_archive(path);
    REQUIRE(b.records.size() == a.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(b.records[i].key == a.records[i].key);
      CHECK(b.records[i].vec == a.records[i].vec);
    }
  }
}

TEST_CASE("archive file size follows the format definition", "[dataset]") {
  TempDir dir("archive_size");
  std::mt19937 rng(13);
  const std::uint32_t dim = 512;
  const EmbeddingArchive a = random_archive(rng, dim, 5, 4);  // 20 records
  write_archive(a, dir.file("a.fpeb"));
  const auto size = std::filesystem::file_size(dir.file("a.fpeb"));
  // header 18 bytes, record = 12-byte key block + dim float32s.
  CHECK(size == 18 + a.records.size() * (12 + std::size_t{dim} * 4));
  // The evaluation-scale archive would hold 15,600 x 512 x 4 payload bytes.
  CHECK(15600ull * (12 + 512ull * 4) + 18 ==
        18 + 15600ull * 12 + 15600ull * 512ull * 4);
}

TEST_CASE("archive rejects corrupt headers and inconsistent payloads", "[dataset]") {
  TempDir dir("archive_bad");
  std::mt19937 rng(17);
  const EmbeddingArchive a = random_archive(rng, 8, 2, 2);
  write_archive(a, dir.file("a.fpeb"));

  auto bytes = detail::read_file_bytes(dir.file("a.fpeb"));
  bytes[0] = 'X';
  write_text(dir.file("magic.fpeb"), std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(read_archive(dir.file("magic.fpeb")), FormatError);

  bytes = detail::read_file_bytes(dir.file("a.fpeb"));
  bytes[4] = 9;  // version
  write_text(dir.file("ver.fpeb"), std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(read_archive(dir.file("ver.fpeb")), FormatError);

  bytes = detail::read_file_bytes(dir.file("a.fpeb"));
  bytes.pop_back();  // truncate payload
  write_text(dir.file("short.fpeb"), std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(read_archive(dir.file("short.fpeb")), FormatError);

  EmbeddingArchive not_unit = a;
  not_unit.records[0].vec[0] += 0.1f;
  CHECK_THROWS_AS(write_archive(not_unit, dir.file("x.fpeb")), ContractViolation);
}

TEST_CASE("score CSV round-trips", "[dataset]") {
  TempDir dir("scores");
  const ScoreSet scores =
      testutil::make_score_set({0.7, 0.8, 0.9}, {0.5, 0.6, 0.75});
  save_scores(scores, dir.file("s.csv"));
  const ScoreSet back = load_scores(dir.file("s.csv"));
  REQUIRE(back.mated.size() == 3);
  REQUIRE(back.non_mated.size() == 3);
  CHECK(back.mated[0].score == 0.7);
  CHECK(back.non_mated[2].score == 0.75);
  CHECK(back.mated[1].probe.sample == 1);
}

TEST_CASE("minutiae CSV round-trips with degree conversion", "[dataset]") {
  TempDir dir("minu");
  std::map<SampleKey, std::vector<Minutia>> table;
  table[{1, 2, 3, Sensor::synthetic}] = {{10.5, 20.25, 1.5}, {100, 200, 6.0}};
  save_minutiae(table, dir.file("m.csv"));
  const auto back = load_minutiae(dir.file("m.csv"));
  REQUIRE(back.size() == 1);
  const auto& list = back.begin()->second;
  REQUIRE(list.size() == 2);
  CHECK_THAT(list[0].x, Catch::Matchers::WithinAbs(10.5, 1e-12));
  CHECK_THAT(list[0].theta, Catch::Matchers::WithinAbs(1.5, 1e-12));
  CHECK_THAT(list[1].theta, Catch::Matchers::WithinAbs(6.0, 1e-12));
}

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "ms3d/data.hpp"
#include "test_util.hpp"

namespace data = ms3d::data;
using ms3d::testing::TempDir;
using ms3d::testing::uniform_values;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST(Synthetic, DeterministicUnderSeed) {
  for (auto fam : {data::Family::gauss_blobs, data::Family::rings, data::Family::bars}) {
    const auto a = data::make_synthetic(fam, 10, 16, 7);
    const auto b = data::make_synthetic(fam, 10, 16, 7);
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
  }
}

TEST(Synthetic, DifferentSeedsDiffer) {
  const auto a = data::make_synthetic(data::Family::gauss_blobs, 10, 16, 1);
  const auto b = data::make_synthetic(data::Family::gauss_blobs, 10, 16, 2);
  EXPECT_TRUE(std::mismatch(a.images.begin(), a.images.end(), b.images.begin()).first != a.images.end());
}

TEST(Synthetic, RangeAndPositiveMaximum) {
  for (auto fam : {data::Family::gauss_blobs, data::Family::rings, data::Family::bars})
    for (std::size_t size : {16u, 32u}) {
      const auto ds = data::make_synthetic(fam, 12, size, 3);
      ASSERT_EQ(ds.images.size(), 12 * size * size);
      for (std::size_t i = 0; i < ds.n; ++i) {
        auto first = ds.images.begin() + static_cast<std::ptrdiff_t>(i * size * size);
        auto last = first + static_cast<std::ptrdiff_t>(size * size);
        EXPECT_GT(*std::max_element(first, last), 0.0);
        EXPECT_GE(*std::min_element(first, last), -1.0);
        EXPECT_LE(*std::max_element(first, last), 1.0);
      }
    }
}

TEST(Synthetic, SplitIsDisjointAndCovering) {
  for (std::size_t n : {2u, 9u, 10u, 55u, 100u}) {
    const auto ds = data::make_synthetic(data::Family::rings, n, 16, n);
    EXPECT_EQ(ds.val.size(), std::max<std::size_t>(1, n / 10));
    std::set<std::size_t> all(ds.train.begin(), ds.train.end());
    for (std::size_t v : ds.val) EXPECT_TRUE(all.insert(v).second);
    EXPECT_EQ(all.size(), n);
  }
}

TEST(Synthetic, BudgetGivesExactTrainCount) {
  const auto ds = data::make_synthetic_budget(data::Family::gauss_blobs, 50, 16, 0);
  EXPECT_EQ(ds.train.size(), 50u);
  EXPECT_GE(ds.val.size(), 1u);
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW((void)data::make_synthetic(data::Family::bars, 1, 16, 0), std::invalid_argument);
  EXPECT_THROW((void)data::make_synthetic(data::Family::bars, 10, 24, 0), std::invalid_argument);
  EXPECT_THROW((void)data::parse_family("stripes"), std::invalid_argument);
  EXPECT_EQ(data::parse_family("gauss-blobs"), data::Family::gauss_blobs);
}

TEST(Images, TwoByTwoPgmBothEncodings) {
  TempDir dir("pgm");
  write_text(dir / "a.pgm", "P2\n# comment\n2 2\n255\n0 255\n0 255\n");
  const std::string p5 = std::string("P5\n2 2\n255\n") + '\0' + '\xff' + '\0' + '\xff';
  write_text(dir / "b.pgm", p5);
  for (const char* name : {"a.pgm", "b.pgm"}) {
    const auto img = data::load_image(dir / name);
    EXPECT_EQ(img.h, 2u);
    EXPECT_EQ(img.w, 2u);
    EXPECT_EQ(img.values, (std::vector<double>{0, 1, 0, 1})) << name;
  }
}

TEST(Images, CsvRoundTripIsExact) {
  TempDir dir("csv");
  data::Image img{3, 4, 1, uniform_values(12, 5, -1e3, 1e3)};
  img.values[0] = 1e-300;
  img.values[1] = 0.1;
  data::save_csv(dir / "x.csv", img);
  const auto back = data::load_image(dir / "x.csv");
  EXPECT_EQ(back.h, 3u);
  EXPECT_EQ(back.w, 4u);
  EXPECT_EQ(back.values, img.values);
}

TEST(Images, PgmRoundTripIsEightBitExact) {
  TempDir dir("pgm_rt");
  data::Image img{5, 7, 1, {}};
  for (std::size_t i = 0; i < 35; ++i) img.values.push_back(static_cast<double>((i * 37) % 256) / 255.0);
  data::save_pgm(dir / "x.pgm", img);
  EXPECT_EQ(data::load_image(dir / "x.pgm").values, img.values);
}

TEST(Images, PngMatchesPgmOfSameContent) {
  TempDir dir("png");
  data::Image img{8, 6, 1, {}};
  for (std::size_t i = 0; i < 48; ++i) img.values.push_back(static_cast<double>((i * 53) % 256) / 255.0);
  data::save_png(dir / "x.png", img);
  data::save_pgm(dir / "x.pgm", img);
  const auto png = data::load_image(dir / "x.png");
  const auto pgm = data::load_image(dir / "x.pgm");
  EXPECT_EQ(png.h, pgm.h);
  EXPECT_EQ(png.w, pgm.w);
  EXPECT_EQ(png.values, pgm.values);
  EXPECT_EQ(png.values, img.values);
}

TEST(Images, CorruptFilesAreRejectedWithFormatName) {
  TempDir dir("bad");
  write_text(dir / "a.pgm", "P5\n4 4\n255\n\x01\x02");
  write_text(dir / "b.png", "not a png at all");
  write_text(dir / "c.csv", "1,2\n3\n");
  write_text(dir / "d.csv", "1,x\n");
  const std::pair<const char*, const char*> cases[] = {
      {"a.pgm", "pgm"}, {"b.png", "png"}, {"c.csv", "csv"}, {"d.csv", "csv"}, {"missing.pgm", "pgm"}};
  for (auto [name, fmt] : cases) {
    try {
      (void)data::load_image(dir / name);
      ADD_FAILURE() << name << " was accepted";
    } catch (const std::runtime_error& e) {
      EXPECT_EQ(std::string(e.what()).rfind(fmt, 0), 0u) << e.what();
    }
  }
  EXPECT_THROW((void)data::load_image(dir / "x.bmp"), std::invalid_argument);
}

TEST(Dumps, BinaryAndCsvRoundTrip) {
  TempDir dir("dump");
  data::GradientDump d{4, 3, 2, uniform_values(24, 9)};
  data::write_dump_binary(dir / "g.bin", d);
  const auto back = data::read_dump(dir / "g.bin");
  EXPECT_EQ(back.h, 4u);
  EXPECT_EQ(back.w, 3u);
  EXPECT_EQ(back.c, 2u);
  EXPECT_EQ(back.values, d.values);

  data::save_csv(dir / "g.csv", data::Image{4, 6, 1, d.values});
  EXPECT_EQ(data::read_dump(dir / "g.csv").values, d.values);
}

TEST(Dumps, BinaryPayloadIsLittleEndian) {
  TempDir dir("endian");
  data::write_dump_binary(dir / "one.bin", data::GradientDump{1, 1, 1, {1.0}});
  std::ifstream in(dir / "one.bin", std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(s.size(), std::string("F64LE 1 1 1\n").size() + 8);
  EXPECT_EQ(s.substr(s.size() - 8), std::string("\0\0\0\0\0\0\xf0\x3f", 8));
}

TEST(TileGrid, LayoutAndRange) {
  std::vector<double> imgs(5 * 4, 1.0);
  const auto g = data::tile_grid(imgs, 5, 2, 2);
  EXPECT_EQ(g.w, 3u * 3 - 1);
  EXPECT_EQ(g.h, 2u * 3 - 1);
  EXPECT_EQ(g.values[0], 1.0);
  EXPECT_EQ(g.values[2], 0.0);  // gap column
  EXPECT_EQ(data::tile_grid({}, 0, 2, 2).values.size(), 0u);
}

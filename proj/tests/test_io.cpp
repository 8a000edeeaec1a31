#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "dnm/config.hpp"
#include "dnm/io.hpp"
#include "support.hpp"

using namespace dnm;

namespace {

FormatError::Kind pixmap_error(const std::string& bytes) {
  try {
    decode_pixmap(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return FormatError::Kind::io;
}

FormatError::Kind pfm_error(const std::string& bytes) {
  try {
    decode_pfm(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return FormatError::Kind::io;
}

}  // namespace

TEST(Ppm, DecodesRedPixel) {
  const std::string bytes = std::string("P6\n1 1\n255\n") + '\xff' + '\0' + '\0';
  const Tensor img = decode_pixmap(bytes);
  EXPECT_EQ(img.shape(), (Shape{1, 3, 1, 1}));
  EXPECT_EQ(img.storage(), (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Ppm, HeaderCommentsAndWhitespace) {
  const std::string bytes = std::string("P5 # gray\n2\t1 # size\n255\n") + '\x00' + '\x33';
  const Tensor img = decode_pixmap(bytes);
  EXPECT_EQ(img.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(img[1], 0x33 / 255.0);
}

TEST(Ppm, QuantisationRoundsHalfUpAndClamps) {
  EXPECT_EQ(quantize_byte(0.5), 128);
  EXPECT_EQ(quantize_byte(-0.2), 0);
  EXPECT_EQ(quantize_byte(7.0), 255);
  EXPECT_EQ(quantize_byte(1.0 / 255.0), 1);
}

TEST(Ppm, EncodeDecodeEncodeIsByteIdentical) {
  Rng rng(1);
  for (std::size_t c : {1u, 3u}) {
    const Tensor img = test::random_tensor(rng, {1, c, 5, 7});
    const std::string once = encode_pixmap(img);
    EXPECT_EQ(once.substr(0, 2), c == 3 ? "P6" : "P5");
    const Tensor back = decode_pixmap(once);
    EXPECT_LE(test::max_abs_diff(back, img), 0.5 / 255.0 + 1e-12);
    EXPECT_EQ(encode_pixmap(back), once);
  }
  test::TempDir dir;
  const Tensor img = test::random_tensor(rng, {1, 3, 4, 4});
  save_image(img, dir.str("a.ppm"));
  EXPECT_EQ(encode_pixmap(load_image(dir.str("a.ppm"))), encode_pixmap(img));
}

TEST(Ppm, ErrorKinds) {
  EXPECT_EQ(pixmap_error("P3\n1 1\n255\n0 0 0"), FormatError::Kind::bad_magic);
  EXPECT_EQ(pixmap_error(""), FormatError::Kind::bad_magic);
  EXPECT_EQ(pixmap_error(std::string("P6\n2 1\n255\n") + "abc"), FormatError::Kind::truncated);
  EXPECT_EQ(pixmap_error(std::string("P5\n1 1\n65535\n") + "ab"), FormatError::Kind::unsupported_maxval);
  EXPECT_EQ(pixmap_error(std::string("P5\n1 1\n255\n") + "ab"), FormatError::Kind::trailing_data);
  EXPECT_EQ(pixmap_error("P5\n0 1\n255\n"), FormatError::Kind::malformed_header);
  EXPECT_EQ(pixmap_error("P5\n1"), FormatError::Kind::truncated);
  EXPECT_THROW(encode_pixmap(Tensor::image(1, 2, 2, 2)), ShapeError);
  try {
    load_image("/no/such/file.ppm");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::io);
    EXPECT_NE(std::string(e.what()).find("/no/such/file.ppm"), std::string::npos);
  }
}

TEST(Pfm, ByteFixture) {
  const std::string expected = std::string("Pf\n2 1\n-1.0\n") + std::string("\x00\x00\x60\x40\x00\x00\x80\xbf", 8);
  const FloatMap m{2, 1, {3.5f, -1.0f}};
  EXPECT_EQ(encode_pfm(m), expected);
  EXPECT_EQ(decode_pfm(expected), m);
}

TEST(Pfm, RowsStoredBottomToTop) {
  const FloatMap m{1, 2, {1.0f, 2.0f}};  // top row 1, bottom row 2
  const std::string bytes = encode_pfm(m);
  const std::string payload = bytes.substr(bytes.size() - 8);
  EXPECT_EQ(payload, std::string("\x00\x00\x00\x40\x00\x00\x80\x3f", 8));
  EXPECT_EQ(decode_pfm(bytes).at(0, 0), 1.0f);
}

TEST(Pfm, RoundTripThroughTensor) {
  Rng rng(2);
  const Tensor t = test::random_tensor(rng, {1, 1, 3, 5}, -10, 10);
  test::TempDir dir;
  save_pfm(to_float_map(t), dir.str("d.pfm"));
  const FloatMap back = load_pfm(dir.str("d.pfm"));
  EXPECT_EQ(back, to_float_map(t));
  EXPECT_LT(test::max_abs_diff(to_tensor(back), t), 1e-5);
  EXPECT_EQ(encode_pfm(decode_pfm(encode_pfm(back))), encode_pfm(back));
}

TEST(Pfm, ErrorKinds) {
  const std::string payload(8, '\0');
  EXPECT_EQ(pfm_error("Pf\n2 1\n1.0\n" + payload), FormatError::Kind::unsupported_endianness);
  EXPECT_EQ(pfm_error("PF\n2 1\n-1.0\n" + payload + payload + payload), FormatError::Kind::bad_magic);
  EXPECT_EQ(pfm_error("P6\n2 1\n-1.0\n" + payload), FormatError::Kind::bad_magic);
  EXPECT_EQ(pfm_error("Pf\n2 1\n-1.0\n" + payload.substr(1)), FormatError::Kind::truncated);
  EXPECT_EQ(pfm_error("Pf\n2 1\n-1.0\n" + payload + "x"), FormatError::Kind::trailing_data);
  EXPECT_EQ(pfm_error("Pf\n2 1\nabc\n" + payload), FormatError::Kind::malformed_header);
  EXPECT_THROW(encode_pfm(FloatMap{2, 2, {1.0f}}), ShapeError);
  EXPECT_THROW(to_float_map(Tensor::image(1, 2, 2, 2)), ShapeError);
}

TEST(SceneDir, SaveAndLoad) {
  test::TempDir dir;
  for (std::size_t i = 0; i < 3; ++i) {
    SceneSpec s;
    s.height = 8;
    s.width = 32;
    s.disparity_px = 1.0 + static_cast<double>(i);
    s.seed = i;
    save_scene(generate_scene(s), dir.path(), scene_stem(i));
  }
  EXPECT_EQ(scene_stem(7), "scene_0007");
  const auto scenes = load_scene_dir(dir.path());
  ASSERT_EQ(scenes.size(), 3u);
  EXPECT_EQ(scenes[1].stem, "scene_0001");
  ASSERT_TRUE(scenes[2].sample.gt_disparity.has_value());
  for (double v : scenes[2].sample.gt_disparity->values()) EXPECT_DOUBLE_EQ(v, 3.0 / 32.0);
  EXPECT_EQ(scenes[0].sample.left.shape(), (Shape{1, 3, 8, 32}));
}

TEST(SceneDir, MissingPartsAndRig) {
  test::TempDir dir;
  SceneSpec s;
  s.height = 8;
  s.width = 32;
  StereoSample smp = generate_scene(s);
  smp.gt_disparity.reset();
  save_scene(smp, dir.path(), "a");
  const auto scenes = load_scene_dir(dir.path());
  ASSERT_EQ(scenes.size(), 1u);
  EXPECT_FALSE(scenes[0].sample.gt_disparity.has_value());
  std::filesystem::remove(dir.path() / "a.right.ppm");
  EXPECT_THROW(load_scene_dir(dir.path()), FormatError);
  EXPECT_THROW(load_scene_dir(dir.path() / "nope"), FormatError);

  std::ofstream(dir.path() / "rig.json") << rig_json(CameraRig{720.0, 0.5});
  const CameraRig rig = load_rig_or_default(dir.path());
  EXPECT_EQ(rig.focal_px, 720.0);
  EXPECT_EQ(rig.baseline_m, 0.5);
}

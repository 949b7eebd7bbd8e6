// Copyright 2026 The nerfstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nerfstream/image_codec.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "nerfstream/rng.hpp"

namespace nerfstream {
namespace {

double frame_psnr(const Frame& a, const Frame& b) {
  double sse = 0;
  size_t n = 0;
  for (int p = 0; p < 3; p++) {
    for (size_t y = 0; y < a.height; y++)
      for (size_t x = 0; x < a.width; x++) {
        double d = a.planes[p].at(x, y) - b.planes[p].at(x, y);
        sse += d * d;
        n++;
      }
  }
  if (sse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 * double(n) / sse);
}

double image_psnr_bytes(const Image& a, const Image& b) {
  double sse = 0;
  size_t n = 0;
  for (int y = 0; y < a.height; y++)
    for (int x = 0; x < a.width; x++)
      for (int c = 0; c < 3; c++) {
        double d = double(to_byte(a.at(x, y, c))) - double(to_byte(b.at(x, y, c)));
        sse += d * d;
        n++;
      }
  if (sse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 * double(n) / sse);
}

Image constant_image(int w, int h, double r, double g, double b) {
  Image img(w, h);
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) img.set(x, y, RGB{r, g, b});
  return img;
}

// Smooth gradient plus a few color blobs; compresses like natural content.
Image textured_image(int w, int h, uint64_t seed) {
  Pcg32 rng(seed);
  struct Blob {
    double cx, cy, s;
    RGB col;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < 4; i++)
    blobs.push_back(Blob{rng.uniform(0.1, 0.9) * w, rng.uniform(0.1, 0.9) * h,
                         rng.uniform(0.05, 0.2) * w,
                         RGB{rng.uniform(), rng.uniform(), rng.uniform()}});
  Image img(w, h);
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) {
      RGB px{0.15 + 0.4 * double(x) / w, 0.2 + 0.3 * double(y) / h, 0.35};
      for (const Blob& bl : blobs) {
        double d2 = (x - bl.cx) * (x - bl.cx) + (y - bl.cy) * (y - bl.cy);
        double wgt = std::exp(-d2 / (2 * bl.s * bl.s));
        px.r += wgt * (bl.col.r - px.r);
        px.g += wgt * (bl.col.g - px.g);
        px.b += wgt * (bl.col.b - px.b);
      }
      img.set(x, y, RGB{clamp01(px.r), clamp01(px.g), clamp01(px.b)});
    }
  return img;
}

Image noise_image(int w, int h, uint64_t seed) {
  Pcg32 rng(seed);
  Image img(w, h);
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++)
      img.set(x, y, RGB{rng.uniform(), rng.uniform(), rng.uniform()});
  return img;
}

Frame random_frame(size_t w, size_t h, uint64_t seed) {
  Pcg32 rng(seed);
  Frame f(w, h);
  for (int p = 0; p < 3; p++)
    for (size_t y = 0; y < h; y++)
      for (size_t x = 0; x < w; x++)
        f.planes[p].at(x, y) = double(rng.below(256));
  return f;
}

std::vector<CameraPose> orbit_poses(size_t count, int w, int h) {
  AnalyticScene scene = make_scene(11, 3);
  TrajectorySpec spec;
  spec.view_count = int(count);
  return generate_trajectory(spec, scene, w, h);
}

bool images_identical(const Image& a, const Image& b) {
  return a.width == b.width && a.height == b.height &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// Color conversion
// ---------------------------------------------------------------------------

TEST(ColorTest, GrayHasCenteredChroma) {
  for (int v : {0, 7, 128, 200, 255}) {
    Image img = constant_image(2, 2, v / 255.0, v / 255.0, v / 255.0);
    Frame f = rgb_to_ycbcr(img);
    EXPECT_EQ(f.planes[0].at(0, 0), double(v));
    EXPECT_EQ(f.planes[1].at(0, 0), 128.0);
    EXPECT_EQ(f.planes[2].at(0, 0), 128.0);
  }
}

TEST(ColorTest, RoundTripWithinOneStep) {
  Pcg32 rng(42);
  const int w = 320, h = 320;
  Image img(w, h);
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++)
      img.set(x, y, RGB{from_byte(uint8_t(rng.below(256))),
                        from_byte(uint8_t(rng.below(256))),
                        from_byte(uint8_t(rng.below(256)))});
  Frame f = rgb_to_ycbcr(img);
  for (int p = 0; p < 3; p++)
    for (double s : f.planes[p].samples) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 255.0);
      EXPECT_EQ(s, std::nearbyint(s));
    }
  Image back = ycbcr_to_rgb(f);
  int max_err = 0;
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++)
      for (int c = 0; c < 3; c++) {
        int err = std::abs(int(to_byte(img.at(x, y, c))) -
                           int(to_byte(back.at(x, y, c))));
        max_err = std::max(max_err, err);
      }
  EXPECT_LE(max_err, 1);
}

// ---------------------------------------------------------------------------
// Transform
// ---------------------------------------------------------------------------

TEST(DctTest, ConstantBlockConcentratesInDc) {
  Block8 b = Block8::Constant(1.0);
  Block8 c = dct8(b);
  EXPECT_NEAR(c(0, 0), 8.0, 1e-12);
  for (int r = 0; r < 8; r++)
    for (int cc = 0; cc < 8; cc++)
      if (r != 0 || cc != 0) EXPECT_LT(std::abs(c(r, cc)), 1e-12);
}

TEST(DctTest, ZeroBlockStaysZero) {
  Block8 c = dct8(Block8::Zero());
  EXPECT_LT(c.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DctTest, RoundTripAndParseval) {
  Pcg32 rng(3);
  for (int trial = 0; trial < 100; trial++) {
    Block8 b;
    for (int r = 0; r < 8; r++)
      for (int c = 0; c < 8; c++) b(r, c) = rng.uniform(-255.0, 255.0);
    Block8 coef = dct8(b);
    Block8 back = idct8(coef);
    EXPECT_LT((back - b).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(b.squaredNorm(), coef.squaredNorm(), 1e-9);
  }
}

TEST(DctTest, BasisIsOrthonormal) {
  const Block8& m = detail::dct8_basis();
  Block8 gram = m * m.transpose();
  EXPECT_LT((gram - Block8::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------------------
// Quantization step
// ---------------------------------------------------------------------------

TEST(QstepTest, PinnedValues) {
  EXPECT_DOUBLE_EQ(qp_to_qstep(4), 1.0);
  EXPECT_DOUBLE_EQ(qp_to_qstep(10), 2.0);
  EXPECT_NEAR(qp_to_qstep(51), 228.1, 0.05);
  EXPECT_DOUBLE_EQ(qp_to_qstep(51), std::exp2(47.0 / 6.0));
}

TEST(QstepTest, RejectsOutOfRange) {
  EXPECT_THROW(qp_to_qstep(-1), ConfigError);
  EXPECT_THROW(qp_to_qstep(52), ConfigError);
}

TEST(ZigzagTest, MatchesReferenceOrder) {
  const auto& zz = detail::zigzag_order();
  const int expected[16] = {0, 1,  8,  16, 9,  2,  3, 10,
                            17, 24, 32, 25, 18, 11, 4, 5};
  for (int i = 0; i < 16; i++) EXPECT_EQ(zz[size_t(i)], expected[i]) << i;
  EXPECT_EQ(zz[63], 63);
  std::array<bool, 64> seen{};
  for (uint8_t v : zz) seen[v] = true;
  for (bool s : seen) EXPECT_TRUE(s);
}

// ---------------------------------------------------------------------------
// Intra coding
// ---------------------------------------------------------------------------

TEST(IntraTest, UniformGrayFrameCodesCompactly) {
  Image img = constant_image(64, 64, 161 / 255.0, 161 / 255.0, 161 / 255.0);
  Frame f = rgb_to_ycbcr(img);
  EncodedFrame ef = encode_intra(f, 4);
  double bpp = double(ef.payload.size() * 8) / (64.0 * 64.0);
  EXPECT_LE(bpp, 0.05);
  Frame dec = decode_intra(ef.payload, 64, 64, 4);
  EXPECT_EQ(frame_psnr(dec, f), std::numeric_limits<double>::infinity());
}

TEST(IntraTest, NearLosslessAtQpZero) {
  Image img = textured_image(32, 32, 5);
  Frame f = rgb_to_ycbcr(img);
  EncodedFrame ef = encode_intra(f, 0);
  Frame dec = decode_intra(ef.payload, 32, 32, 0);
  EXPECT_GE(frame_psnr(dec, f), 50.0);
}

TEST(IntraTest, PayloadNonIncreasingOverQpLadder) {
  Image img = textured_image(64, 64, 9);
  Frame f = rgb_to_ycbcr(img);
  size_t prev = SIZE_MAX;
  for (int qp : {25, 30, 39, 51}) {
    size_t bytes = encode_intra(f, qp).payload.size();
    EXPECT_LE(bytes, prev) << "qp " << qp;
    prev = bytes;
  }
}

TEST(IntraTest, BlockErrorStaysWithinQuantizerBound) {
  for (int qp : {4, 25, 39}) {
    double qstep = qp_to_qstep(qp);
    double bound = (qstep + 1.0) * (qstep + 1.0) / 4.0;
    Frame f = random_frame(32, 32, 100 + uint64_t(qp));
    Frame dec = decode_intra(encode_intra(f, qp).payload, 32, 32, qp);
    for (int p = 0; p < 3; p++)
      for (size_t by = 0; by < 4; by++)
        for (size_t bx = 0; bx < 4; bx++) {
          double sse = 0;
          for (size_t r = 0; r < 8; r++)
            for (size_t c = 0; c < 8; c++) {
              double d = dec.planes[p].at(bx * 8 + c, by * 8 + r) -
                         f.planes[p].at(bx * 8 + c, by * 8 + r);
              sse += d * d;
            }
          EXPECT_LE(sse / 64.0, bound + 1e-9);
        }
  }
}

TEST(IntraTest, DecoderMatchesEncoderReconstruction) {
  Frame f = random_frame(40, 24, 77);
  EncodedFrame ef = encode_intra(f, 30);
  Frame dec = decode_intra(ef.payload, 40, 24, 30);
  for (int p = 0; p < 3; p++)
    EXPECT_EQ(ef.recon.planes[p].samples, dec.planes[p].samples);
}

TEST(IntraTest, DeterministicPayload) {
  Frame f = random_frame(24, 24, 13);
  EXPECT_EQ(encode_intra(f, 25).payload, encode_intra(f, 25).payload);
}

TEST(IntraTest, TruncatedPayloadThrows) {
  Frame f = random_frame(32, 32, 8);
  ByteBuffer payload = encode_intra(f, 10).payload;
  ByteBuffer cut(payload.begin(), payload.begin() + payload.size() / 3);
  EXPECT_THROW(decode_intra(cut, 32, 32, 10), DecodeError);
}

// ---------------------------------------------------------------------------
// Motion search
// ---------------------------------------------------------------------------

TEST(MotionTest, IdenticalContentGivesZeroVector) {
  Frame f = random_frame(48, 48, 21);
  MotionVector mv = motion_search(f.planes[0], f.planes[0], 16, 16);
  EXPECT_EQ(mv.dx, 0);
  EXPECT_EQ(mv.dy, 0);
  EXPECT_EQ(mv.sad, 0.0);
}

TEST(MotionTest, FindsPureTranslation) {
  Plane ref(48, 48);
  Pcg32 rng(5);
  for (size_t y = 0; y < 48; y++)
    for (size_t x = 0; x < 48; x++) ref.at(x, y) = double(rng.below(256));
  Plane cur(48, 48);
  for (size_t y = 0; y < 48; y++)
    for (size_t x = 0; x < 48; x++)
      cur.at(x, y) = ref.at(std::min<size_t>(x + 2, 47),
                            std::min<size_t>(y + 3, 47));
  MotionVector mv = motion_search(cur, ref, 16, 16);
  EXPECT_EQ(mv.dx, 2);
  EXPECT_EQ(mv.dy, 3);
  EXPECT_EQ(mv.sad, 0.0);
}

TEST(MotionTest, TieFallsToZeroVector) {
  Plane flat(32, 32);
  for (double& s : flat.samples) s = 99.0;
  MotionVector mv = motion_search(flat, flat, 8, 8);
  EXPECT_EQ(mv.dx, 0);
  EXPECT_EQ(mv.dy, 0);
  EXPECT_EQ(mv.sad, 0.0);
}

TEST(MotionTest, BlockOutsideFrameThrows) {
  Plane p(32, 32);
  EXPECT_THROW(motion_search(p, p, 24, 24), ConfigError);
}

// ---------------------------------------------------------------------------
// Inter coding
// ---------------------------------------------------------------------------

TEST(InterTest, IdenticalFrameSkipsEverywhere) {
  Image img = textured_image(128, 128, 30);
  Frame f = detail::pad_frame(rgb_to_ycbcr(img), 16);
  EncodedFrame ref = encode_intra(f, 30);
  EncodedFrame ef = encode_inter(f, ref.recon, 30);
  for (const MacroblockInfo& mb : ef.blocks) {
    EXPECT_EQ(mb.mode, MacroblockMode::kSkip);
    EXPECT_EQ(mb.dx, 0);
    EXPECT_EQ(mb.dy, 0);
  }
  double bpp = double(ef.payload.size() * 8) / (128.0 * 128.0);
  EXPECT_LE(bpp, 0.02);
  Frame dec = decode_inter(ef.payload, ref.recon, 30);
  for (int p = 0; p < 3; p++)
    EXPECT_EQ(dec.planes[p].samples, ref.recon.planes[p].samples);
}

TEST(InterTest, GlobalShiftCodesCheaperThanIntra) {
  const int w = 64, h = 64;
  Image base = textured_image(w, h, 31);
  Image shifted(w, h);
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) {
      int sx = std::clamp(x + 3, 0, w - 1);
      int sy = std::clamp(y + 2, 0, h - 1);
      shifted.set(x, y, base.get(sx, sy));
    }
  Frame ref_frame = detail::pad_frame(rgb_to_ycbcr(base), 16);
  Frame cur = detail::pad_frame(rgb_to_ycbcr(shifted), 16);
  EncodedFrame ref = encode_intra(ref_frame, 30);
  size_t inter_bytes = encode_inter(cur, ref.recon, 30).payload.size();
  size_t intra_bytes = encode_intra(cur, 30).payload.size();
  EXPECT_LT(inter_bytes, intra_bytes);
}

TEST(InterTest, DecoderMatchesEncoderReconstruction) {
  Frame ref_src = random_frame(48, 32, 61);
  Frame cur = random_frame(48, 32, 62);
  EncodedFrame ref = encode_intra(ref_src, 25);
  EncodedFrame ef = encode_inter(cur, ref.recon, 25);
  Frame dec = decode_inter(ef.payload, ref.recon, 25);
  for (int p = 0; p < 3; p++)
    EXPECT_EQ(dec.planes[p].samples, ef.recon.planes[p].samples);
}

TEST(InterTest, MismatchedReferenceThrows) {
  Frame cur = random_frame(32, 32, 1);
  Frame ref(48, 48);
  EXPECT_THROW(encode_inter(cur, ref, 25), ConfigError);
}

// ---------------------------------------------------------------------------
// Sequence container
// ---------------------------------------------------------------------------

TEST(SequenceTest, BitLengthIsExactFileSize) {
  std::vector<Image> frames{textured_image(32, 32, 1),
                            textured_image(32, 32, 2)};
  ImageBitstream bs =
      encode_sequence(frames, orbit_poses(2, 32, 32), CodingMode::kIntra, 30);
  EXPECT_EQ(bs.bit_length, bs.bytes.size() * 8);
}

TEST(SequenceTest, DecodeReturnsAllFramesAndPoses) {
  std::vector<Image> frames;
  for (uint64_t i = 0; i < 5; i++) frames.push_back(textured_image(24, 40, i));
  std::vector<CameraPose> poses = orbit_poses(5, 24, 40);
  ImageBitstream bs = encode_sequence(frames, poses, CodingMode::kInter, 30);
  DecodedSequence dec = decode_sequence(bs.bytes);
  EXPECT_EQ(dec.frames.size(), 5u);
  EXPECT_EQ(dec.poses.size(), 5u);
  EXPECT_EQ(dec.mode, CodingMode::kInter);
  EXPECT_EQ(dec.qp, 30);
  EXPECT_EQ(dec.width, 24u);
  EXPECT_EQ(dec.height, 40u);
  for (const Image& f : dec.frames) {
    EXPECT_EQ(f.width, 24);
    EXPECT_EQ(f.height, 40);
  }
}

TEST(SequenceTest, PosesRoundTripBitExact) {
  std::vector<Image> frames{textured_image(16, 16, 3),
                            textured_image(16, 16, 4)};
  std::vector<CameraPose> poses = orbit_poses(2, 16, 16);
  ImageBitstream bs = encode_sequence(frames, poses, CodingMode::kIntra, 25);
  DecodedSequence dec = decode_sequence(bs.bytes);
  ASSERT_EQ(dec.poses.size(), poses.size());
  for (size_t i = 0; i < poses.size(); i++) {
    EXPECT_EQ(std::memcmp(&dec.poses[i].position, &poses[i].position,
                          sizeof(Vec3)),
              0);
    EXPECT_EQ(std::memcmp(dec.poses[i].orientation.m.data(),
                          poses[i].orientation.m.data(), 9 * sizeof(double)),
              0);
    EXPECT_EQ(dec.poses[i].focal, poses[i].focal);
    EXPECT_EQ(dec.poses[i].cx, poses[i].cx);
    EXPECT_EQ(dec.poses[i].cy, poses[i].cy);
  }
}

TEST(SequenceTest, DecoderMatchesEncoderOverFortyFrames) {
  const int w = 48, h = 48;
  std::vector<Image> frames;
  Image base = textured_image(w + 16, h + 16, 44);
  for (int i = 0; i < 40; i++) {
    Image f(w, h);
    int ox = (i * 2) % 16, oy = i % 16;
    for (int y = 0; y < h; y++)
      for (int x = 0; x < w; x++) f.set(x, y, base.get(x + ox, y + oy));
    frames.push_back(f);
  }
  std::vector<CameraPose> poses = orbit_poses(40, w, h);
  for (CodingMode mode : {CodingMode::kInter, CodingMode::kIntra}) {
    std::vector<Image> recon;
    ImageBitstream bs = encode_sequence(frames, poses, mode, 30, &recon);
    DecodedSequence dec = decode_sequence(bs.bytes);
    ASSERT_EQ(dec.frames.size(), recon.size());
    for (size_t i = 0; i < recon.size(); i++)
      EXPECT_TRUE(images_identical(dec.frames[i], recon[i])) << "frame " << i;
  }
}

TEST(SequenceTest, IdenticalFramesInterStaysUnderTenPercentOfIntra) {
  Image noisy = noise_image(128, 128, 50);
  std::vector<Image> frames(40, noisy);
  std::vector<CameraPose> poses = orbit_poses(40, 128, 128);
  ImageBitstream inter =
      encode_sequence(frames, poses, CodingMode::kInter, 25);
  ImageBitstream intra =
      encode_sequence(frames, poses, CodingMode::kIntra, 25);
  EXPECT_LT(double(inter.bit_length), 0.10 * double(intra.bit_length));
}

TEST(SequenceTest, InterNeverExceedsIntraOnStaticContent) {
  for (size_t n : {2u, 5u}) {
    std::vector<Image> frames(n, textured_image(48, 48, 71));
    std::vector<CameraPose> poses = orbit_poses(n, 48, 48);
    ImageBitstream inter =
        encode_sequence(frames, poses, CodingMode::kInter, 30);
    ImageBitstream intra =
        encode_sequence(frames, poses, CodingMode::kIntra, 30);
    EXPECT_LT(inter.bit_length, intra.bit_length);
  }
}

TEST(SequenceTest, SingleFrameCostsTheSameInBothModes) {
  std::vector<Image> frames{textured_image(64, 64, 81)};
  std::vector<CameraPose> poses = orbit_poses(2, 64, 64);
  poses.resize(1);
  ImageBitstream intra =
      encode_sequence(frames, poses, CodingMode::kIntra, 30);
  ImageBitstream inter =
      encode_sequence(frames, poses, CodingMode::kInter, 30);
  EXPECT_EQ(intra.bit_length, inter.bit_length);
  EXPECT_TRUE(images_identical(decode_sequence(intra.bytes).frames[0],
                               decode_sequence(inter.bytes).frames[0]));
}

TEST(SequenceTest, QpZeroSequenceIsNearLossless) {
  std::vector<Image> frames;
  for (uint64_t i = 0; i < 3; i++)
    frames.push_back(textured_image(40, 40, 90 + i));
  std::vector<CameraPose> poses = orbit_poses(3, 40, 40);
  for (CodingMode mode : {CodingMode::kIntra, CodingMode::kInter}) {
    DecodedSequence dec =
        decode_sequence(encode_sequence(frames, poses, mode, 0).bytes);
    for (size_t i = 0; i < frames.size(); i++)
      EXPECT_GE(image_psnr_bytes(dec.frames[i], frames[i]), 50.0)
          << "frame " << i;
  }
}

TEST(SequenceTest, RateNonIncreasingOverQpLadder) {
  std::vector<Image> frames;
  for (uint64_t i = 0; i < 4; i++)
    frames.push_back(textured_image(48, 48, 60 + i));
  std::vector<CameraPose> poses = orbit_poses(4, 48, 48);
  for (CodingMode mode : {CodingMode::kIntra, CodingMode::kInter}) {
    size_t prev = SIZE_MAX;
    for (int qp : {25, 30, 39, 51}) {
      size_t bits = encode_sequence(frames, poses, mode, qp).bit_length;
      EXPECT_LE(bits, prev) << "qp " << qp;
      prev = bits;
    }
  }
}

TEST(SequenceTest, NonMultipleOfBlockDimensionsRoundTrip) {
  std::vector<Image> frames{textured_image(20, 12, 7),
                            textured_image(20, 12, 8)};
  std::vector<CameraPose> poses = orbit_poses(2, 20, 12);
  for (CodingMode mode : {CodingMode::kIntra, CodingMode::kInter}) {
    std::vector<Image> recon;
    DecodedSequence dec = decode_sequence(
        encode_sequence(frames, poses, mode, 4, &recon).bytes);
    EXPECT_EQ(dec.frames[0].width, 20);
    EXPECT_EQ(dec.frames[0].height, 12);
    for (size_t i = 0; i < 2; i++)
      EXPECT_TRUE(images_identical(dec.frames[i], recon[i]));
  }
}

TEST(SequenceTest, DeterministicBitstream) {
  std::vector<Image> frames;
  for (uint64_t i = 0; i < 3; i++)
    frames.push_back(textured_image(32, 32, 20 + i));
  std::vector<CameraPose> poses = orbit_poses(3, 32, 32);
  ImageBitstream a = encode_sequence(frames, poses, CodingMode::kInter, 39);
  ImageBitstream b = encode_sequence(frames, poses, CodingMode::kInter, 39);
  EXPECT_EQ(a.bytes, b.bytes);
}

TEST(SequenceTest, RejectsMismatchedInputs) {
  std::vector<Image> frames{textured_image(16, 16, 1)};
  EXPECT_THROW(encode_sequence({}, {}, CodingMode::kIntra, 30), ConfigError);
  EXPECT_THROW(
      encode_sequence(frames, orbit_poses(2, 16, 16), CodingMode::kIntra, 30),
      ConfigError);
  std::vector<Image> uneven{textured_image(16, 16, 1),
                            textured_image(24, 16, 2)};
  EXPECT_THROW(
      encode_sequence(uneven, orbit_poses(2, 16, 16), CodingMode::kIntra, 30),
      ConfigError);
}

TEST(SequenceTest, CorruptStreamsAreRejected) {
  std::vector<Image> frames{textured_image(24, 24, 2),
                            textured_image(24, 24, 3)};
  std::vector<CameraPose> poses = orbit_poses(2, 24, 24);
  ImageBitstream bs = encode_sequence(frames, poses, CodingMode::kIntra, 30);

  ByteBuffer bad_magic = bs.bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_sequence(bad_magic), DecodeError);

  ByteBuffer bad_version = bs.bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_sequence(bad_version), DecodeError);

  ByteBuffer bad_mode = bs.bytes;
  bad_mode[5] = 7;
  EXPECT_THROW(decode_sequence(bad_mode), DecodeError);

  ByteBuffer bad_qp = bs.bytes;
  bad_qp[6] = 77;
  EXPECT_THROW(decode_sequence(bad_qp), DecodeError);

  ByteBuffer trailing = bs.bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_sequence(trailing), DecodeError);
}

TEST(SequenceTest, TruncationNamesTheFailingFrame) {
  std::vector<Image> frames{textured_image(24, 24, 2),
                            textured_image(24, 24, 3)};
  std::vector<CameraPose> poses = orbit_poses(2, 24, 24);
  ImageBitstream bs = encode_sequence(frames, poses, CodingMode::kIntra, 30);
  ByteBuffer cut(bs.bytes.begin(), bs.bytes.end() - 4);
  try {
    decode_sequence(cut);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos)
        << e.what();
  }
}

}  // namespace
}  // namespace nerfstream

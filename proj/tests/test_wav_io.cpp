// Copyright 2026 The kws Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "expect_error.hpp"
#include "kws/io.hpp"
#include "kws/rng.hpp"
#include "kws/wav_io.hpp"

namespace kws {
namespace {

// Hand-assembled RIFF file; chunk sizes taken from the payloads.
io::Bytes riff(const io::Bytes& fmt_body, const io::Bytes& data, const io::Bytes& extra_chunk = {}) {
  io::Bytes body;
  io::put_tag(body, "WAVE");
  io::put_tag(body, "fmt ");
  io::put_u32(body, static_cast<std::uint32_t>(fmt_body.size()));
  body.insert(body.end(), fmt_body.begin(), fmt_body.end());
  body.insert(body.end(), extra_chunk.begin(), extra_chunk.end());
  io::put_tag(body, "data");
  io::put_u32(body, static_cast<std::uint32_t>(data.size()));
  body.insert(body.end(), data.begin(), data.end());
  io::Bytes out;
  io::put_tag(out, "RIFF");
  io::put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

io::Bytes pcm_fmt(std::uint16_t format = 1, std::uint16_t channels = 1, std::uint16_t bits = 16,
                  std::uint32_t rate = 16000) {
  io::Bytes f;
  io::put_u16(f, format);
  io::put_u16(f, channels);
  io::put_u32(f, rate);
  io::put_u32(f, rate * channels * bits / 8);
  io::put_u16(f, static_cast<std::uint16_t>(channels * bits / 8));
  io::put_u16(f, bits);
  return f;
}

TEST(ParseWav, MinimalFileWithOneZeroSample) {
  const AudioClip c = parse_wav(riff(pcm_fmt(), {0x00, 0x00}));
  ASSERT_EQ(c.samples.size(), 1u);
  EXPECT_EQ(c.samples[0], 0.0f);
  EXPECT_EQ(c.sample_rate, 16000u);
}

TEST(ParseWav, MostNegativeWordIsMinusOne) {
  const AudioClip c = parse_wav(riff(pcm_fmt(), {0x00, 0x80}));
  EXPECT_EQ(c.samples.at(0), -1.0f);
}

TEST(ParseWav, SkipsUnknownChunksIncludingOddPadding) {
  io::Bytes list;
  io::put_tag(list, "LIST");
  io::put_u32(list, 3);
  list.insert(list.end(), {'a', 'b', 'c', 0});  // odd size plus pad byte
  const AudioClip c = parse_wav(riff(pcm_fmt(), {0x00, 0x40}, list));
  ASSERT_EQ(c.samples.size(), 1u);
  EXPECT_EQ(c.samples[0], 0.5f);
}

TEST(ParseWav, Errors) {
  io::Bytes bad = riff(pcm_fmt(), {0, 0});
  bad[0] = 'X';
  EXPECT_KWS_ERROR(parse_wav(bad), MalformedHeader);
  EXPECT_KWS_ERROR(parse_wav(riff(pcm_fmt(3), {0, 0, 0, 0})), UnsupportedFormat);
  EXPECT_KWS_ERROR(parse_wav(riff(pcm_fmt(1, 2), {0, 0, 0, 0})), UnsupportedFormat);
  EXPECT_KWS_ERROR(parse_wav(riff(pcm_fmt(1, 1, 8), {0, 0})), UnsupportedFormat);
  io::Bytes cut = riff(pcm_fmt(), {1, 2, 3, 4});
  cut.resize(cut.size() - 2);
  EXPECT_KWS_ERROR(parse_wav(cut), TruncatedData);
  EXPECT_KWS_ERROR(parse_wav(io::Bytes{'R', 'I'}), MalformedHeader);
}

TEST(ParseWav, NeverReadsPastDeclaredDataLength) {
  io::Bytes b = riff(pcm_fmt(), {0x00, 0x40, 0x00, 0x20});
  b.insert(b.end(), {0xff, 0x7f, 0xff, 0x7f});  // trailing garbage after the data chunk
  const AudioClip c = parse_wav(b);
  ASSERT_EQ(c.samples.size(), 2u);
  EXPECT_EQ(c.samples[1], 0.25f);
}

TEST(WriteWav, HeaderArithmetic) {
  AudioClip c;
  c.samples.assign(16000, 0.0f);
  EXPECT_EQ(write_wav(c).size(), 44u + 32000u);
}

TEST(WriteWav, QuantizesHalfTo16384AndClamps) {
  AudioClip c;
  c.samples = {0.5f, 2.0f, -2.0f};
  const io::Bytes b = write_wav(c);
  EXPECT_EQ(io::get_u16(b, 44), 16384);
  EXPECT_EQ(io::get_u16(b, 46), 32767);
  EXPECT_EQ(io::get_u16(b, 48), 0x8000);
}

TEST(WriteWav, RoundTripOfRandomIntegers) {
  Rng rng(11);
  AudioClip c;
  std::vector<std::int32_t> ints;
  for (int i = 0; i < 16; ++i) {
    ints.push_back(static_cast<std::int32_t>(rng.uniform_index(65536)) - 32768);
    c.samples.push_back(static_cast<float>(ints.back()) / 32768.0f);
  }
  const AudioClip back = parse_wav(write_wav(c));
  ASSERT_EQ(back.samples.size(), ints.size());
  for (std::size_t i = 0; i < ints.size(); ++i) {
    EXPECT_EQ(static_cast<std::int32_t>(back.samples[i] * 32768.0f), ints[i]);
  }
}

TEST(WriteWav, RoundTripIsBitExactOnGridSamples) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    AudioClip c;
    c.sample_rate = 8000 + static_cast<std::uint32_t>(rng.uniform_index(40000));
    c.samples.resize(1 + rng.uniform_index(300));
    for (auto& s : c.samples) s = static_cast<float>(static_cast<std::int32_t>(rng.uniform_index(65536)) - 32768) / 32768.0f;
    const AudioClip back = parse_wav(write_wav(c));
    EXPECT_EQ(back.sample_rate, c.sample_rate);
    ASSERT_EQ(back.samples.size(), c.samples.size());
    EXPECT_EQ(std::memcmp(back.samples.data(), c.samples.data(), c.samples.size() * sizeof(float)), 0);
  }
}

TEST(WavFile, SaveLoadCarriesSourcePath) {
  const auto path = std::filesystem::temp_directory_path() / "kws_wav_io_test" / "a.wav";
  AudioClip c;
  c.samples = {0.25f, -0.5f};
  save_wav(path, c);
  const AudioClip back = load_wav(path);
  EXPECT_EQ(back.samples, c.samples);
  ASSERT_TRUE(back.source_path);
  EXPECT_EQ(*back.source_path, path.string());
  std::filesystem::remove_all(path.parent_path());
}

TEST(PeakVolume, Examples) {
  AudioClip c;
  c.samples.assign(10, 0.0f);
  EXPECT_EQ(peak_volume(c), 0.0f);
  c.samples = {0.1f, -0.7f, 0.3f};
  EXPECT_EQ(peak_volume(c), 0.7f);
  AudioClip doubled = c;
  for (auto& s : doubled.samples) s *= 2;
  EXPECT_FLOAT_EQ(peak_volume(doubled), 2 * peak_volume(c));
  EXPECT_KWS_ERROR(peak_volume(AudioClip{}), EmptyClip);
}

TEST(SilenceCandidate, StrictThreshold) {
  AudioClip zero;
  zero.samples.assign(100, 0.0f);
  EXPECT_TRUE(is_silence_candidate(zero, 0.01f));
  EXPECT_FALSE(is_silence_candidate(zero, 0.0f));
  AudioClip loud;
  loud.samples = {0.5f, -0.2f};
  EXPECT_FALSE(is_silence_candidate(loud, 0.01f));
  EXPECT_KWS_ERROR(is_silence_candidate(AudioClip{}, 0.01f), EmptyClip);
}

TEST(SplitIntoFragments, CountsAndRemainder) {
  AudioClip c;
  c.samples.resize(48000);
  for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i] = static_cast<float>(i % 1000) / 1000.0f;
  const auto frags = split_into_fragments(c, 16000);
  ASSERT_EQ(frags.size(), 3u);
  std::vector<float> joined;
  for (const auto& f : frags) joined.insert(joined.end(), f.samples.begin(), f.samples.end());
  EXPECT_EQ(joined, c.samples);

  c.samples.resize(16000);
  ASSERT_EQ(split_into_fragments(c, 16000).size(), 1u);
  EXPECT_EQ(split_into_fragments(c, 16000)[0].samples, c.samples);
  c.samples.resize(15999);
  EXPECT_TRUE(split_into_fragments(c, 16000).empty());
}

TEST(SplitIntoFragments, ConcatenationIsPrefix) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    AudioClip c;
    c.samples.resize(rng.uniform_index(5000));
    for (auto& s : c.samples) s = static_cast<float>(rng.uniform(-1, 1));
    const std::size_t frag = 1 + rng.uniform_index(700);
    std::vector<float> joined;
    for (const auto& f : split_into_fragments(c, frag)) joined.insert(joined.end(), f.samples.begin(), f.samples.end());
    ASSERT_EQ(joined.size(), frag * (c.samples.size() / frag));
    EXPECT_TRUE(std::equal(joined.begin(), joined.end(), c.samples.begin()));
  }
}

}  // namespace
}  // namespace kws

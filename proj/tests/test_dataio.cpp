#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "neurodecode/dataio.hpp"
#include "neurodecode/errors.hpp"

using namespace nd;

namespace {

const char* kFixtureHeader =
    "Brain Vision Data Exchange Header File Version 1.0\n"
    "[Common Infos]\n"
    "DataFile=rec.eeg\n"
    "NumberOfChannels=2\n"
    "SamplingInterval=2000\n"
    "BinaryFormat=IEEE_FLOAT_32\n"
    "Orientation=MULTIPLEXED\n"
    "[Channel Infos]\n"
    "Ch1=Cz,,1,uV\n"
    "Ch2=VEOG,,1,uV\n";

std::vector<std::uint8_t> pack_f32(const std::vector<float>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 4);
  std::memcpy(bytes.data(), v.data(), bytes.size());
  return bytes;
}

}  // namespace

TEST_CASE("parse_header fixture gives 2 channels at 500 Hz") {
  VhdrHeader h = parse_header(kFixtureHeader);
  CHECK(h.n_channels == 2);
  CHECK(h.sample_rate_hz == doctest::Approx(500.0));
  CHECK(h.data_file == "rec.eeg");
  REQUIRE(h.channel_names.size() == 2);
  CHECK(h.channel_names[0] == "Cz");
  CHECK(h.channel_names[1] == "VEOG");
  CHECK(channel_kind_from_name(h.channel_names[1]) == ChannelKind::VEOG);
}

TEST_CASE("parse_header ignores comment lines") {
  std::string with_comments = std::string("; leading comment\n") + kFixtureHeader +
                              "; trailing comment\n";
  VhdrHeader a = parse_header(kFixtureHeader);
  VhdrHeader b = parse_header(with_comments);
  CHECK(a.n_channels == b.n_channels);
  CHECK(a.sample_rate_hz == b.sample_rate_hz);
  CHECK(a.channel_names == b.channel_names);
}

TEST_CASE("parse_header error paths") {
  SUBCASE("missing NumberOfChannels") {
    std::string text = kFixtureHeader;
    auto pos = text.find("NumberOfChannels=2\n");
    text.erase(pos, std::strlen("NumberOfChannels=2\n"));
    CHECK_THROWS_WITH_AS(parse_header(text), doctest::Contains("NumberOfChannels"), DataError);
  }
  SUBCASE("unsupported binary format") {
    std::string text = kFixtureHeader;
    auto pos = text.find("IEEE_FLOAT_32");
    text.replace(pos, std::strlen("IEEE_FLOAT_32"), "INT_16");
    CHECK_THROWS_WITH_AS(parse_header(text), doctest::Contains("INT_16"), DataError);
  }
  SUBCASE("duplicate channel index") {
    std::string text = std::string(kFixtureHeader) + "Ch2=Fz,,1,uV\n";
    CHECK_THROWS_WITH_AS(parse_header(text), doctest::Contains("duplicate"), DataError);
  }
}

TEST_CASE("read_binary de-interleaves multiplexed float32") {
  VhdrHeader h = parse_header(kFixtureHeader);
  SUBCASE("hand-packed fixture") {
    Tensor t = read_binary(pack_f32({1, 3, 2, 4}), h);
    CHECK(t.shape() == Shape{2, 2});
    CHECK(t.at2(0, 0) == 1.0);
    CHECK(t.at2(0, 1) == 2.0);
    CHECK(t.at2(1, 0) == 3.0);
    CHECK(t.at2(1, 1) == 4.0);
  }
  SUBCASE("empty payload rejected") {
    CHECK_THROWS_AS(read_binary({}, h), DataError);
  }
  SUBCASE("length not divisible by 4C rejected") {
    CHECK_THROWS_WITH_AS(read_binary(pack_f32({1, 2, 3}), h), doctest::Contains("truncated"),
                         DataError);
  }
  SUBCASE("all zero bytes give all zero tensor") {
    Tensor t = read_binary(std::vector<std::uint8_t>(16, 0), h);
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t.at(i) == 0.0);
  }
}

TEST_CASE("binary round trip is exact") {
  VhdrHeader h = parse_header(kFixtureHeader);
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<float> v(2 * 7);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    auto bytes = pack_f32(v);
    CHECK(write_binary(read_binary(bytes, h)) == bytes);
  }
}

TEST_CASE("load_alignment") {
  SUBCASE("single row") {
    WordAlignment a = load_alignment("word,onset_s,offset_s,segment\nalice,0.50,0.91,0\n");
    REQUIRE(a.entries.size() == 1);
    CHECK(a.entries[0].word == "alice");
    CHECK(a.entries[0].onset_s == doctest::Approx(0.5));
    CHECK(a.entries[0].offset_s == doctest::Approx(0.91));
    CHECK(a.entries[0].segment_index == 0);
  }
  SUBCASE("empty body") {
    CHECK(load_alignment("word,onset_s,offset_s,segment\n").entries.empty());
  }
  SUBCASE("offset before onset names the row") {
    CHECK_THROWS_WITH_AS(
        load_alignment("word,onset_s,offset_s,segment\na,0.1,0.2,0\nb,0.9,0.4,0\n"),
        doctest::Contains("row 3"), DataError);
  }
  SUBCASE("non-numeric time") {
    CHECK_THROWS_AS(load_alignment("word,onset_s,offset_s,segment\na,zero,0.2,0\n"), DataError);
  }
  SUBCASE("round trip") {
    std::string text = "word,onset_s,offset_s,segment\na,0.5,0.91,0\nb,1,1.5,2\n";
    WordAlignment a = load_alignment(text);
    WordAlignment b = load_alignment(write_alignment(a));
    REQUIRE(b.entries.size() == a.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].word == b.entries[i].word);
      CHECK(a.entries[i].onset_s == b.entries[i].onset_s);
      CHECK(a.entries[i].offset_s == b.entries[i].offset_s);
    }
  }
}

TEST_CASE("load_layout validates coordinates and coverage") {
  std::vector<std::string> names = {"Cz", "Fz"};
  SensorLayout l = load_layout("channel,x,y\nCz,0.5,0.5\nFz,0.25,1.0\n", names);
  REQUIRE(l.size() == 2);
  CHECK(l.positions[1][0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(load_layout("channel,x,y\nCz,1.5,0.5\nFz,0.2,0.2\n", names), DataError);
  CHECK_THROWS_AS(load_layout("channel,x,y\nCz,0.5,0.5\n", names), DataError);
  SensorLayout l2 = load_layout(write_layout(l, names), names);
  CHECK(l2.positions == l.positions);
}

TEST_CASE("load_wav parses PCM16 mono") {
  // hand-built 8-sample wav at 16 kHz
  std::vector<std::int16_t> pcm = {0, 16384, -16384, 32767, -32768, 100, -100, 0};
  std::vector<std::uint8_t> bytes;
  auto push32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto push16 = [&](std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto push_tag = [&](const char* t) { bytes.insert(bytes.end(), t, t + 4); };
  push_tag("RIFF");
  push32(36 + 16);
  push_tag("WAVE");
  push_tag("fmt ");
  push32(16);
  push16(1);      // PCM
  push16(1);      // mono
  push32(16000);  // rate
  push32(32000);  // byte rate
  push16(2);      // block align
  push16(16);     // bits
  push_tag("data");
  push32(16);
  for (auto v : pcm) push16(static_cast<std::uint16_t>(v));

  AudioTrack t = load_wav(bytes, 3);
  CHECK(t.sample_rate_hz == 16000.0);
  CHECK(t.segment_index == 3);
  REQUIRE(t.samples.size() == 8);
  CHECK(t.samples.at(1) == doctest::Approx(0.5));
  CHECK(t.samples.at(3) == doctest::Approx(32767.0 / 32768.0));
}

TEST_CASE("generate_synthetic determinism and structure") {
  SyntheticConfig cfg;
  cfg.n_subjects = 3;
  cfg.duration_s = 6.0;
  auto a = generate_synthetic(cfg, 99);
  auto b = generate_synthetic(cfg, 99);
  CHECK(a.audio_features.data() == b.audio_features.data());
  REQUIRE(a.recordings.size() == 3);
  for (std::size_t s = 0; s < 3; ++s)
    CHECK(a.recordings[s].data.data() == b.recordings[s].data.data());
  CHECK(write_alignment(a.alignment) == write_alignment(b.alignment));

  // distinct per-subject mixing matrices
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      double dist = 0.0;
      for (std::int64_t k = 0; k < a.subject_mixing[i].size(); ++k) {
        double d = a.subject_mixing[i].at(k) - a.subject_mixing[j].at(k);
        dist += d * d;
      }
      CHECK(dist > 0.0);
    }

  // VEOG/AUD channels appended and flagged
  const auto& rec = a.recordings[0];
  CHECK(rec.channel_kinds[rec.channel_kinds.size() - 2] == ChannelKind::VEOG);
  CHECK(rec.channel_kinds.back() == ChannelKind::AUD);
  CHECK(rec.layout.size() == rec.channel_names.size());
}

TEST_CASE("noise-free synthetic data is exactly linearly decodable") {
  SyntheticConfig cfg;
  cfg.n_subjects = 2;
  cfg.duration_s = 9.0;
  cfg.artifact_channels = false;
  auto ds = generate_synthetic(cfg, 7);

  // EEG at 500 Hz subsampled by 5 lands exactly on the 100 Hz feature grid.
  std::vector<Tensor> xs, ys;
  std::int64_t Tf = ds.audio_features.dim(1);
  for (const auto& rec : ds.recordings) {
    Tensor x({rec.data.dim(0), Tf}, 0.0);
    for (std::int64_t c = 0; c < x.dim(0); ++c)
      for (std::int64_t t = 0; t < Tf; ++t) x.at2(c, t) = rec.data.at2(c, 5 * t);
    xs.push_back(x);
    ys.push_back(ds.audio_features);
  }
  Tensor W = fit_linear_map(xs, ys);

  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < xs.size(); ++n)
    for (std::int64_t f = 0; f < ys[n].dim(0); ++f)
      for (std::int64_t t = 0; t < Tf; ++t) {
        double pred = 0.0;
        for (std::int64_t c = 0; c < xs[n].dim(0); ++c) pred += W.at2(f, c) * xs[n].at2(c, t);
        double d = pred - ys[n].at2(f, t);
        num += d * d;
        den += ys[n].at2(f, t) * ys[n].at2(f, t);
      }
  CHECK(std::sqrt(num / den) < 1e-8);
}

TEST_CASE("linear oracle achieves perfect retrieval on noise-free windows") {
  SyntheticConfig cfg;
  cfg.n_subjects = 2;
  cfg.duration_s = 30.0;
  cfg.artifact_channels = false;
  auto ds = generate_synthetic(cfg, 11);

  std::int64_t Tw = 300;  // 3 s at 100 Hz
  std::int64_t Tf = ds.audio_features.dim(1);
  std::int64_t n_win = Tf / Tw;
  std::vector<Tensor> xs, ys;
  for (const auto& rec : ds.recordings)
    for (std::int64_t w = 0; w < n_win; ++w) {
      Tensor x({rec.data.dim(0), Tw}, 0.0);
      Tensor y({ds.audio_features.dim(0), Tw}, 0.0);
      for (std::int64_t c = 0; c < x.dim(0); ++c)
        for (std::int64_t t = 0; t < Tw; ++t) x.at2(c, t) = rec.data.at2(c, 5 * (w * Tw + t));
      for (std::int64_t f = 0; f < y.dim(0); ++f)
        for (std::int64_t t = 0; t < Tw; ++t) y.at2(f, t) = ds.audio_features.at2(f, w * Tw + t);
      xs.push_back(x);
      ys.push_back(y);
    }

  std::size_t n_train = xs.size() * 8 / 10;
  std::vector<Tensor> xtr(xs.begin(), xs.begin() + n_train);
  std::vector<Tensor> ytr(ys.begin(), ys.begin() + n_train);
  Tensor W = fit_linear_map(xtr, ytr);

  auto norm_dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return ab / std::sqrt((aa + 1e-12) * (bb + 1e-12));
  };

  int hits = 0, total = 0;
  for (std::size_t i = n_train; i < xs.size(); ++i) {
    std::vector<double> z(static_cast<std::size_t>(ys[i].size()), 0.0);
    std::int64_t F = ys[i].dim(0);
    for (std::int64_t f = 0; f < F; ++f)
      for (std::int64_t t = 0; t < Tw; ++t) {
        double pred = 0.0;
        for (std::int64_t c = 0; c < xs[i].dim(0); ++c) pred += W.at2(f, c) * xs[i].at2(c, t);
        z[static_cast<std::size_t>(f * Tw + t)] = pred;
      }
    std::size_t best = n_train;
    double best_score = -2.0;
    for (std::size_t j = n_train; j < ys.size(); ++j) {
      double s = norm_dot(z, ys[j].data());
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    hits += (best == i);
    ++total;
  }
  CHECK(hits == total);
}

TEST_CASE("generate_synthetic parameter validation") {
  SyntheticConfig cfg;
  cfg.eeg_channels = 3;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ConfigError);
  cfg.eeg_channels = 8;
  cfg.audio_features = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ConfigError);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ddfm/config.hpp"
#include "ddfm/error.hpp"
#include "ddfm/manifest.hpp"
#include "test_support.hpp"

using namespace ddfm;

TEST_SUITE("manifest_config") {

TEST_CASE("manifest text round trip") {
  RunManifest m;
  m.set("mode", std::string("ddfm"));
  m.set("psi", 0.5);
  m.set("steps", 100LL);
  m.set("psi", 0.25);  // overwrite keeps position
  m.trace.push_back({3, 1.5, 2.0, 1.0, 4.0, 3.0, 0.1, 0.2});
  m.trace.push_back({2, 0.1 + 0.2, 1e-300, 0.0, 5.5, 5.25, 1e-6, 1.0 / 3.0});
  m.wall_clock_seconds = 12.5;

  const std::string text = m.to_text();
  CHECK(text.find("wall_clock") == std::string::npos);
  CHECK(m.timing_text() == "wall_clock_seconds = 12.5\n");

  const RunManifest back = RunManifest::parse(text);
  REQUIRE(back.entries.size() == 3u);
  CHECK(back.entries[1].first == "psi");
  CHECK(*back.get("psi") == "0.25");
  CHECK(*back.get("steps") == "100");
  REQUIRE(back.trace.size() == 2u);
  CHECK(back.trace[1].q == 0.1 + 0.2);
  CHECK(back.trace[1].rho == 1.0 / 3.0);
  CHECK(back.trace[1].x_loss_before == 1e-300);
  CHECK(back.to_text() == text);
  CHECK(back.get("missing") == nullptr);
  CHECK_THROWS_AS(RunManifest::parse("no separator here\n"), ConfigError);
}

TEST_CASE("hashes") {
  // SHA-256 of the empty string.
  CHECK(bytes_sha256("", 0) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(bytes_sha256("abc", 3) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const ImageTensor a(2, 3, 1, 0.5), b(3, 2, 1, 0.5);
  CHECK(tensor_sha256(a) != tensor_sha256(b));
  CHECK(tensor_sha256(a) == tensor_sha256(ImageTensor(2, 3, 1, 0.5)));
}

TEST_CASE("atomic text writes") {
  const auto path = std::filesystem::temp_directory_path() / "ddfm_atomic_test.txt";
  write_text_atomic(path.string(), "one\n");
  write_text_atomic(path.string(), "two\n");
  std::ifstream in(path);
  std::string s;
  std::getline(in, s);
  CHECK(s == "two");
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_text_atomic("/nonexistent_dir/x.txt", "x"), IoError);
}

TEST_CASE("config text parsing") {
  const auto s = config::parse_config_text("# comment\n\nsteps = 50\n  psi=0.3  # trailing\nmode = no_tv\n");
  CHECK(s.at("steps") == "50");
  CHECK(s.at("psi") == "0.3");
  CHECK(s.at("mode") == "no_tv");
  CHECK_THROWS_AS(config::parse_config_text("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("steps\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("steps =\n"), ConfigError);
  try {
    config::parse_config_text("steps = 1\nwhat = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(config::load_config_file("/nonexistent/ddfm.conf"), IoError);
}

TEST_CASE("config precedence and conversion") {
  const config::Settings file{{"steps", "50"}, {"psi", "0.3"}};
  const config::Settings flags{{"psi", "0.7"}};
  const auto merged = config::merge(file, flags);
  const FusionConfig c = config::fusion_config_from(merged);
  CHECK(c.schedule.steps == 50);
  CHECK(c.em.psi == 0.7);
  CHECK(c.em.eta == 0.1);  // built-in default

  const FusionConfig d = config::fusion_config_from({});
  CHECK(d.schedule.steps == 1000);
  CHECK(d.em.psi == 0.5);
  CHECK(d.mode == FusionMode::kDdfm);
}

TEST_CASE("config value errors") {
  using S = config::Settings;
  CHECK_THROWS_AS(config::fusion_config_from(S{{"steps", "ten"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"steps", "0"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"psi", "-1"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"eta", "0"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"em_iters", "0"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"beta_start", "0.5"}, {"beta_end", "0.1"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"mode", "fixed_phi"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"sampler_variance", "large"}}), ConfigError);
  CHECK_THROWS_AS(config::fusion_config_from(S{{"expectation_form", "x"}}), ConfigError);
  CHECK_NOTHROW(config::fusion_config_from(S{{"mode", "fixed_phi"}, {"phi", "0.2"}}));
}

TEST_CASE("score selection") {
  using S = config::Settings;
  const auto a = config::score_selection_from({}, std::nullopt);
  CHECK(a.kind == config::ScoreSelection::Kind::kAnalytic);
  CHECK(a.var0 == 0.1);
  const auto r = config::score_selection_from(S{{"score", "remote:10.0.0.2:9000"}}, std::nullopt);
  CHECK(r.kind == config::ScoreSelection::Kind::kRemote);
  CHECK(r.endpoint.port == 9000);
  const auto e = config::score_selection_from(S{{"score", "remote"}}, std::string("localhost:7000"));
  CHECK(e.endpoint.host == "localhost");
  CHECK_THROWS_AS(config::score_selection_from(S{{"score", "remote"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(config::score_selection_from(S{{"score", "magic"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(config::score_selection_from(S{{"var0", "-1"}}, std::nullopt), ConfigError);
  CHECK(config::score_selection_from(S{{"var0", "0.5"}, {"mu0", "m.png"}}, std::nullopt).mu0 == "m.png");
}

}  // TEST_SUITE

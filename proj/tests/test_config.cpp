#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fmqkd/harness/config.hpp"

using namespace fmqkd;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.link.fiber.length_km, 125.0);
  EXPECT_EQ(c.link.source.mu_signal, 0.1);
  EXPECT_EQ(c.link.source.mu_unmodulated, 0.4);
  EXPECT_EQ(c.link.detector.dark_prob, 8e-7);
  EXPECT_EQ(c.link.fiber.atten_db_per_km, 0.208);
  EXPECT_EQ(c.scenario, Scenario::Lab);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.sample_fraction, 0.1);
  EXPECT_EQ(c.qber_limit, 0.1);
  EXPECT_EQ(c.policy.scan_points, 16u);
}

TEST(Config, SectionsAndComments) {
  const ExperimentConfig c = parse_config(
      "# lab link\n"
      "[fiber]\n"
      "length_km = 150   ; longer\n"
      "[detector]\n"
      "dark_prob = 1e-6\n"
      "[run]\n"
      "scenario = field\n"
      "seed = 42\n"
      "sweep_lengths_km = 10, 20,30\n"
      "transcript = clicks\n"
      "[policy]\n"
      "enabled = false\n");
  EXPECT_EQ(c.link.fiber.length_km, 150.0);
  EXPECT_EQ(c.link.detector.dark_prob, 1e-6);
  EXPECT_EQ(c.scenario, Scenario::Field);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.sweep_lengths_km, (std::vector<double>{10, 20, 30}));
  EXPECT_EQ(c.transcript, TranscriptMode::ClicksOnly);
  EXPECT_FALSE(c.policy.enabled);
}

TEST(Config, DottedKeysOutsideSection) {
  EXPECT_EQ(parse_config("fiber.length_km = 80\n").link.fiber.length_km, 80.0);
}

TEST(Config, FieldScenarioAddsOnePercent) {
  ExperimentConfig c = parse_config("[run]\nscenario = field\n");
  EXPECT_NEAR(c.effective_link().e_opt, c.link.e_opt + 0.01, 1e-15);
  c.scenario = Scenario::Lab;
  EXPECT_EQ(c.effective_link().e_opt, c.link.e_opt);
}

TEST(Config, NegativeLengthNamesInvariant) {
  const std::string e = error_of("[fiber]\nlength_km = -5\n");
  EXPECT_TRUE(contains(e, "fiber.length_km must be >= 0")) << e;
}

TEST(Config, RangeViolationsNamed) {
  EXPECT_TRUE(contains(error_of("[link]\ne_opt = 0.7\n"), "link.e_opt"));
  EXPECT_TRUE(contains(error_of("[detector]\nefficiency = 0\n"), "detector.efficiency"));
  EXPECT_TRUE(contains(error_of("[policy]\nscan_points = 4\n"), "policy.scan_points"));
  EXPECT_TRUE(contains(error_of("[policy]\nperiod_s = 100\n"), "policy rejected"));
  EXPECT_TRUE(contains(error_of("[run]\nsample_fraction = 1\n"), "run.sample_fraction"));
}

TEST(Config, ParseErrorsCarryLineNumbers) {
  EXPECT_TRUE(contains(error_of("[fiber]\n\nlength_km = abc\n"), "line 3"));
  EXPECT_TRUE(contains(error_of("[fiber]\nlength = 5\n"), "line 2: unknown key 'fiber.length'"));
  EXPECT_TRUE(contains(error_of("[laser]\n"), "line 1: unknown section"));
  EXPECT_TRUE(contains(error_of("[fiber\n"), "line 1: unterminated"));
  EXPECT_TRUE(contains(error_of("[run]\nseed\n"), "line 2: expected 'key = value'"));
  EXPECT_TRUE(contains(error_of("length_km = 3\n"), "outside any section"));
  EXPECT_TRUE(contains(error_of("[run]\nseed = 1\nseed = 2\n"), "line 3: duplicate key"));
  EXPECT_TRUE(contains(error_of("[run]\nseed = -1\n"), "non-negative integer"));
  EXPECT_TRUE(contains(error_of("[run]\nscenario = sea\n"), "lab or field"));
  EXPECT_TRUE(contains(error_of("[policy]\nenabled = maybe\n"), "boolean"));
}

TEST(Config, DumpLoadIsNormalForm) {
  const std::string text =
      "[run]\nseed=7\nsweep_lengths_km=100,150\n[fiber]\nlength_km = 1.25e2\n[detector]\nefficiency=0.25\n";
  const std::string once = dump_config(parse_config(text));
  const std::string twice = dump_config(parse_config(once));
  EXPECT_EQ(once, twice);
  EXPECT_TRUE(contains(once, "length_km = 125\n"));
  EXPECT_TRUE(contains(once, "seed = 7\n"));
  EXPECT_TRUE(contains(once, "sweep_lengths_km = 100, 150\n"));
  EXPECT_EQ(dump_config(parse_config("")), dump_config(ExperimentConfig{}));
}

TEST(Config, DumpHasEverySection) {
  const std::string d = dump_config(ExperimentConfig{});
  for (const char* s : {"[source]", "[fiber]", "[detector]", "[link]", "[policy]", "[run]"})
    EXPECT_TRUE(contains(d, s)) << s;
}

TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "fmqkd_config_test.ini";
  {
    std::ofstream f(path);
    f << "[fiber]\nlength_km = 60\n";
  }
  EXPECT_EQ(load_config(path).link.fiber.length_km, 60.0);
  std::remove(path.c_str());
  EXPECT_THROW(load_config(path), ConfigError);
}

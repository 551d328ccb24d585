// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "support.hpp"

namespace esser {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;

  nlohmann::json summary() const {
    std::istringstream in(out);
    std::string line, last;
    while (std::getline(in, line)) {
      if (!line.empty()) last = line;
    }
    return nlohmann::json::parse(last);
  }
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "esser");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"gradcheck", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"gradcheck", "--loss", "l2"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"toyrun", "--snr", "loud"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
}

TEST(Cli, GradcheckPasses) {
  for (const char* loss : {"esser", "sisdr", "sdr"}) {
    const Outcome o = run_cli({"gradcheck", "--loss", loss, "--lambda", "0.3", "--trials", "100", "--seed", "7"});
    ASSERT_EQ(o.code, cli::kExitOk) << o.out << o.err;
    const auto s = o.summary();
    EXPECT_EQ(s["status"], "ok");
    EXPECT_LT(s["max_rel_error"].get<double>(), 1e-6);
  }
}

TEST(Cli, MixThenEvalIsReproducible) {
  testing::TempDir dir("cli-mix");
  std::mt19937_64 gen(31);
  std::ofstream manifest(dir / "sources.jsonl");
  for (const char* id : {"t0", "t1"}) {
    nlohmann::json line{{"trial_id", id}, {"clean", nlohmann::json::array()}, {"noise", nlohmann::json::array()}};
    for (int k = 0; k < 2; ++k) {
      const std::string c = std::string(id) + "_c" + std::to_string(k) + ".wav";
      const std::string n = std::string(id) + "_n" + std::to_string(k) + ".wav";
      write_wav(dir / c, 0.1 * testing::gaussian(gen, 500));
      write_wav(dir / n, 0.1 * testing::gaussian(gen, 500));
      line["clean"].push_back(c);
      line["noise"].push_back(n);
    }
    manifest << line.dump() << '\n';
  }
  manifest.close();

  for (const char* name : {"ds1", "ds2"}) {
    const Outcome o = run_cli({"mix", "--manifest", (dir / "sources.jsonl").string(), "--snr", "5", "--out",
                               (dir / name).string()});
    ASSERT_EQ(o.code, cli::kExitOk) << o.err;
    EXPECT_EQ(o.summary()["trials_written"], 2);
  }
  EXPECT_EQ(slurp(dir / "ds1" / kManifestName), slurp(dir / "ds2" / kManifestName));

  // Estimates: the clean references themselves, plus the summed noise.
  for (const Trial& t : load_dataset(dir / "ds1")) {
    fs::create_directories(dir / "est" / t.trial_id);
    for (std::size_t k = 0; k < 2; ++k) {
      write_wav(dir / "est" / t.trial_id / ("estimate_" + std::to_string(k) + ".wav"), t.clean_refs[1 - k]);
    }
    write_wav(dir / "est" / t.trial_id / "noise_estimate.wav", t.summed_noise());
  }
  for (const char* report : {"r1.jsonl", "r2.jsonl", "r.csv"}) {
    const Outcome o = run_cli({"eval", "--dataset", (dir / "ds1").string(), "--estimates", (dir / "est").string(),
                               "--out", (dir / report).string()});
    ASSERT_EQ(o.code, cli::kExitOk) << o.err;
    EXPECT_NEAR(o.summary()["si_sdr_db_mean"].get<double>(), 120.0, 1e-6);
  }
  EXPECT_EQ(slurp(dir / "r1.jsonl"), slurp(dir / "r2.jsonl"));
  const auto rows = read_report_csv(dir / "r.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_TRUE(rows[0].noise_si_sdri_db.has_value());

  EXPECT_EQ(run_cli({"eval", "--dataset", (dir / "ds1").string(), "--estimates", (dir / "est").string(), "--out",
                     (dir / "r.txt").string()})
                .code,
            cli::kExitUsage);
}

TEST(Cli, MixReportsTrialErrors) {
  testing::TempDir dir("cli-mix-bad");
  std::ofstream(dir / "sources.jsonl") << R"({"trial_id":"a","clean":["missing.wav"],"noise":["gone.wav"]})" << '\n';
  const Outcome o =
      run_cli({"mix", "--manifest", (dir / "sources.jsonl").string(), "--snr", "0", "--out", (dir / "ds").string()});
  EXPECT_EQ(o.code, cli::kExitDomain);
  EXPECT_NE(o.err.find("\"trial_id\":\"a\""), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "ds"));
}

TEST(Cli, ToyrunWritesRecords) {
  testing::TempDir dir("cli-toy");
  const std::vector<std::string> args{"toyrun", "--scenario", "inseparable", "--snr", "0", "--loss", "esser",
                                      "--lambda", "0.3", "--steps", "20", "--length", "2048", "--seed", "3",
                                      "--out"};
  auto first = args;
  first.push_back((dir / "a.jsonl").string());
  auto second = args;
  second.push_back((dir / "b.jsonl").string());
  const Outcome a = run_cli(first);
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  ASSERT_EQ(run_cli(second).code, cli::kExitOk);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const auto records = read_json_lines(dir / "a.jsonl");
  ASSERT_EQ(records.size(), 1u + 21u + 1u);
  EXPECT_EQ(records.front()["record"], "config");
  EXPECT_EQ(records.back()["record"], "result");
  EXPECT_TRUE(a.summary().contains("noise_si_sdri_db"));
  EXPECT_EQ(run_cli({"toyrun", "--length", "1000"}).code, cli::kExitUsage);
}

TEST(Cli, TuneOnSyntheticScenario) {
  const Outcome o = run_cli({"tune", "--steps", "5", "--length", "2048", "--max-lambda", "0.2", "--seed", "4"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const auto s = o.summary();
  EXPECT_EQ(s["validation"], "synthetic");
  EXPECT_GE(s["lambda_values"].size(), 1u);
  EXPECT_LE(s["lambda_values"].size(), 3u);
}

TEST(Cli, Orthostat) {
  testing::TempDir dir("cli-ortho");
  std::mt19937_64 gen(37);
  for (int i = 0; i < 3; ++i) write_wav(dir / ("s" + std::to_string(i) + ".wav"), 0.1 * testing::gaussian(gen, 4000 + i));
  const Outcome o = run_cli({"orthostat", "--corpus", dir.path().string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const auto s = o.summary();
  EXPECT_EQ(s["pairs"], 3);
  EXPECT_LT(s["mean"].get<double>(), s["bound_3_over_sqrt_t"].get<double>());
  EXPECT_EQ(run_cli({"orthostat", "--corpus", (dir / "nope").string()}).code, cli::kExitDomain);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  testing::TempDir dir("cli-config");
  std::ofstream(dir / "cfg.toml") << "[gradcheck]\nloss = \"sisdr\"\ntrials = 3\n";
  Outcome o = run_cli({"--config", (dir / "cfg.toml").string(), "gradcheck"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(o.summary()["loss"], "sisdr");
  EXPECT_EQ(o.summary()["trials"], 3);
  o = run_cli({"--config", (dir / "cfg.toml").string(), "gradcheck", "--trials", "4"});
  EXPECT_EQ(o.summary()["trials"], 4);
}

}  // namespace
}  // namespace esser

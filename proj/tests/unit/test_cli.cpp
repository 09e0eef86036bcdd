#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "negmt/cli.hpp"
#include "negmt/report.hpp"
#include "oracles.hpp"

using namespace negmt;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(NEGMT_TEST_DATA) + "/" + name; }

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t file_count(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"--version"}).code, kExitOk);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"scan", "--src", "x"}).code, kExitUsage);
  EXPECT_EQ(run({"--jobs", "0", "scan", "--src", "a", "--tgt", "b"}).code, kExitUsage);
}

TEST(Cli, ScanWritesQuadrantTable) {
  oracle::TempDir dir;
  const auto r = run({"--out-dir", dir.path().string(), "scan", "--src", data("scan8.en"), "--tgt",
                      data("scan8.zh")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = oracle::slurp(dir.file("scan.quadrants.csv"));
  EXPECT_EQ(csv,
            "quadrant,count,ratio\nboth,2,0.250000\nsrc_only,2,0.250000\n"
            "tgt_only,2,0.250000\nneither,2,0.250000\n");
  const auto json = oracle::slurp(dir.file("scan.json"));
  EXPECT_NE(json.find("\"mismatch_rate\": 0.5"), std::string::npos);
  EXPECT_NE(json.find(sha256_file(data("scan8.en"))), std::string::npos);
  EXPECT_NE(r.out.find("scan.quadrants.csv"), std::string::npos);
}

TEST(Cli, RerunsAreByteIdentical) {
  oracle::TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    ASSERT_EQ(run({"--out-dir", dir->path().string(), "--name", "same", "--chart", "scan", "--src",
                   data("scan8.en"), "--tgt", data("scan8.zh"), "--filter", "drop_mismatch"})
                  .code,
              kExitOk);
  }
  for (const auto* f : {"same.quadrants.csv", "same.quadrants.svg", "same.filtered.src",
                        "same.filtered.tgt"}) {
    EXPECT_EQ(oracle::slurp(a.file(f)), oracle::slurp(b.file(f))) << f;
  }
  // The JSON embeds the argument list, which names the output directory.
  auto strip = [](std::string s, const std::string& dir) {
    for (auto p = s.find(dir); p != std::string::npos; p = s.find(dir)) s.erase(p, dir.size());
    return s;
  };
  EXPECT_EQ(strip(oracle::slurp(a.file("same.json")), a.path().string()),
            strip(oracle::slurp(b.file("same.json")), b.path().string()));
  EXPECT_EQ(oracle::slurp(a.file("same.filtered.src")),
            "I do not like it .\nThere is no time .\nThe cat sleeps .\nWe went home .\n");
}

TEST(Cli, EnvironmentSetsDefaultOutputDirectory) {
  oracle::TempDir env_dir, flag_dir;
  ::setenv(kOutDirEnv, env_dir.path().c_str(), 1);
  const auto r1 = run({"scan", "--src", data("scan8.en"), "--tgt", data("scan8.zh")});
  const auto r2 = run({"--out-dir", flag_dir.path().string(), "scan", "--src", data("scan8.en"),
                       "--tgt", data("scan8.zh")});
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(r1.code, kExitOk);
  EXPECT_EQ(r2.code, kExitOk);
  EXPECT_TRUE(fs::exists(env_dir.file("scan.json")));
  EXPECT_TRUE(fs::exists(flag_dir.file("scan.json")));
  EXPECT_EQ(file_count(env_dir.path()), 2u);
}

TEST(Cli, FlagsOverrideConfigFile) {
  oracle::TempDir dir;
  oracle::spit(dir.file("cfg.toml"), "name = \"fromconfig\"\nformat = [\"csv\"]\n");
  const auto base = dir.path().string();
  ASSERT_EQ(run({"--config", dir.file("cfg.toml"), "--out-dir", base, "scan", "--src",
                 data("scan8.en"), "--tgt", data("scan8.zh")})
                .code,
            kExitOk);
  EXPECT_TRUE(fs::exists(dir.file("fromconfig.quadrants.csv")));
  EXPECT_FALSE(fs::exists(dir.file("fromconfig.json")));
  ASSERT_EQ(run({"--config", dir.file("cfg.toml"), "--name", "fromflag", "--out-dir", base, "scan",
                 "--src", data("scan8.en"), "--tgt", data("scan8.zh")})
                .code,
            kExitOk);
  EXPECT_TRUE(fs::exists(dir.file("fromflag.quadrants.csv")));
  EXPECT_EQ(run({"--config", dir.file("missing.toml"), "scan", "--src", "a", "--tgt", "b"}).code,
            kExitUsage);
}

TEST(Cli, ExitCodes) {
  oracle::TempDir dir;
  const auto out = dir.path().string();
  EXPECT_EQ(run({"--out-dir", out, "scan", "--src", dir.file("nope.en"), "--tgt", data("scan8.zh")})
                .code,
            kExitIo);
  oracle::spit(dir.file("garbage.negtrace"), "not a trace");
  const auto bad = run({"--out-dir", out, "trace", "validate", dir.file("garbage.negtrace")});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("error:"), std::string::npos);
  oracle::spit(dir.file("bad_lex.json"), R"({"entries": ["NOT"]})");
  EXPECT_EQ(run({"--out-dir", out, "scan", "--src", data("scan8.en"), "--tgt", data("scan8.zh"),
                 "--src-lexicon", dir.file("bad_lex.json")})
                .code,
            kExitValidation);
  EXPECT_EQ(file_count(dir.path()), 2u);
}

TEST(Cli, SynthThenValidateAndFlow) {
  oracle::TempDir dir;
  const auto out = dir.path().string();
  auto r = run({"--out-dir", out, "--seed", "5", "trace", "synth", "--dims", "2,3,2,5,4,6",
                "--count", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto trace = dir.file("trace_synth.negtrace");
  ASSERT_TRUE(fs::exists(trace));
  const auto first = oracle::slurp(trace);

  r = run({"--out-dir", out, "trace", "validate", trace});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto table = oracle::slurp(dir.file("trace_validate.traces.csv"));
  EXPECT_NE(table.find("synth2,2,3,2,5,4,6"), std::string::npos);

  oracle::spit(dir.file("cues.csv"),
               "pair_id,src_pos,category\nsynth0,1,correct\nsynth1,3,under\nsynth2,0,correct\n");
  r = run({"--out-dir", out, "--jobs", "3", "flow", "--trace", trace, "--cues",
           dir.file("cues.csv"), "--measure", "both"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto flow = table_from_csv("flow", oracle::slurp(dir.file("flow.flow.csv")));
  EXPECT_EQ(flow.columns, (std::vector<std::string>{"layer", "group", "n", "mean", "abs_rho"}));
  EXPECT_FALSE(flow.rows.empty());
  EXPECT_TRUE(fs::exists(dir.file("flow.raw_attention.csv")));

  // Out-of-range layer: usage error and nothing new on disk.
  const auto before = file_count(dir.path());
  r = run({"--out-dir", out, "--name", "badlayer", "flow", "--trace", trace, "--cues",
           dir.file("cues.csv"), "--layers", "4"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(file_count(dir.path()), before);

  // Same seed, same bytes.
  oracle::TempDir again;
  ASSERT_EQ(run({"--out-dir", again.path().string(), "--seed", "5", "trace", "synth", "--dims",
                 "2,3,2,5,4,6", "--count", "3"})
                .code,
            kExitOk);
  EXPECT_EQ(oracle::slurp(again.file("trace_synth.negtrace")), first);
}

TEST(Cli, ReportManualAndChart) {
  oracle::TempDir dir;
  const auto out = dir.path().string();
  std::string labels = "pair_id,category\n";
  for (int i = 0; i < 7; ++i) labels += "c" + std::to_string(i) + ",Correct\n";
  labels += "r0,Rephrased\nx0,Dropped\nx1,Incorrect\n";
  oracle::spit(dir.file("labels.csv"), labels);
  auto r = run({"--out-dir", out, "--chart", "report", "manual", "--labels", dir.file("labels.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(oracle::slurp(dir.file("report_manual.json")).find("\"accuracy_percent\": 80.0"),
            std::string::npos);
  EXPECT_TRUE(fs::exists(dir.file("report_manual.manual.svg")));

  r = run({"--out-dir", out, "report", "chart", "--table", dir.file("report_manual.manual.csv"),
           "--kind", "lines", "--series", "percent"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir.file("report_chart.svg")));

  oracle::spit(dir.file("empty.csv"), "layer,value\n");
  const auto before = file_count(dir.path());
  r = run({"--out-dir", out, "--name", "empty", "report", "chart", "--table", dir.file("empty.csv")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("empty"), std::string::npos);
  EXPECT_EQ(file_count(dir.path()), before);
}

TEST(Cli, IngestCountsComponents) {
  oracle::TempDir dir;
  const auto r = run({"--out-dir", dir.path().string(), "--format", "csv", "ingest", "--train",
                      data("mini_negpar.tsv"), "--dev", data("mini_negpar.tsv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(oracle::slurp(dir.file("ingest.components.csv")),
            "component,train,dev,total\nsentences,4,4,8\ninstances,4,4,8\ncue,4,4,8\n"
            "event,2,2,4\nscope,4,4,8\n");
  EXPECT_FALSE(fs::exists(dir.file("ingest.json")));
}

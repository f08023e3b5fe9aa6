#include <gtest/gtest.h>

#include <sstream>

#include "../tools/cli.hpp"
#include "eicl/eval.hpp"
#include "temp_dir.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "eicl");
  std::ostringstream out, err;
  const int code = eicl::cli::execute(args, out, err);
  return {code, out.str(), err.str()};
}

// Synthetic world plus benchmark, generated once per test binary.
const TempDir& world() {
  static const TempDir dir;
  static const bool made = [] {
    const auto r = cli({"synth", "--run-dir", (dir / "w").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return true;
  }();
  (void)made;
  return dir;
}

std::filesystem::path bench_dir() { return world() / "w/benchmark"; }

}  // namespace

TEST(Cli, HelpAndNoCommand) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  const auto r = cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = cli({"run", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, CandidateCountOnlyForEicl) {
  const auto r = cli({"run", "--mode", "icl", "--k3", "4"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("k3 only valid for eicl"), std::string::npos);
}

TEST(Cli, AblationFlagNeedsEicl) {
  const auto r = cli({"run", "--mode", "zshot", "--no-te", "--test", "t.jsonl"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, MissingInputIsDomainError) {
  TempDir dir;
  const auto r = cli({"ingest", "--input", (dir / "nope.jsonl").string(), "--split", "train"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, SynthThenAnalyzeGivesDecreasingCurve) {
  const auto dir = world() / "w";
  for (const char* f : {"pairs.jsonl", "bank.evec", "queries.evec", "decisions.jsonl", "benchmark/run.toml"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto r = cli({"probe-analyze", "--input-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("spearman=");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(pos + 9)), -0.9);
  for (const char* f : {"representations.evec", "heatmap.csv", "rank_probability.csv", "rank_probability.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "analysis" / f)) << f;
  }
}

TEST(Cli, ConfigFileRunRecordReplayAndReport) {
  TempDir dir;
  const auto toml = (bench_dir() / "run.toml").string();
  const auto rec = cli({"run", "--config", toml, "--run-dir", (dir / "a").string(), "--record-transcript",
                        (dir / "t.jsonl").string()});
  ASSERT_EQ(rec.code, 0) << rec.err;
  EXPECT_NE(rec.out.find("accuracy="), std::string::npos);

  const auto replay = cli({"run", "--mode", "eicl", "--train", (bench_dir() / "train.jsonl").string(), "--test",
                           (bench_dir() / "test.jsonl").string(), "--provider", "replay", "--transcript",
                           (dir / "t.jsonl").string(), "--run-dir", (dir / "b").string()});
  ASSERT_EQ(replay.code, 0) << replay.err;
  const auto a = eicl::read_report(dir / "a/report.jsonl");
  const auto b = eicl::read_report(dir / "b/report.jsonl");
  EXPECT_EQ(a.metrics.accuracy, b.metrics.accuracy);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].predicted, b.records[i].predicted);

  const auto rep = cli({"report", "--report", (dir / "a/report.jsonl").string(), "--per-label", (dir / "pl.csv").string()});
  EXPECT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "pl.csv"));
}

TEST(Cli, RepeatedRunsWriteIdenticalReports) {
  TempDir dir;
  const auto toml = (bench_dir() / "run.toml").string();
  ASSERT_EQ(cli({"run", "--config", toml, "--mode", "icl", "--run-dir", (dir / "1").string()}).code, 0);
  ASSERT_EQ(cli({"run", "--config", toml, "--mode", "icl", "--run-dir", (dir / "2").string()}).code, 0);
  auto strip = [](const std::filesystem::path& p) { return eicl::report_to_string(eicl::read_report(p), false); };
  EXPECT_EQ(strip(dir / "1/report.jsonl"), strip(dir / "2/report.jsonl"));
  EXPECT_EQ(read_text(dir / "1/per_label.csv"), read_text(dir / "2/per_label.csv"));
}

TEST(Cli, TamperedReportFailsVerification) {
  TempDir dir;
  ASSERT_EQ(cli({"run", "--config", (bench_dir() / "run.toml").string(), "--mode", "zshot", "--run-dir",
                 (dir / "r").string()})
                .code,
            0);
  auto r = eicl::read_report(dir / "r/report.jsonl");
  r.metrics.accuracy += 0.25;
  eicl::write_report(dir / "bad.jsonl", r);
  EXPECT_EQ(cli({"report", "--report", (dir / "bad.jsonl").string()}).code, 1);
}

TEST(Cli, AblateWritesSummary) {
  TempDir dir;
  const auto r = cli({"ablate", "--config", (bench_dir() / "run.toml").string(), "--grid", "no_dsl=0,1", "--run-dir",
                      (dir / "g").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_text(dir / "g/summary.csv");
  EXPECT_TRUE(csv.starts_with("no_dsl,accuracy,macro_f1,total,unparsed\n"));
  EXPECT_TRUE(std::filesystem::exists(dir / "g/points/point-000.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "g/points/point-001.jsonl"));
}

TEST(Cli, IngestAndRetrieve) {
  TempDir dir;
  const auto train = (bench_dir() / "train.jsonl").string();
  const auto ing = cli({"ingest", "--input", train, "--split", "train"});
  ASSERT_EQ(ing.code, 0) << ing.err;
  EXPECT_NE(ing.out.find("ingested 400 records"), std::string::npos);
  const auto ret = cli({"retrieve", "--train", train, "--test", (bench_dir() / "test.jsonl").string(), "--k1", "2",
                        "--output", (dir / "n.jsonl").string()});
  ASSERT_EQ(ret.code, 0) << ret.err;
  std::istringstream lines(read_text(dir / "n.jsonl"));
  std::string first;
  std::getline(lines, first);
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j.at("neighbors").size(), 2U);
  EXPECT_EQ(j.at("neighbors").at(0).at("rank"), 1);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;
using macroreal::testing::TempDir;

namespace {

std::string quoted(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with stdout and stderr captured in `log`; returns the exit status.
int run(const std::string& args, const fs::path& log) {
  const std::string command = quoted(MACROREAL_CLI_PATH) + " " + args + " >" + quoted(log.string()) + " 2>&1";
  const int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string data(const std::string& name) { return quoted((macroreal::testing::data_dir() / name).string()); }

const char* kTinySimulation = R"({
  "source": {"duration_s": 0.02, "pair_rate": 20000, "interference_iterations": 2,
             "non_interference_iterations": 2}
})";

}  // namespace

TEST(Cli, HelpSucceeds) {
  TempDir dir;
  EXPECT_EQ(run("--help", dir / "log"), 0);
  EXPECT_NE(macroreal::testing::read_file(dir / "log").find("predict"), std::string::npos);
}

TEST(Cli, UnknownVerbIsInputError) {
  TempDir dir;
  EXPECT_EQ(run("frobnicate", dir / "log"), 2);
}

TEST(Cli, PredictIsReproducible) {
  TempDir dir;
  ASSERT_EQ(run("--out " + quoted((dir / "a").string()) + " predict", dir / "log"), 0);
  ASSERT_EQ(run("--out " + quoted((dir / "b").string()) + " predict", dir / "log"), 0);
  const auto a = macroreal::testing::read_file(dir / "a" / "prediction.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, macroreal::testing::read_file(dir / "b" / "prediction.json"));
  EXPECT_EQ(macroreal::testing::read_file(dir / "a" / "manifest.json"),
            macroreal::testing::read_file(dir / "b" / "manifest.json"));
}

TEST(Cli, NonEmptyOutputNeedsForce) {
  TempDir dir;
  const std::string out = quoted((dir / "o").string());
  ASSERT_EQ(run("--out " + out + " predict", dir / "log"), 0);
  EXPECT_EQ(run("--out " + out + " predict", dir / "log"), 2);
  EXPECT_EQ(run("--out " + out + " --force predict", dir / "log"), 0);
}

TEST(Cli, MalformedConfigIsInputError) {
  TempDir dir;
  macroreal::testing::write_file(dir / "bad.json", R"({"setup": {"t_ratios": [0.8, 0.8]}})");
  EXPECT_EQ(run("--config " + quoted((dir / "bad.json").string()) + " --out " + quoted((dir / "o").string()) +
                    " predict",
                dir / "log"),
            2);
  EXPECT_NE(macroreal::testing::read_file(dir / "log").find("setup.t_ratios"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "o" / "prediction.json"));

  macroreal::testing::write_file(dir / "broken.json", "{");
  EXPECT_EQ(run("--config " + quoted((dir / "broken.json").string()) + " --out " + quoted((dir / "o2").string()) +
                    " predict",
                dir / "log"),
            2);
}

TEST(Cli, InvalidEfficiencyIsInputError) {
  TempDir dir;
  EXPECT_EQ(run("--out " + quoted((dir / "o").string()) + " hv-bound --eta 0", dir / "log"), 2);
}

TEST(Cli, InvalidThreadsIsInputError) {
  TempDir dir;
  EXPECT_EQ(run("--threads 0 --out " + quoted((dir / "o").string()) + " predict", dir / "log"), 2);
}

TEST(Cli, CountsMissingColumnIsInputError) {
  TempDir dir;
  macroreal::testing::write_file(dir / "c.csv", "set_label,C1,C2\n++,1,2\n");
  EXPECT_EQ(run("--out " + quoted((dir / "o").string()) + " gamma-fit " + quoted((dir / "c.csv").string()),
                dir / "log"),
            2);
  EXPECT_NE(macroreal::testing::read_file(dir / "log").find("C12"), std::string::npos);
}

TEST(Cli, AnalyzeEmptyDirectoryIsInputError) {
  TempDir dir;
  fs::create_directories(dir / "empty");
  EXPECT_EQ(run("--out " + quoted((dir / "o").string()) + " analyze " + quoted((dir / "empty").string()),
                dir / "log"),
            2);
}

TEST(Cli, ReportMissingInputIsInputError) {
  TempDir dir;
  EXPECT_EQ(run("--out " + quoted((dir / "o").string()) + " report " + quoted((dir / "none.json").string()) + " " +
                    data("measured_analysis.json"),
                dir / "log"),
            2);
}

TEST(Cli, AnalyzeRepresentativeFixture) {
  TempDir dir;
  ASSERT_EQ(run("--out " + quoted((dir / "o").string()) + " analyze " + data("representative"), dir / "log"), 0)
      << macroreal::testing::read_file(dir / "log");
  EXPECT_NE(macroreal::testing::read_file(dir / "o" / "analysis.json").find("\"lgi\""), std::string::npos);
}

TEST(Cli, SimulateIsByteIdenticalForFixedSeed) {
  TempDir dir;
  macroreal::testing::write_file(dir / "tiny.json", kTinySimulation);
  const std::string cfg = "--config " + quoted((dir / "tiny.json").string()) + " --seed 42";
  ASSERT_EQ(run(cfg + " --threads 1 --out " + quoted((dir / "a").string()) + " simulate", dir / "log"), 0)
      << macroreal::testing::read_file(dir / "log");
  ASSERT_EQ(run(cfg + " --threads 2 --out " + quoted((dir / "b").string()) + " simulate", dir / "log"), 0);
  EXPECT_EQ(macroreal::testing::read_file(dir / "a" / "manifest.json"),
            macroreal::testing::read_file(dir / "b" / "manifest.json"));
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    EXPECT_EQ(macroreal::testing::read_file(entry.path()), macroreal::testing::read_file(dir / "b" / rel)) << rel;
  }

  ASSERT_EQ(run(cfg + " --out " + quoted((dir / "r").string()) + " analyze " + quoted((dir / "a").string()),
                dir / "log"),
            0)
      << macroreal::testing::read_file(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "r" / "analysis.json"));
}

TEST(Cli, ThreadsFromEnvironment) {
  TempDir dir;
  for (const char* value : {"3", "bogus"}) {
    const fs::path out = dir / value;
    const std::string command = std::string("MACROREAL_THREADS=") + value + " " + quoted(MACROREAL_CLI_PATH) +
                                " --out " + quoted(out.string()) + " predict >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0) << value;
  }
  EXPECT_EQ(macroreal::testing::read_file(dir / "3" / "prediction.json"),
            macroreal::testing::read_file(dir / "bogus" / "prediction.json"));
}

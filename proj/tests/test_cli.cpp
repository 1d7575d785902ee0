#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kLab = NIKODYM_LAB_PATH;
const std::string kSmoke = std::string(NIKODYM_SOURCE_DIR) + "/configs/smoke.ini";
const std::vector<std::string> kSubcommands{"exponents", "lowerbound", "counting", "volume", "dualnorm", "netdump"};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nikodym_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int lab(const std::string& args, const fs::path& out, const std::string& extra = "") {
  const std::string cmd = kLab + " --config " + kSmoke + " " + args + " --out " + out.string() + " " + extra + " > " +
                          (out / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path only_run(const fs::path& out) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory()) dirs.push_back(e.path());
  if (dirs.size() != 1) throw std::runtime_error("expected exactly one run directory in " + out.string());
  return dirs.front();
}

json manifest(const fs::path& run) {
  std::ifstream in(run / "manifest.json");
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::set<std::string> csv_files(const fs::path& run) {
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(run))
    if (e.path().extension() == ".csv") out.insert(e.path().filename().string());
  return out;
}

}  // namespace

TEST(Cli, SmokeRunsProduceManifestsAndTaggedCsvs) {
  for (const std::string& sub : kSubcommands) {
    SCOPED_TRACE(sub);
    const fs::path out = scratch("smoke_" + sub);
    ASSERT_EQ(lab(sub, out), 0) << slurp(out / "log.txt");
    const fs::path run = only_run(out);
    const json m = manifest(run);
    for (const char* key : {"id", "subcommand", "config", "seed", "version", "wall_time_s", "outputs", "checks"})
      EXPECT_TRUE(m.contains(key)) << key;
    EXPECT_EQ(m["subcommand"], sub);
    EXPECT_EQ(m["id"], run.filename().string());
    EXPECT_EQ(m["seed"], 7);
    EXPECT_FALSE(m["checks"].empty());
    EXPECT_TRUE(m["all_pass"].get<bool>());

    // Every CSV on disk is listed exactly once, and nothing listed is missing.
    const auto listed = m["outputs"].get<std::vector<std::string>>();
    EXPECT_EQ(std::set<std::string>(listed.begin(), listed.end()).size(), listed.size());
    EXPECT_EQ(std::set<std::string>(listed.begin(), listed.end()), csv_files(run));

    const std::string id = m["id"];
    for (const std::string& name : listed) {
      std::ifstream in(run / name);
      std::string line;
      ASSERT_TRUE(std::getline(in, line)) << name;
      EXPECT_EQ(line.rfind("id,", 0), 0u) << name;
      std::size_t rows = 0;
      while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(line.rfind(id + ",", 0), 0u) << name << ": " << line;
      }
      EXPECT_GT(rows, 0u) << name;
    }
  }
}

TEST(Cli, ConfigValuesReachTheManifest) {
  const fs::path out = scratch("config");
  ASSERT_EQ(lab("volume", out), 0);
  const json m = manifest(only_run(out));
  EXPECT_EQ(m["config"]["pairs"], 20);
  EXPECT_EQ(m["config"]["pair_n"], json::array({2, 3}));
  EXPECT_EQ(m["config"]["triple_constant"], 100.0);
}

TEST(Cli, ByteIdenticalAcrossThreadCounts) {
  for (const char* sub : {"lowerbound", "counting", "volume", "dualnorm", "netdump"}) {
    SCOPED_TRACE(sub);
    const fs::path a = scratch(std::string("t1_") + sub), b = scratch(std::string("t8_") + sub);
    ASSERT_EQ(lab(sub, a, "--threads 1"), 0);
    ASSERT_EQ(lab(sub, b, "--threads 8"), 0);
    const fs::path ra = only_run(a), rb = only_run(b);
    EXPECT_EQ(ra.filename(), rb.filename());
    ASSERT_EQ(csv_files(ra), csv_files(rb));
    for (const std::string& name : csv_files(ra)) EXPECT_EQ(slurp(ra / name), slurp(rb / name)) << name;
  }
}

TEST(Cli, RerunIntoSameDirectoryReproduces) {
  const fs::path out = scratch("rerun");
  ASSERT_EQ(lab("netdump", out), 0);
  const fs::path run = only_run(out);
  const std::string first = slurp(run / "minkowski.csv");
  ASSERT_EQ(lab("netdump", out), 0);
  EXPECT_EQ(only_run(out), run);
  EXPECT_EQ(slurp(run / "minkowski.csv"), first);
}

TEST(Cli, SeedAndLadderFlagsOverrideConfig) {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(lab("dualnorm", a), 0);
  ASSERT_EQ(lab("dualnorm", b, "--seed 9 --ladder 2^-4..2^-5"), 0);
  const json ma = manifest(only_run(a)), mb = manifest(only_run(b));
  EXPECT_NE(ma["id"], mb["id"]);
  EXPECT_EQ(mb["seed"], 9);
  EXPECT_EQ(mb["config"]["ladder"], "2^-4..2^-5");
  std::ifstream in(only_run(b) / "dualnorm.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Cli, FailedCheckGivesExitOne) {
  const fs::path out = scratch("fail");
  EXPECT_EQ(lab("volume", out, "--parts pairs --pair_constant 1e-6 1e-6"), 1);
  const json m = manifest(only_run(out));
  EXPECT_FALSE(m["all_pass"].get<bool>());
  EXPECT_FALSE(m["checks"][0]["pass"].get<bool>());
}

TEST(Cli, BadInputsGiveExitTwo) {
  EXPECT_EQ(lab("lowerbound", scratch("bad_row"), "--parts slopes --experiment 'NM/no-such-row n=2'"), 2);
  EXPECT_EQ(lab("dualnorm", scratch("bad_ladder"), "--ladder 2^-4..3^-6"), 2);
  EXPECT_EQ(lab("counting", scratch("bad_set"), "--parts count --count_sets torus"), 2);
  EXPECT_NE(lab("nosuchcommand", scratch("bad_sub")), 0);
}

// Acceptance suite: one PASS/FAIL line per criterion. Heavy suites run through nikodym-lab with the
// canonical config; their CSVs are re-checked here against tolerances pinned in this file.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nikodym/constructions.hpp"
#include "nikodym/exponents.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nikodym;

namespace {

// Pinned tolerances and budgets.
constexpr double kExact = 1e-12;
constexpr double kLimitTol = 1e-6;
constexpr double kInclusionMin = 0.05;
constexpr std::int64_t kInclusionZ = 1000;
constexpr double kCountMax = 16.0;
constexpr double kWeightedMax = 8.0;
constexpr double kDriftMax = 4.0;
constexpr double kSaturationBand = 16.0;
constexpr double kMinkowskiBand = 4.0;
constexpr double kTripleConstant = 100.0;
const std::map<int, double> kPairConstant{{2, 50.0}, {3, 50.0}, {4, 100.0}};

const std::string kLab = NIKODYM_LAB_PATH;
const std::string kConfig = std::string(NIKODYM_SOURCE_DIR) + "/configs/default.ini";

// ---------------------------------------------------------------------------
// CSV reading

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  std::string str(std::size_t r, const std::string& name) const { return rows[r].at(col(name)); }
  double num(std::size_t r, const std::string& name) const {
    const std::string s = str(r, name);
    if (s == "inf") return INFINITY;
    return std::stod(s);
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

CsvTable read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = split_csv_line(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split_csv_line(line));
  return t;
}

// ---------------------------------------------------------------------------
// Runner

struct LabRun {
  int exit_code = -1;
  fs::path dir;
  json manifest;
  double wall = 0.0;
};

fs::path g_root;

LabRun lab(const std::string& tag, const std::string& args, int threads) {
  const fs::path out = g_root / ("t" + std::to_string(threads)) / tag;
  fs::remove_all(out);
  fs::create_directories(out);
  const std::string cmd = kLab + " --config " + kConfig + " " + args + " --threads " + std::to_string(threads) +
                          " --out " + out.string() + " > " + (out / "log.txt").string() + " 2>&1";
  LabRun r;
  const int status = std::system(cmd.c_str());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory()) r.dir = e.path();
  if (!r.dir.empty() && fs::exists(r.dir / "manifest.json")) {
    std::ifstream in(r.dir / "manifest.json");
    r.manifest = json::parse(in);
    r.wall = r.manifest["wall_time_s"].get<double>();
  }
  return r;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const Verdict& v, double seconds, double budget) {
  const bool in_time = seconds <= budget;
  const bool pass = v.pass && in_time;
  if (!pass) ++g_failures;
  std::ostringstream line;
  line << (pass ? "PASS  " : "FAIL  ") << name << ": " << v.detail << " [" << std::fixed;
  line.precision(2);
  line << seconds << " s, budget " << budget << " s" << (in_time ? "" : ", over budget") << "]";
  std::cout << line.str() << std::endl;
}

template <class F>
void timed(const std::string& name, double budget, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = f();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  report(name, v, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), budget);
}

// Runs a lab suite at one thread and judges its CSVs; the runtime is the lab's own wall time.
void suite(const std::string& name, const std::string& tag, const std::string& args, double budget,
           const std::function<Verdict(const fs::path&)>& judge) {
  const LabRun r = lab(tag, args, 1);
  Verdict v;
  try {
    if (r.dir.empty() || r.manifest.is_null()) throw std::runtime_error("no manifest (exit " + std::to_string(r.exit_code) + ")");
    v = judge(r.dir);
    if (r.exit_code != 0) v = {false, v.detail + "; lab exit code " + std::to_string(r.exit_code)};
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  report(name, v, r.wall, budget);
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Least-squares slope of log(value) against log(delta).
double slope(const std::vector<std::pair<double, double>>& pts) {
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) mx += std::log(x), my += std::log(y);
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
    sxy += (std::log(x) - mx) * (std::log(y) - my);
  }
  return sxy / sxx;
}

// delta^2/(d+delta) * ((Delta+delta)/(d+delta))^{(n-3)/2} from the pair's radii and center distance.
double pair_oracle(int n, double r1, double r2, double dist, double delta) {
  const double d = dist + std::abs(r1 - r2);
  const double Delta = std::abs(dist - std::abs(r1 - r2)) * std::abs(r1 + r2 - dist);
  return delta * delta / (d + delta) * std::pow((Delta + delta) / (d + delta), 0.5 * (n - 3));
}

// ---------------------------------------------------------------------------
// Criteria

Verdict exponent_points() {
  struct P {
    const char* name;
    double got, want, tol;
  };
  std::vector<P> ps{{"nm_upper(2,2)", nm_upper(2, 2.0), 0.0, kExact},
                    {"nm_upper(3,3/2)", nm_upper(3, 1.5), -1.0 / 6.0, kExact},
                    {"nm_upper(4,4/3)", nm_upper(4, 4.0 / 3.0), -0.25, kExact},
                    {"ns_upper(2,3)", ns_upper(2, 3.0), 0.0, kExact},
                    {"ns_upper(3,2)", ns_upper(3, 2.0), 0.0, kExact},
                    {"st_sufficient(3,0)", st_sufficient(3, 0.0), 1.5, kExact},
                    {"st_sufficient(4,0)", st_sufficient(4, 0.0), 4.0 / 3.0, kExact},
                    {"st_sufficient(5,0)", st_sufficient(5, 0.0), 1.25, kExact},
                    {"st_sufficient(2,1-)", st_sufficient(2, 1.0 - 1e-9), 3.0, kLimitTol},
                    {"st_sufficient(3,2-)", st_sufficient(3, 2.0 - 1e-9), 2.0, kLimitTol},
                    {"st_sufficient(4,3-)", st_sufficient(4, 3.0 - 1e-9), 2.0, kLimitTol},
                    {"st_sufficient(5,4-)", st_sufficient(5, 4.0 - 1e-9), 2.0, kLimitTol},
                    {"st_sufficient(5,3)", st_sufficient(5, 3.0), 1.5, kExact},
                    {"st_necessary(5,3)", st_necessary(5, 3.0), 1.5, kExact}};
  int grid_points = 0;
  std::vector<std::string> bad;
  for (int k = 0; k <= 20; ++k, ++grid_points) {
    const double s = k / 20.0;
    if (std::abs(mt_sufficient(2, s) - (1.0 + s)) > kExact) bad.push_back("mt_sufficient(2," + num(s) + ")");
  }
  for (const P& p : ps)
    if (!(std::abs(p.got - p.want) <= p.tol)) bad.push_back(p.name);
  std::string detail = std::to_string(ps.size() + grid_points - bad.size()) + "/" + std::to_string(ps.size() + grid_points) + " values exact";
  for (const auto& b : bad) detail += "; wrong " + b;
  return {bad.empty(), detail};
}

Verdict consistency_scan() {
  int total = 0, violations = 0;
  for (int n = 2; n <= 5; ++n)
    for (int k = 0; k * 0.05 <= n - 1 + 1e-9; ++k) {
      const double s = k * 0.05;
      total += 2;
      violations += mt_sufficient(n, s) < mt_necessary(n, s) - kExact;
      violations += st_sufficient(n, s) < st_necessary(n, s) - kExact;
    }
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(total) + " (table, n, s) points"};
}

Verdict sharpness() {
  double worst = 0.0;
  int count = 0;
  for (int n = 2; n <= 4; ++n)
    for (int k = 0; k < 50; ++k) {
      const double p = 1.0 + 4.0 * k / 49.0;
      worst = std::max(worst, std::abs(sharpest_gamma(Table::NM, n, p) - nm_upper(n, p)));
      worst = std::max(worst, std::abs(sharpest_gamma(Table::NS, n, p) - ns_upper(n, p)));
      count += 2;
    }
  return {worst <= kExact, std::to_string(count) + " (table, n, p) points, max deviation " + num(worst)};
}

Verdict slopes(const fs::path& run) {
  struct Target {
    std::string row;
    int n;
    double p, gamma, tol;
  };
  const std::vector<Target> targets{{"NM/delta-ball", 2, 1.0, -1.0, 0.15},
                                    {"NM/delta-ball", 2, 1.5, -1.0 / 3.0, 0.15},
                                    {"NM/delta-ball", 2, 2.0, 0.0, 0.15},
                                    {"NM/tube", 3, 1.5, -1.0 / 6.0, 0.2},
                                    {"NS/tube", 2, 3.0, 0.0, 0.15}};
  const CsvTable t = read_csv(run / "lowerbound.csv");
  bool ok = true;
  std::string detail;
  for (const Target& g : targets) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (t.str(r, "row") == g.row && t.num(r, "n") == g.n && std::abs(t.num(r, "p") - g.p) < 1e-12)
        pts.emplace_back(t.num(r, "delta"), t.num(r, "ratio"));
    std::set<double> deltas;
    for (const auto& pt : pts) deltas.insert(pt.first);
    const bool ladder_ok = deltas.size() == 6 && *deltas.rbegin() == std::ldexp(1.0, -4) && *deltas.begin() == std::ldexp(1.0, -9);
    const double m = pts.size() >= 3 ? slope(pts) : NAN;
    const bool pass = ladder_ok && std::abs(m - g.gamma) <= g.tol;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + g.row + " n=" + std::to_string(g.n) + " p=" + num(g.p) + " slope " + num(m) +
              " vs " + num(g.gamma) + (pass ? "" : " (out of tolerance)");
  }
  return {ok, detail};
}

Verdict inclusion(const fs::path& run) {
  const CsvTable t = read_csv(run / "inclusion.csv");
  std::set<std::string> rows;
  std::set<double> deltas;
  double worst = INFINITY;
  bool enough_z = true;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    rows.insert(t.str(r, "row"));
    deltas.insert(t.num(r, "delta"));
    worst = std::min(worst, t.num(r, "min_ratio"));
    enough_z = enough_z && t.num(r, "z_samples") >= kInclusionZ;
  }
  std::set<std::string> expected;
  for (const ExampleRow& row : catalog_rows()) expected.insert(row.key());
  const bool coverage = rows == expected && deltas == std::set<double>{std::ldexp(1.0, -6), std::ldexp(1.0, -4)};
  return {coverage && enough_z && worst >= kInclusionMin,
          std::to_string(t.rows.size()) + " (row, n, s, delta) cases over " + std::to_string(rows.size()) +
              " rows, min ratio " + num(worst) + (coverage ? "" : "; catalog or scale coverage incomplete") +
              (enough_z ? "" : "; too few centers")};
}

Verdict geometry(const fs::path& run) {
  const CsvTable pairs = read_csv(run / "pairs.csv");
  std::map<int, int> count;
  std::map<int, double> worst;
  bool ok = true;
  for (std::size_t r = 0; r < pairs.rows.size(); ++r) {
    const int n = static_cast<int>(pairs.num(r, "n"));
    const double bound = pair_oracle(n, pairs.num(r, "r1"), pairs.num(r, "r2"), pairs.num(r, "center_distance"), 0.01);
    if (std::abs(bound - pairs.num(r, "bound")) > 1e-9 * bound) ok = false;
    const double ratio = pairs.num(r, "mc_volume") / bound;
    ++count[n];
    worst[n] = std::max(worst[n], ratio);
    if (ratio > kPairConstant.at(n)) ok = false;
  }
  std::string detail;
  for (const auto& [n, c] : kPairConstant) {
    if (count[n] < 1000) ok = false;
    detail += "n=" + std::to_string(n) + ": " + std::to_string(count[n]) + " pairs, max ratio " + num(worst[n]) + " (C=" + num(c) + "); ";
  }
  const CsvTable triples = read_csv(run / "triples.csv");
  std::map<std::string, int> tcount;
  std::map<std::string, double> tworst;
  int hits = 0;
  for (std::size_t r = 0; r < triples.rows.size(); ++r) {
    const std::string kase = triples.str(r, "case");
    const double R = triples.num(r, "R"), mc = triples.num(r, "mc_volume");
    ++tcount[kase];
    if (kase == "empty") {
      if (R < 2.0) ok = false;
      hits += mc != 0.0;
    } else {
      tworst[kase] = std::max(tworst[kase], mc / triples.num(r, "bound"));
      if (mc > kTripleConstant * triples.num(r, "bound")) ok = false;
    }
  }
  for (const char* kase : {"empty", "near_one", "transverse"})
    if (tcount[kase] < 100) ok = false;
  ok = ok && hits == 0;
  detail += "triples: " + std::to_string(tcount["empty"]) + " with R >= 2 and " + std::to_string(hits) + " hits, near-one max " +
            num(tworst["near_one"]) + ", transverse max " + num(tworst["transverse"]) + " (C=" + num(kTripleConstant) + ")";
  return {ok, detail};
}

Verdict counting(const fs::path& run) {
  const CsvTable t = read_csv(run / "counting.csv");
  std::map<std::string, std::vector<double>> by_lemma;
  std::map<std::string, std::vector<double>> weighted;
  int count_sets = 0;
  double count_max = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string lemma = t.str(r, "lemma");
    const double ratio = t.num(r, "ratio");
    if (lemma == "count") {
      ++count_sets;
      count_max = std::max(count_max, ratio);
    } else if (lemma == "weighted") {
      weighted[t.str(r, "configuration").substr(0, t.str(r, "configuration").find(' '))].push_back(ratio);
    } else {
      by_lemma[lemma].push_back(ratio);
    }
  }
  double w_max = 0.0;
  for (const auto& [a, v] : weighted) w_max = std::max(w_max, *std::max_element(v.begin(), v.end()));
  auto drift_of = [](const std::vector<double>& v) {
    return v.empty() ? INFINITY : *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  const auto& two = by_lemma["2sph"];
  const auto& cube = by_lemma["2sph_cube"];
  const double drift = drift_of(two), cube_drift = drift_of(cube);
  auto band = [](const std::vector<double>& v) {
    double lo = INFINITY, hi = 0.0;
    for (double x : v) lo = std::min(lo, x / v.front()), hi = std::max(hi, x / v.front());
    return std::pair{lo, hi};
  };
  const auto [lo3, hi3] = band(by_lemma["3sph"]);
  const auto [lo4, hi4] = band(by_lemma["4sph"]);
  const bool ok = count_sets == 3 && count_max <= kCountMax && weighted.size() == 3 && w_max <= kWeightedMax &&
                  two.size() == 4 && drift <= kDriftMax && cube.size() == 4 && cube_drift <= kDriftMax && by_lemma["3sph"].size() == 3 && by_lemma["4sph"].size() == 3 &&
                  lo3 >= 1.0 / kSaturationBand && hi3 <= kSaturationBand && lo4 >= 1.0 / kSaturationBand &&
                  hi4 <= kSaturationBand;
  return {ok, "ball counts max " + num(count_max) + " over " + std::to_string(count_sets) + " sets; weighted max " +
                  num(w_max) + " over " + std::to_string(weighted.size()) + " exponents; 2sph drift x" + num(drift) +
                  " (cube net x" + num(cube_drift) + ")" +
                  "; 3sph band [" + num(lo3) + ", " + num(hi3) + "]; 4sph band [" + num(lo4) + ", " + num(hi4) + "]"};
}

Verdict dualnorm(const fs::path& run) {
  const CsvTable t = read_csv(run / "dualnorm.csv");
  std::vector<double> ratios;
  double a_lo = INFINITY, a_hi = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double delta = t.num(r, "delta"), A = t.num(r, "A"), N = t.num(r, "family_size");
    ratios.push_back(t.num(r, "norm") / (std::cbrt(A) * std::pow(delta * N, 2.0 / 3.0)));
    a_lo = std::min(a_lo, A * delta);
    a_hi = std::max(a_hi, A * delta);
  }
  const double drift = *std::max_element(ratios.begin(), ratios.end()) / *std::min_element(ratios.begin(), ratios.end());
  return {ratios.size() == 4 && drift <= kDriftMax && a_lo >= 0.25 && a_hi <= 4.0,
          std::to_string(ratios.size()) + " scales, A*delta in [" + num(a_lo) + ", " + num(a_hi) + "], drift x" + num(drift) +
              " with C=" + num(ratios.front())};
}

Verdict fractal(const fs::path& run) {
  const CsvTable cov = read_csv(run / "covering.csv");
  bool ok = cov.rows.size() == 6;
  for (std::size_t r = 0; r < cov.rows.size(); ++r)
    ok = ok && cov.num(r, "covering_number") == std::ldexp(1.0, static_cast<int>(cov.num(r, "k")));
  const CsvTable mk = read_csv(run / "minkowski.csv");
  double lo = INFINITY, hi = 0.0;
  std::set<double> dims;
  for (std::size_t r = 0; r < mk.rows.size(); ++r) {
    lo = std::min(lo, mk.num(r, "constant"));
    hi = std::max(hi, mk.num(r, "constant"));
    dims.insert(mk.num(r, "s"));
  }
  ok = ok && dims == std::set<double>{0.5, 1.0, 1.5} && lo >= 1.0 / kMinkowskiBand && hi <= kMinkowskiBand;
  const CsvTable nets = read_csv(run / "nets.csv");
  double sep = 0.0, uncovered = 0.0;
  for (std::size_t r = 0; r < nets.rows.size(); ++r) {
    sep += nets.num(r, "separation_violations");
    uncovered += nets.num(r, "coverage_violations");
  }
  ok = ok && !nets.rows.empty() && sep == 0.0 && uncovered == 0.0;
  return {ok, "covering numbers 2^k for k=1.." + std::to_string(cov.rows.size()) + ", Minkowski constants in [" + num(lo) +
                  ", " + num(hi) + "], " + std::to_string(nets.rows.size()) + " nets with " + num(sep) + " close pairs and " +
                  num(uncovered) + " uncovered probes"};
}

}  // namespace

int main() {
  g_root = fs::temp_directory_path() / ("nikodym_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_root);
  std::cout << "nikodym acceptance suite, config " << kConfig << std::endl;

  timed("exponent point checks", 1.0, exponent_points);
  timed("consistency scan", 10.0, consistency_scan);
  timed("sharpness closure", 1.0, sharpness);

  struct Suite {
    std::string name, tag, args;
    double budget;
    std::function<Verdict(const fs::path&)> judge;
  };
  const std::vector<Suite> suites{
      {"lower-bound scaling", "slopes", "lowerbound --parts slopes", 5 * 300.0, slopes},
      {"inclusion verification", "inclusion", "lowerbound --parts inclusion", 600.0, inclusion},
      {"geometry oracle suite", "volume", "volume", 300.0, geometry},
      {"counting suite", "counting", "counting", 900.0, counting},
      {"dual-norm suite", "dualnorm", "dualnorm", 600.0, dualnorm},
      {"fractal suite", "netdump", "netdump", 30.0, fractal},
  };
  for (const Suite& s : suites) suite(s.name, s.tag, s.args, s.budget, s.judge);

  // Same config and seed at 8 threads: every CSV must match byte for byte.
  timed("determinism", 3600.0, [&] {
    std::vector<std::string> exps{"exponents"};
    for (const Suite& s : suites) exps.push_back(s.tag);
    lab("exponents", "exponents", 1);
    std::size_t files = 0, mismatched = 0;
    std::string detail;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      const std::string args = i == 0 ? "exponents" : suites[i - 1].args;
      const LabRun b = lab(exps[i], args, 8);
      const fs::path a = g_root / "t1" / exps[i];
      fs::path ra;
      for (const auto& e : fs::directory_iterator(a))
        if (e.is_directory()) ra = e.path();
      if (ra.empty() || b.dir.empty() || ra.filename() != b.dir.filename()) {
        ++mismatched;
        detail += "; run id differs for " + exps[i];
        continue;
      }
      std::set<std::string> names;
      for (const fs::path& d : {ra, b.dir})
        for (const auto& e : fs::directory_iterator(d))
          if (e.path().extension() == ".csv") names.insert(e.path().filename().string());
      for (const std::string& name : names) {
        ++files;
        auto slurp = [](const fs::path& p) {
          std::ifstream in(p, std::ios::binary);
          std::ostringstream s;
          s << in.rdbuf();
          return in ? s.str() : std::string("\x01missing");
        };
        if (slurp(ra / name) != slurp(b.dir / name)) {
          ++mismatched;
          detail += "; " + exps[i] + "/" + name + " differs";
        }
      }
    }
    return Verdict{mismatched == 0 && files > 0,
                   std::to_string(files) + " CSV files compared at 1 vs 8 threads, " + std::to_string(mismatched) + " mismatches" + detail};
  });

  fs::remove_all(g_root);
  std::cout << (g_failures == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}

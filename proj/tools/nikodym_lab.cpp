// nikodym-lab: seeded experiment runner. Each run writes runs/<id>/manifest.json plus CSVs.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <deque>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nikodym/constructions.hpp"
#include "nikodym/csv.hpp"
#include "nikodym/exponents.hpp"
#include "nikodym/families.hpp"
#include "nikodym/fractal.hpp"
#include "nikodym/geometry.hpp"
#include "nikodym/parallel.hpp"

#ifndef NIKODYM_VERSION
#define NIKODYM_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nikodym;

namespace {

constexpr double kExact = 1e-12;
constexpr double kLimitStep = 1e-9;
constexpr double kLimitTol = 1e-6;

// ---------------------------------------------------------------------------
// Parsing helpers

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_plain(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

// Accepts decimals, "inf", fractions "a/b", powers "2^-k" and "sqrt(x)".
double parse_number(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty number");
  if (const auto caret = s.find('^'); caret != std::string::npos)
    return std::pow(parse_number(s.substr(0, caret)), parse_number(s.substr(caret + 1)));
  if (s.rfind("sqrt(", 0) == 0 && s.back() == ')') return std::sqrt(parse_number(s.substr(5, s.size() - 6)));
  if (const auto slash = s.find('/'); slash != std::string::npos)
    return parse_number(s.substr(0, slash)) / parse_number(s.substr(slash + 1));
  return parse_plain(s);
}

// "2^-4..2^-9" (unit steps in the exponent), "2^-3..2^-4:0.5", "2^-4,2^-6" or plain numbers.
std::vector<double> parse_ladder(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number(item));
      continue;
    }
    std::string hi = item.substr(dots + 2);
    double step = 1.0;
    if (const auto colon = hi.find(':'); colon != std::string::npos) {
      step = parse_number(hi.substr(colon + 1));
      hi = hi.substr(0, colon);
    }
    const std::string lo = trim(item.substr(0, dots));
    hi = trim(hi);
    const auto c0 = lo.find('^'), c1 = hi.find('^');
    if (c0 == std::string::npos || c1 == std::string::npos || lo.substr(0, c0) != hi.substr(0, c1))
      throw std::invalid_argument("ladder range needs a common base: '" + item + "'");
    if (!(step > 0.0)) throw std::invalid_argument("ladder step must be positive");
    const double base = parse_number(lo.substr(0, c0));
    const double e0 = parse_number(lo.substr(c0 + 1)), e1 = parse_number(hi.substr(c1 + 1));
    const double dir = e1 >= e0 ? 1.0 : -1.0;
    const int count = static_cast<int>(std::floor(std::abs(e1 - e0) / step + 1e-9));
    for (int k = 0; k <= count; ++k) out.push_back(std::pow(base, e0 + dir * k * step));
  }
  for (double d : out)
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("ladder entries must lie in (0, 1): '" + text + "'");
  return out;
}

// "NM/delta-ball n=2 s=0 p=1,3/2 tol=0.15": leading words form the key, then key=value pairs.
struct Entry {
  std::string key;
  std::map<std::string, std::string> kv;

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  std::string str(const std::string& k, const std::string& fallback) const {
    const auto it = kv.find(k);
    return it == kv.end() ? fallback : it->second;
  }
  double num(const std::string& k, double fallback) const { return has(k) ? parse_number(kv.at(k)) : fallback; }
  int integer(const std::string& k, int fallback) const { return static_cast<int>(std::lround(num(k, fallback))); }
  std::vector<double> list(const std::string& k, std::vector<double> fallback) const {
    if (!has(k)) return fallback;
    std::vector<double> out;
    for (const std::string& v : split(kv.at(k), ',')) out.push_back(parse_number(v));
    return out;
  }
};

Entry parse_entry(const std::string& text) {
  Entry e;
  std::istringstream in(text);
  std::string tok;
  std::vector<std::string> words;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (!e.kv.empty()) throw std::invalid_argument("bare word after key=value pairs: '" + text + "'");
      words.push_back(tok);
    } else {
      e.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  for (std::size_t i = 0; i < words.size(); ++i) e.key += (i ? " " : "") + words[i];
  return e;
}

bool wants(const std::vector<std::string>& parts, const std::string& part) {
  return std::find(parts.begin(), parts.end(), part) != parts.end();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Run context

class Run {
public:
  Run(std::string sub, json config, std::uint64_t seed, const fs::path& out_root, const std::string& id_override)
      : sub_(std::move(sub)), config_(std::move(config)), seed_(seed) {
    id_ = id_override.empty() ? sub_ + "-" + hex64(fnv1a(sub_ + '\n' + config_.dump() + '\n' + std::to_string(seed_))).substr(0, 12)
                              : id_override;
    dir_ = out_root / id_;
    fs::create_directories(dir_);
    for (const auto& entry : fs::directory_iterator(dir_))
      if (entry.path().extension() == ".csv") fs::remove(entry.path());
  }

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t seed(std::uint64_t a, std::uint64_t b = 0) const { return mix_seed(seed_, a, b); }
  std::uint64_t seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) const { return mix_seed(seed(a, b), c); }

  std::ofstream& csv(const std::string& name) {
    if (std::find(outputs_.begin(), outputs_.end(), name) != outputs_.end())
      throw std::logic_error("output opened twice: " + name);
    outputs_.push_back(name);
    streams_.emplace_back(dir_ / name);
    if (!streams_.back()) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return streams_.back();
  }

  void check(const std::string& name, bool pass, const std::string& detail) {
    checks_.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    if (!pass) ok_ = false;
    std::cout << (pass ? "PASS " : "FAIL ") << name << "  " << detail << std::endl;
  }

  bool ok() const { return ok_; }

  void finish(double wall_seconds) {
    for (auto& s : streams_) s.close();
    json m;
    m["id"] = id_;
    m["subcommand"] = sub_;
    m["config"] = config_;
    m["seed"] = seed_;
    m["version"] = NIKODYM_VERSION;
    m["wall_time_s"] = wall_seconds;
    m["outputs"] = outputs_;
    m["checks"] = checks_;
    m["all_pass"] = ok_;
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << '\n';
    std::cout << "run " << id_ << ": " << checks_.size() << " checks, "
              << std::count_if(checks_.begin(), checks_.end(), [](const json& c) { return !c["pass"].get<bool>(); })
              << " failed; manifest " << (dir_ / "manifest.json").string() << std::endl;
  }

private:
  std::string sub_, id_;
  json config_;
  std::uint64_t seed_;
  fs::path dir_;
  std::vector<std::string> outputs_;
  std::deque<std::ofstream> streams_;
  json checks_ = json::array();
  bool ok_ = true;
};

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// exponents

struct ExponentsConfig {
  std::vector<std::string> parts{"region", "points", "consistency", "sharpness"};
  std::vector<int> region_n{5};
  double region_step = 0.01;
  std::vector<int> scan_n{2, 3, 4, 5};
  double scan_step = 0.05;
  std::vector<int> sharp_n{2, 3, 4};
  int sharp_points = 50;
  double p_max = 5.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExponentsConfig, parts, region_n, region_step, scan_n, scan_step, sharp_n,
                                   sharp_points, p_max)

void run_exponents(Run& run, const ExponentsConfig& cfg) {
  if (wants(cfg.parts, "region")) {
    CsvWriter w(run.csv("region.csv"), {"id", "table", "n", "s", "sufficient_p", "necessary_p"});
    for (int n : cfg.region_n)
      for (RegionTable t : {RegionTable::MT, RegionTable::ST})
        for (const BoundaryRow& r : region_boundary(t, n, grid(0.0, n - 1.0, cfg.region_step)))
          w.row(run.id(), t == RegionTable::MT ? "MT" : "ST", n, r.s, r.sufficient_p, r.necessary_p);
  }

  if (wants(cfg.parts, "points")) {
    struct Point {
      std::string name;
      double expected, actual, tol;
    };
    std::vector<Point> pts{
        {"nm_upper(2,2)", 0.0, nm_upper(2, 2.0), kExact},
        {"nm_upper(3,3/2)", -1.0 / 6.0, nm_upper(3, 1.5), kExact},
        {"nm_upper(4,4/3)", -0.25, nm_upper(4, 4.0 / 3.0), kExact},
        {"ns_upper(2,3)", 0.0, ns_upper(2, 3.0), kExact},
        {"ns_upper(3,2)", 0.0, ns_upper(3, 2.0), kExact},
    };
    for (double s : grid(0.0, 1.0, 0.05))
      pts.push_back({"mt_sufficient(2," + fmt(s) + ")", 1.0 + s, mt_sufficient(2, s), kExact});
    for (int n = 3; n <= 5; ++n)
      pts.push_back({"st_sufficient(" + std::to_string(n) + ",0)", n / (n - 1.0), st_sufficient(n, 0.0), kExact});
    pts.push_back({"st_sufficient(2,1)", 3.0, st_sufficient(2, 1.0), kExact});
    pts.push_back({"st_sufficient(2,1-eps)", 3.0, st_sufficient(2, 1.0 - kLimitStep), kLimitTol});
    for (int n = 3; n <= 5; ++n) {
      const std::string tag = "st_sufficient(" + std::to_string(n) + "," + std::to_string(n - 1);
      pts.push_back({tag + ")", 2.0, st_sufficient(n, n - 1.0), kExact});
      pts.push_back({tag + "-eps)", 2.0, st_sufficient(n, n - 1.0 - kLimitStep), kLimitTol});
    }
    pts.push_back({"st_sufficient(5,3)", 1.5, st_sufficient(5, 3.0), kExact});
    pts.push_back({"st_necessary(5,3)", 1.5, st_necessary(5, 3.0), kExact});

    CsvWriter w(run.csv("points.csv"), {"id", "check", "expected", "actual", "abs_error", "tolerance", "pass"});
    std::size_t bad = 0;
    for (const Point& p : pts) {
      const double err = std::abs(p.actual - p.expected);
      const bool pass = err <= p.tol;
      if (!pass) ++bad;
      w.row(run.id(), p.name, p.expected, p.actual, err, p.tol, pass);
    }
    run.check("exponents/points", bad == 0, std::to_string(pts.size() - bad) + "/" + std::to_string(pts.size()) + " exact");
  }

  if (wants(cfg.parts, "consistency")) {
    CsvWriter w(run.csv("consistency.csv"), {"id", "table", "n", "s", "sufficient_p", "necessary_p", "ok"});
    std::size_t bad = 0, total = 0;
    for (int n : cfg.scan_n)
      for (RegionTable t : {RegionTable::MT, RegionTable::ST})
        for (const BoundaryRow& r : region_boundary(t, n, grid(0.0, n - 1.0, cfg.scan_step))) {
          const bool ok = r.sufficient_p >= r.necessary_p - kExact;
          bad += !ok;
          ++total;
          w.row(run.id(), t == RegionTable::MT ? "MT" : "ST", n, r.s, r.sufficient_p, r.necessary_p, ok);
        }
    run.check("exponents/consistency", bad == 0, std::to_string(bad) + " violations over " + std::to_string(total) + " points");
  }

  if (wants(cfg.parts, "sharpness")) {
    if (cfg.sharp_points < 2) throw std::invalid_argument("sharp_points must be at least 2");
    CsvWriter w(run.csv("sharpness.csv"), {"id", "table", "n", "p", "sharpest_gamma", "upper", "abs_error", "pass"});
    double worst = 0.0;
    for (int n : cfg.sharp_n) {
      std::vector<double> ps;
      for (int k = 0; k < cfg.sharp_points; ++k) ps.push_back(1.0 + (cfg.p_max - 1.0) * k / (cfg.sharp_points - 1));
      ps.push_back(kInf);
      for (Table t : {Table::NM, Table::NS})
        for (double p : ps) {
          const double g = sharpest_gamma(t, n, p);
          const double u = t == Table::NM ? nm_upper(n, p) : ns_upper(n, p);
          const double err = std::abs(g - u);
          worst = std::max(worst, err);
          w.row(run.id(), to_string(t), n, p, g, u, err, err <= kExact);
        }
    }
    run.check("exponents/sharpness", worst <= kExact, "max |row gamma - upper| = " + fmt(worst));
  }
}

// ---------------------------------------------------------------------------
// lowerbound

struct LowerboundConfig {
  std::vector<std::string> parts{"slopes", "inclusion"};
  std::string ladder = "2^-4..2^-9";
  std::vector<std::string> experiment{"NM/delta-ball n=2 p=1,3/2,2 tol=0.15", "NM/tube n=3 p=3/2 tol=0.2",
                                      "NS/tube n=2 p=3 tol=0.15"};
  std::int64_t x_samples = 20'000;
  std::int64_t norm_samples = 200'000;
  std::int64_t avg_samples = 256;
  std::vector<std::string> inclusion{"all min=0.05"};
  std::string inclusion_ladder = "2^-4,2^-6";
  std::int64_t z_samples = 1000;
  std::int64_t pool = 8192;
  std::int64_t sphere_samples = 2048;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LowerboundConfig, parts, ladder, experiment, x_samples, norm_samples, avg_samples,
                                   inclusion, inclusion_ladder, z_samples, pool, sphere_samples)

void run_lowerbound(Run& run, const LowerboundConfig& cfg) {
  if (wants(cfg.parts, "slopes")) {
    const std::vector<double> ladder = parse_ladder(cfg.ladder);
    auto& series_out = run.csv("lowerbound.csv");
    CsvWriter series(series_out, {"id", "row", "n", "s", "delta", "p", "ratio", "std_err", "predicted_gamma", "fitted_slope"});
    auto& slopes_out = run.csv("slopes.csv");
    CsvWriter slopes(slopes_out, {"id", "row", "n", "s", "p", "fitted_slope", "predicted_gamma", "tolerance", "r_squared", "pass"});
    LowerBoundOptions opt;
    opt.x_samples = cfg.x_samples;
    opt.norm_samples = cfg.norm_samples;
    opt.avg_samples = cfg.avg_samples;
    for (std::size_t e = 0; e < cfg.experiment.size(); ++e) {
      const Entry ent = parse_entry(cfg.experiment[e]);
      const ExampleRow& row = find_row(ent.key);
      const int n = ent.integer("n", row.n_min);
      const double s = ent.num("s", 0.0);
      const double tol = ent.num("tol", 0.15);
      const std::vector<double> ps = ent.list("p", {2.0});
      for (std::size_t k = 0; k < ps.size(); ++k) {
        opt.seed = run.seed(e, k);
        const LowerBoundSeries ser = lower_bound_series(row, n, s, ps[k], ladder, opt);
        for (const LowerBoundPoint& pt : ser.points)
          series.row(run.id(), row.key(), n, s, pt.delta, ps[k], pt.ratio, pt.std_err, ser.gamma, ser.fit.slope);
        const bool pass = std::abs(ser.fit.slope - ser.gamma) <= tol;
        slopes.row(run.id(), row.key(), n, s, ps[k], ser.fit.slope, ser.gamma, tol, ser.fit.r_squared, pass);
        series_out.flush();
        slopes_out.flush();
        run.check("lowerbound/" + row.key() + " n=" + std::to_string(n) + " s=" + fmt(s) + " p=" + fmt(ps[k]), pass,
                  "slope " + fmt(ser.fit.slope) + " vs gamma " + fmt(ser.gamma) + " (tol " + fmt(tol) + ")");
      }
    }
  }

  if (wants(cfg.parts, "inclusion")) {
    const std::vector<double> deltas = parse_ladder(cfg.inclusion_ladder);
    auto& out = run.csv("inclusion.csv");
    CsvWriter w(out, {"id", "row", "n", "s", "delta", "z_samples", "min_ratio", "mean_ratio", "max_ratio", "threshold", "pass"});
    InclusionOptions opt;
    opt.z_samples = cfg.z_samples;
    opt.pool = cfg.pool;
    opt.sphere_samples = cfg.sphere_samples;
    for (std::size_t e = 0; e < cfg.inclusion.size(); ++e) {
      const Entry ent = parse_entry(cfg.inclusion[e]);
      const double threshold = ent.num("min", 0.05);
      struct Case {
        const ExampleRow* row;
        int n;
        double s;
      };
      std::vector<Case> cases;
      if (ent.key == "all") {
        for (const ExampleRow& row : catalog_rows())
          for (const auto& [n, s] : standard_cases(row)) cases.push_back({&row, n, s});
      } else {
        const ExampleRow& row = find_row(ent.key);
        const double s = ent.num("s", 0.0);
        const auto n0 = smallest_n(row, s);
        if (!ent.has("n") && !n0) throw std::invalid_argument("no valid n for " + ent.key);
        cases.push_back({&row, ent.has("n") ? ent.integer("n", 0) : *n0, s});
      }
      std::size_t bad = 0;
      double worst = kInf;
      for (std::size_t c = 0; c < cases.size(); ++c)
        for (std::size_t d = 0; d < deltas.size(); ++d) {
          const ExampleInstance inst(*cases[c].row, cases[c].n, cases[c].s, deltas[d], run.seed(100 + e, c));
          opt.seed = run.seed(200 + e, c, d);
          const InclusionResult r = verify_inclusion(inst, opt);
          const bool pass = r.min_ratio >= threshold;
          bad += !pass;
          worst = std::min(worst, r.min_ratio);
          w.row(run.id(), cases[c].row->key(), cases[c].n, cases[c].s, deltas[d], r.z_count, r.min_ratio, r.mean_ratio,
                r.max_ratio, threshold, pass);
          out.flush();
        }
      run.check("lowerbound/inclusion " + ent.key, bad == 0,
                std::to_string(cases.size() * deltas.size()) + " cases, min ratio " + fmt(worst) + " (need >= " +
                    fmt(threshold) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// counting

struct CountingConfig {
  std::vector<std::string> parts{"count", "weighted", "2sph", "2sph_cube", "3sph", "4sph"};
  std::vector<std::string> count_sets{"point", "circle", "cantor s=1/2"};
  std::string count_delta = "2^-6";
  std::int64_t count_balls = 200;
  double count_max = 16.0;
  std::vector<double> weighted_alpha{0.0, -1.0, -2.0};
  std::string weighted_delta = "2^-6";
  int weighted_families = 10;
  double weighted_max = 8.0;
  std::string ladder = "2^-5..2^-8";
  std::string ladder3 = "2^-4..2^-6";
  std::string ladder4 = "2^-3..2^-4:0.5";
  std::string ksph_mode = "analytic";
  int ksph_indices = 8;
  std::int64_t tuple_budget = 2'000'000;
  std::int64_t mc_samples = 256;
  double c_diam = 0.5;
  double triple_sep = 1.0;
  double drift_max = 4.0;
  double saturation_band = 16.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CountingConfig, parts, count_sets, count_delta, count_balls, count_max,
                                   weighted_alpha, weighted_delta, weighted_families, weighted_max, ladder, ladder3,
                                   ladder4, ksph_mode, ksph_indices, tuple_budget, mc_samples, c_diam, triple_sep,
                                   drift_max, saturation_band)

struct KSphSeries {
  std::vector<double> deltas, ratios;
};

KSphSeries ksph_series(Run& run, CsvWriter& w, std::ostream& out, const CountingConfig& cfg, const char* lemma,
                       Layout layout, int n, int k, const std::vector<double>& ladder, std::uint64_t tag) {
  KSphOptions opt;
  opt.tuple_budget = cfg.tuple_budget;
  opt.mc_samples = cfg.mc_samples;
  opt.c_diam = cfg.c_diam;
  opt.triple_sep = cfg.triple_sep;
  const VolumeMode mode = parse_volume_mode(cfg.ksph_mode);
  KSphSeries res;
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    FamilySpec spec;
    spec.layout = layout;
    spec.c_diam = cfg.c_diam;
    const SphereFamily f = generate_family(n, ladder[r], spec, run.seed(tag, r));
    const auto idx = sample_indices(f, static_cast<std::size_t>(cfg.ksph_indices), run.seed(tag, r, 1));
    double sum = 0.0, rhs = 0.0;
    std::int64_t tuples = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      opt.seed = run.seed(tag, r, 2 + j);
      const KSphResult kr = ksph_sum(f, idx[j], k, mode, opt);
      sum += kr.ratio;
      rhs = kr.rhs;
      tuples += kr.tuples;
    }
    const double mean = sum / static_cast<double>(idx.size());
    res.deltas.push_back(ladder[r]);
    res.ratios.push_back(mean);
    w.row(run.id(), lemma, std::string(to_string(layout)) + " " + to_string(mode), n, ladder[r], f.size(), tuples, rhs, mean);
    out.flush();
  }
  return res;
}

void run_counting(Run& run, const CountingConfig& cfg) {
  auto& out = run.csv("counting.csv");
  CsvWriter w(out, {"id", "lemma", "configuration", "n", "delta", "family_size", "terms", "rhs", "ratio"});

  if (wants(cfg.parts, "count")) {
    const double delta = parse_number(cfg.count_delta);
    const int n = 2;
    for (std::size_t c = 0; c < cfg.count_sets.size(); ++c) {
      const Entry ent = parse_entry(cfg.count_sets[c]);
      std::shared_ptr<const TranslateSet> T;
      double s = 0.0;
      if (ent.key == "point") {
        T = std::make_shared<TranslateSet>(n, 0.0);
      } else if (ent.key == "circle") {
        s = n - 1.0;
      } else if (ent.key == "cantor") {
        s = ent.num("s", 0.5);
        T = std::make_shared<TranslateSet>(TranslateSet::for_delta(n, s, delta));
      } else {
        throw std::invalid_argument("unknown count set: " + ent.key);
      }
      const SphereFamily f = generate_family(n, delta, T, RadiusMode::unit, run.seed(1, c));
      const CountResult r = count_in_balls(f, s, dyadic_ladder(delta, 0.5), cfg.count_balls, run.seed(2, c));
      w.row(run.id(), "count", cfg.count_sets[c], n, delta, f.size(), cfg.count_balls, std::pow(delta, -n), r.max_ratio);
      out.flush();
      run.check("counting/count " + cfg.count_sets[c], r.max_ratio <= cfg.count_max,
                "max ratio " + fmt(r.max_ratio) + " (need <= " + fmt(cfg.count_max) + ")");
    }
  }

  if (wants(cfg.parts, "weighted")) {
    const double delta = parse_number(cfg.weighted_delta);
    const int n = 2;
    for (std::size_t a = 0; a < cfg.weighted_alpha.size(); ++a) {
      const double alpha = cfg.weighted_alpha[a];
      const double P = alpha > -1.0 ? 0.0 : (alpha == -1.0 ? delta : std::sqrt(delta));
      const double Q = 0.5;
      double worst = 0.0;
      for (int k = 0; k < cfg.weighted_families; ++k) {
        const SphereFamily f = generate_family(n, delta, nullptr, RadiusMode::unit, run.seed(3, a, k));
        Rng rng(run.seed(4, a, k), 0);
        const Vec center{rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)};
        const SumRatio r = weighted_count_sum(f, center, alpha, P, Q);
        w.row(run.id(), "weighted", "alpha=" + fmt(alpha) + " P=" + fmt(P) + " Q=" + fmt(Q), n, delta, f.size(), r.terms,
              r.rhs, r.ratio);
        worst = std::max(worst, r.ratio);
      }
      out.flush();
      run.check("counting/weighted alpha=" + fmt(alpha), worst <= cfg.weighted_max,
                "max ratio " + fmt(worst) + " over " + std::to_string(cfg.weighted_families) + " families (need <= " +
                    fmt(cfg.weighted_max) + ")");
    }
  }

  auto two_sphere = [&](const char* lemma, Layout layout, std::uint64_t tag) {
    const auto s = ksph_series(run, w, out, cfg, lemma, layout, 2, 2, parse_ladder(cfg.ladder), tag);
    const auto [lo, hi] = std::minmax_element(s.ratios.begin(), s.ratios.end());
    const double drift = *lo > 0.0 ? *hi / *lo : kInf;
    run.check(std::string("counting/") + lemma, drift <= cfg.drift_max,
              "ratio drift x" + fmt(drift) + " (need <= " + fmt(cfg.drift_max) + ")");
  };
  if (wants(cfg.parts, "2sph")) two_sphere("2sph", Layout::shell_anchored, 5);
  if (wants(cfg.parts, "2sph_cube")) two_sphere("2sph_cube", Layout::cube_pinned, 8);

  // Calibrated at the coarsest rung; every rung must stay within the band around it.
  auto saturation = [&](const char* lemma, Layout layout, int n, int k, const std::string& ladder, std::uint64_t tag) {
    const auto s = ksph_series(run, w, out, cfg, lemma, layout, n, k, parse_ladder(ladder), tag);
    const double calib = s.ratios.front();
    double lo = kInf, hi = 0.0;
    for (double r : s.ratios) lo = std::min(lo, r / calib), hi = std::max(hi, r / calib);
    const bool pass = calib > 0.0 && lo >= 1.0 / cfg.saturation_band && hi <= cfg.saturation_band;
    run.check(std::string("counting/") + lemma, pass,
              "calibrated ratios in [" + fmt(lo) + ", " + fmt(hi) + "] (band x" + fmt(cfg.saturation_band) + ", C=" +
                  fmt(calib) + ")");
  };
  if (wants(cfg.parts, "3sph")) saturation("3sph", Layout::circle_arc, 3, 3, cfg.ladder3, 6);
  if (wants(cfg.parts, "4sph")) saturation("4sph", Layout::lenz_arc, 4, 4, cfg.ladder4, 7);
}

// ---------------------------------------------------------------------------
// volume

struct VolumeConfig {
  std::vector<std::string> parts{"pairs", "triples"};
  std::vector<int> pair_n{2, 3, 4};
  std::vector<double> pair_constant{50.0, 50.0, 100.0};
  int pairs = 1000;
  double pair_delta = 0.01;
  double pair_max_separation = 0.5;
  double radius_spread = 0.0;
  std::int64_t mc_samples = 20'000;
  std::vector<std::string> triple_cases{"empty", "near_one", "transverse"};
  int triples = 100;
  double triple_delta = 1e-3;
  double triple_sep = 1.0;
  double triple_constant = 100.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VolumeConfig, parts, pair_n, pair_constant, pairs, pair_delta, pair_max_separation,
                                   radius_spread, mc_samples, triple_cases, triples, triple_delta, triple_sep,
                                   triple_constant)

// Three unit spheres in R^3 with centers on a circle of the given radius in a random plane.
std::vector<Sphere> triple_on_circle(double R, double gap_lo, double gap_hi, Rng& rng) {
  const Vec u = random_direction(3, rng);
  Vec v = random_direction(3, rng);
  v = v - u * dot(u, v);
  v = v * (1.0 / v.norm());
  const Vec origin{rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25)};
  const double t0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double t1 = t0 + rng.uniform(gap_lo, gap_hi);
  const double t2 = t1 + rng.uniform(gap_lo, gap_hi);
  std::vector<Sphere> s;
  for (double t : {t0, t1, t2}) s.emplace_back(origin + u * (R * std::cos(t)) + v * (R * std::sin(t)), 1.0);
  return s;
}

void run_volume(Run& run, const VolumeConfig& cfg) {
  if (wants(cfg.parts, "pairs")) {
    if (cfg.pair_constant.size() != cfg.pair_n.size()) throw std::invalid_argument("pair_constant needs one entry per pair_n");
    auto& out = run.csv("pairs.csv");
    CsvWriter w(out, {"id", "n", "index", "r1", "r2", "center_distance", "d", "Delta", "bound", "mc_volume", "std_err", "ratio", "pass"});
    const double delta = cfg.pair_delta;
    for (std::size_t k = 0; k < cfg.pair_n.size(); ++k) {
      const int n = cfg.pair_n[k];
      const double C = cfg.pair_constant[k];
      std::vector<std::vector<Sphere>> pairs(static_cast<std::size_t>(cfg.pairs));
      for (int i = 0; i < cfg.pairs; ++i) {
        Rng rng(run.seed(10, n), static_cast<std::uint64_t>(i));
        const double r1 = 1.0 + rng.uniform(-cfg.radius_spread, cfg.radius_spread);
        const double r2 = 1.0 + rng.uniform(-cfg.radius_spread, cfg.radius_spread);
        const double sep = rng.uniform(0.0, cfg.pair_max_separation);
        pairs[i] = {Sphere(Vec::zeros(n), r1), Sphere(random_direction(n, rng) * sep, r2)};
      }
      std::size_t bad = 0;
      double worst = 0.0;
      for (int i = 0; i < cfg.pairs; ++i) {
        const Sphere &a = pairs[i][0], &b = pairs[i][1];
        const PairGeometry g = pair_quantities(a, b);
        const double bound = two_annuli_bound(a, b, delta, n);
        const MCEstimate est = mc_intersection_volume(pairs[i], delta, cfg.mc_samples, run.seed(11, n, i));
        const double ratio = est.value / bound;
        const bool pass = est.value <= C * bound;
        bad += !pass;
        worst = std::max(worst, ratio);
        w.row(run.id(), n, i, a.radius, b.radius, dist(a.center, b.center), g.d, g.Delta, bound, est.value, est.std_err,
              ratio, pass);
      }
      out.flush();
      run.check("volume/pairs n=" + std::to_string(n), bad == 0,
                std::to_string(cfg.pairs) + " pairs, max mc/bound " + fmt(worst) + " (C=" + fmt(C) + ")");
    }
  }

  if (wants(cfg.parts, "triples")) {
    auto& out = run.csv("triples.csv");
    CsvWriter w(out, {"id", "case", "index", "R", "M", "m", "bound_case", "bound", "mc_volume", "std_err", "ratio", "pass"});
    const double delta = cfg.triple_delta;
    const double min_sep = cfg.triple_sep * std::sqrt(delta);
    for (std::size_t c = 0; c < cfg.triple_cases.size(); ++c) {
      const std::string& kase = cfg.triple_cases[c];
      double R_lo, R_hi, gap_lo, gap_hi;
      if (kase == "empty") R_lo = 2.0, R_hi = 4.0, gap_lo = 0.02, gap_hi = 0.2;
      else if (kase == "near_one") R_lo = 0.55, R_hi = 1.95, gap_lo = 0.05, gap_hi = 0.6;
      else if (kase == "transverse") R_lo = 0.1, R_hi = 0.5, gap_lo = 0.4, gap_hi = 2.0;
      else throw std::invalid_argument("unknown triple case: " + kase);
      std::size_t bad = 0;
      double worst = 0.0;
      int made = 0;
      for (std::uint64_t attempt = 0; made < cfg.triples; ++attempt) {
        if (attempt > 100u * static_cast<std::uint64_t>(cfg.triples)) throw std::runtime_error("cannot sample triples for " + kase);
        Rng rng(run.seed(20, c), attempt);
        const auto s = triple_on_circle(rng.uniform(R_lo, R_hi), gap_lo, gap_hi, rng);
        const TripleGeometry g = triple_quantities(s[0], s[1], s[2]);
        const ThreeAnnuliBound b = three_annuli_bound_from(g, delta, 3);
        if (g.m < min_sep || to_string(b.kase) != kase) continue;
        const MCEstimate est = mc_intersection_volume(s, delta, cfg.mc_samples, run.seed(21, c, attempt));
        bool pass;
        double ratio;
        if (b.kase == ThreeCase::empty) {
          ratio = 0.0;
          pass = est.value == 0.0;
        } else {
          ratio = est.value / b.value;
          pass = est.value <= cfg.triple_constant * b.value;
        }
        bad += !pass;
        worst = std::max(worst, ratio);
        w.row(run.id(), kase, made, g.R, g.M, g.m, to_string(b.kase), b.value, est.value, est.std_err, ratio, pass);
        ++made;
      }
      out.flush();
      const std::string detail = kase == "empty" ? std::to_string(bad) + " of " + std::to_string(made) + " triples with hits"
                                                 : std::to_string(made) + " triples, max mc/bound " + fmt(worst) +
                                                       " (C=" + fmt(cfg.triple_constant) + ")";
      run.check("volume/triples " + kase, bad == 0, detail);
    }
  }
}

// ---------------------------------------------------------------------------
// dualnorm

struct DualnormConfig {
  std::string ladder = "2^-5..2^-8";
  double c_diam = 0.5;
  std::int64_t samples = 20'000;
  std::int64_t balls = 256;
  double A_band = 4.0;
  double drift_max = 4.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DualnormConfig, ladder, c_diam, samples, balls, A_band, drift_max)

// || sum_i 1_{S_i^delta} ||_{3/2} against A^{1/3} (delta N)^{2/3} for circle families in the plane.
void run_dualnorm(Run& run, const DualnormConfig& cfg) {
  const std::vector<double> ladder = parse_ladder(cfg.ladder);
  auto& out = run.csv("dualnorm.csv");
  CsvWriter w(out, {"id", "n", "delta", "family_size", "A", "A_delta", "norm", "std_err", "rhs", "ratio", "calibrated"});
  std::vector<double> ratios;
  double a_lo = kInf, a_hi = 0.0;
  const int n = 2;
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    const double delta = ladder[r];
    FamilySpec spec;
    spec.layout = Layout::center_grid;
    spec.c_diam = cfg.c_diam;
    const SphereFamily f = generate_family(n, delta, spec, run.seed(1, r));
    const double A = nonconcentration_constant(f, dyadic_ladder(delta, 0.5), cfg.balls, run.seed(2, r)).max_ratio;
    const MCEstimate est = dual_sum_norm(f, WeightVector::uniform(f.size(), 3.0), 1.5, annuli_bbox(f), cfg.samples, run.seed(3, r));
    const double rhs = std::cbrt(A) * std::pow(delta * static_cast<double>(f.size()), 2.0 / 3.0);
    ratios.push_back(est.value / rhs);
    a_lo = std::min(a_lo, A * delta);
    a_hi = std::max(a_hi, A * delta);
    w.row(run.id(), n, delta, f.size(), A, A * delta, est.value, est.std_err, rhs, ratios.back(), ratios.back() / ratios.front());
    out.flush();
  }
  run.check("dualnorm/nonconcentration", a_lo >= 1.0 / cfg.A_band && a_hi <= cfg.A_band,
            "A*delta in [" + fmt(a_lo) + ", " + fmt(a_hi) + "] (band x" + fmt(cfg.A_band) + ")");
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double drift = *lo > 0.0 ? *hi / *lo : kInf;
  run.check("dualnorm/drift", drift <= cfg.drift_max,
            "ratio drift x" + fmt(drift) + " (need <= " + fmt(cfg.drift_max) + ", C=" + fmt(ratios.front()) + ")");
}

// ---------------------------------------------------------------------------
// netdump

struct NetdumpConfig {
  std::vector<std::string> parts{"covering", "minkowski", "nets"};
  int covering_max_k = 6;
  std::vector<double> minkowski_s{0.5, 1.0, 1.5};
  int minkowski_n = 3;
  std::string ladder = "2^-3..2^-9";
  double minkowski_band = 4.0;
  std::vector<std::string> nets{"sphere n=2 delta=2^-5", "sphere n=3 delta=0.1", "cantor n=3 s=1/2 delta=2^-6",
                                "cantor n=3 s=1 delta=2^-6", "cantor n=3 s=3/2 delta=2^-6", "box n=3 delta=1/8"};
  std::int64_t probes = 100'000;
  bool dump_points = true;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NetdumpConfig, parts, covering_max_k, minkowski_s, minkowski_n, ladder,
                                   minkowski_band, nets, probes, dump_points)

void run_netdump(Run& run, const NetdumpConfig& cfg) {
  if (wants(cfg.parts, "covering")) {
    const TranslateSet c(1, 0.5, 2 * cfg.covering_max_k);
    CsvWriter w(run.csv("covering.csv"), {"id", "set", "k", "delta", "covering_number", "expected", "pass"});
    std::size_t bad = 0;
    for (int k = 1; k <= cfg.covering_max_k; ++k) {
      const std::uint64_t got = c.covering_number(std::pow(4.0, -k));
      const std::uint64_t want = std::uint64_t{1} << k;
      bad += got != want;
      w.row(run.id(), "C_1/2", k, std::pow(4.0, -k), got, want, got == want);
    }
    run.check("netdump/covering", bad == 0, std::to_string(bad) + " mismatches for k=1.." + std::to_string(cfg.covering_max_k));
    write_cells_csv(run.csv("cells.csv"), run.id(), TranslateSet(2, 0.5, 2 * cfg.covering_max_k), 3);
  }

  if (wants(cfg.parts, "minkowski")) {
    const std::vector<double> ladder = parse_ladder(cfg.ladder);
    CsvWriter w(run.csv("minkowski.csv"), {"id", "n", "s", "delta", "covering_number", "constant", "pass"});
    double lo = kInf, hi = 0.0;
    for (double s : cfg.minkowski_s) {
      const TranslateSet t(cfg.minkowski_n, s, 40);
      for (double d : ladder) {
        const double v = minkowski_constant(t, {d});
        const bool pass = v >= 1.0 / cfg.minkowski_band && v <= cfg.minkowski_band;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        w.row(run.id(), cfg.minkowski_n, s, d, t.covering_number(d), v, pass);
      }
    }
    run.check("netdump/minkowski", lo >= 1.0 / cfg.minkowski_band && hi <= cfg.minkowski_band,
              "constants in [" + fmt(lo) + ", " + fmt(hi) + "] (band x" + fmt(cfg.minkowski_band) + ")");
  }

  if (wants(cfg.parts, "nets")) {
    CsvWriter w(run.csv("nets.csv"), {"id", "net", "n", "delta", "points", "separation_violations", "coverage_violations", "pass"});
    for (std::size_t k = 0; k < cfg.nets.size(); ++k) {
      const Entry ent = parse_entry(cfg.nets[k]);
      const int n = ent.integer("n", 2);
      const double delta = ent.num("delta", 0.1);
      std::vector<Vec> pts;
      std::function<Vec(Rng&)> sample;
      NetMetric metric = NetMetric::euclidean;
      std::shared_ptr<TranslateSet> T;
      Vec ones(n);
      for (int i = 0; i < n; ++i) ones[i] = 1.0;
      const Box cube(Vec::zeros(n), ones);
      if (ent.key == "sphere") {
        pts = sphere_net(n, delta, run.seed(30, k));
        sample = [n](Rng& r) { return random_direction(n, r); };
        metric = NetMetric::geodesic;
      } else if (ent.key == "cantor") {
        T = std::make_shared<TranslateSet>(n, ent.num("s", 0.5), 40);
        pts = translate_net(*T, delta, run.seed(30, k));
        sample = [T](Rng& r) { return T->random_point(r); };
      } else if (ent.key == "box") {
        pts = box_net(cube, delta, run.seed(30, k));
        sample = [cube](Rng& r) { return cube.sample(r); };
      } else {
        throw std::invalid_argument("unknown net: " + ent.key);
      }
      const std::size_t sep = separation_violations(pts, delta, metric);
      const std::size_t cov = coverage_violations(pts, sample, cfg.probes, run.seed(31, k), delta, metric);
      const bool pass = sep == 0 && cov == 0;
      w.row(run.id(), cfg.nets[k], n, delta, pts.size(), sep, cov, pass);
      if (cfg.dump_points) write_points_csv(run.csv("net_" + std::to_string(k) + ".csv"), run.id(), pts);
      run.check("netdump/net " + cfg.nets[k], pass,
                std::to_string(pts.size()) + " points, " + std::to_string(sep) + " close pairs, " + std::to_string(cov) +
                    " uncovered probes");
    }
  }
}

// ---------------------------------------------------------------------------
// Option registration

template <class T>
void opt(CLI::App* app, const std::string& name, T& field, const std::string& help) {
  app->add_option("--" + name, field, help)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded experiments for spherical and Nikodym maximal operators"};
  app.set_version_flag("--version", std::string(NIKODYM_VERSION));
  app.fallthrough();
  app.set_config("--config", "", "INI file with one section per subcommand");
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int nthreads = 1;
  std::string out_dir = "runs";
  std::string id_override;
  app.add_option("--seed", seed, "Base seed")->capture_default_str();
  app.add_option("--threads", nthreads, "Worker threads")->capture_default_str();
  app.add_option("--out", out_dir, "Output root; each run writes <out>/<id>/")->capture_default_str();
  app.add_option("--id", id_override, "Override the derived experiment id");

  ExponentsConfig ex;
  auto* exc = app.add_subcommand("exponents", "Region boundaries, point checks, consistency and sharpness");
  opt(exc, "parts", ex.parts, "Any of region, points, consistency, sharpness");
  opt(exc, "region_n", ex.region_n, "Dimensions for region boundary data");
  opt(exc, "region_step", ex.region_step, "Grid step in s for region data");
  opt(exc, "scan_n", ex.scan_n, "Dimensions for the consistency scan");
  opt(exc, "scan_step", ex.scan_step, "Grid step in s for the consistency scan");
  opt(exc, "sharp_n", ex.sharp_n, "Dimensions for the sharpness check");
  opt(exc, "sharp_points", ex.sharp_points, "Finite p values in the sharpness grid");
  opt(exc, "p_max", ex.p_max, "Largest finite p in the sharpness grid");

  LowerboundConfig lb;
  auto* lbc = app.add_subcommand("lowerbound", "Witnessed lower-bound ratios and inclusion checks");
  opt(lbc, "parts", lb.parts, "Any of slopes, inclusion");
  opt(lbc, "ladder", lb.ladder, "Scales for the slope fits");
  opt(lbc, "experiment", lb.experiment, "Entries 'TABLE/row n=.. s=.. p=a,b tol=..'");
  opt(lbc, "x_samples", lb.x_samples, "Evaluation points per ratio");
  opt(lbc, "norm_samples", lb.norm_samples, "Samples for the input norm");
  opt(lbc, "avg_samples", lb.avg_samples, "Samples per average");
  opt(lbc, "inclusion", lb.inclusion, "Entries 'all min=..' or 'TABLE/row n=.. s=.. min=..'");
  opt(lbc, "inclusion_ladder", lb.inclusion_ladder, "Scales for inclusion checks");
  opt(lbc, "z_samples", lb.z_samples, "Centers per inclusion check");
  opt(lbc, "pool", lb.pool, "Points of the thickened set per inclusion check");
  opt(lbc, "sphere_samples", lb.sphere_samples, "Directions per sphere for surface measures");

  CountingConfig co;
  auto* coc = app.add_subcommand("counting", "Counting and k-sphere sum inequalities");
  opt(coc, "parts", co.parts, "Any of count, weighted, 2sph, 2sph_cube, 3sph, 4sph");
  opt(coc, "count_sets", co.count_sets, "Translate sets: point, circle, 'cantor s=..'");
  opt(coc, "count_delta", co.count_delta, "Scale for ball counts");
  opt(coc, "count_balls", co.count_balls, "Sampled balls per rung");
  opt(coc, "count_max", co.count_max, "Bound on ball-count ratios");
  opt(coc, "weighted_alpha", co.weighted_alpha, "Weight exponents");
  opt(coc, "weighted_delta", co.weighted_delta, "Scale for weighted counts");
  opt(coc, "weighted_families", co.weighted_families, "Families per exponent");
  opt(coc, "weighted_max", co.weighted_max, "Bound on weighted ratios");
  opt(coc, "ladder", co.ladder, "Scales for two-sphere sums");
  opt(coc, "ladder3", co.ladder3, "Scales for three-sphere sums");
  opt(coc, "ladder4", co.ladder4, "Scales for four-sphere sums");
  opt(coc, "ksph_mode", co.ksph_mode, "analytic or mc");
  opt(coc, "ksph_indices", co.ksph_indices, "Base spheres per rung");
  opt(coc, "tuple_budget", co.tuple_budget, "Tuples per sum before subsampling");
  opt(coc, "mc_samples", co.mc_samples, "Monte Carlo samples per tuple");
  opt(coc, "c_diam", co.c_diam, "Center set diameter");
  opt(coc, "triple_sep", co.triple_sep, "Separation (in sqrt delta) for the three-annuli formula");
  opt(coc, "drift_max", co.drift_max, "Allowed two-sphere ratio drift");
  opt(coc, "saturation_band", co.saturation_band, "Allowed factor around the calibrated ratio");

  VolumeConfig vo;
  auto* voc = app.add_subcommand("volume", "Annulus intersection volumes against analytic bounds");
  opt(voc, "parts", vo.parts, "Any of pairs, triples");
  opt(voc, "pair_n", vo.pair_n, "Dimensions for pairs");
  opt(voc, "pair_constant", vo.pair_constant, "Volume constant per dimension");
  opt(voc, "pairs", vo.pairs, "Pairs per dimension");
  opt(voc, "pair_delta", vo.pair_delta, "Annulus half-width for pairs");
  opt(voc, "pair_max_separation", vo.pair_max_separation, "Largest center distance for pairs");
  opt(voc, "radius_spread", vo.radius_spread, "Radii drawn from [1-spread, 1+spread]");
  opt(voc, "mc_samples", vo.mc_samples, "Monte Carlo samples per configuration");
  opt(voc, "triple_cases", vo.triple_cases, "Any of empty, near_one, transverse");
  opt(voc, "triples", vo.triples, "Triples per case");
  opt(voc, "triple_delta", vo.triple_delta, "Annulus half-width for triples");
  opt(voc, "triple_sep", vo.triple_sep, "Minimal side length in units of sqrt delta");
  opt(voc, "triple_constant", vo.triple_constant, "Volume constant for triples");

  DualnormConfig du;
  auto* duc = app.add_subcommand("dualnorm", "Dual-norm inequality on circle families");
  opt(duc, "ladder", du.ladder, "Scales");
  opt(duc, "c_diam", du.c_diam, "Center set size");
  opt(duc, "samples", du.samples, "Monte Carlo samples per norm");
  opt(duc, "balls", du.balls, "Sampled balls for the nonconcentration constant");
  opt(duc, "A_band", du.A_band, "Allowed factor for A delta around 1");
  opt(duc, "drift_max", du.drift_max, "Allowed ratio drift");

  NetdumpConfig ne;
  auto* nec = app.add_subcommand("netdump", "Covering numbers, Minkowski constants and delta-nets");
  opt(nec, "parts", ne.parts, "Any of covering, minkowski, nets");
  opt(nec, "covering_max_k", ne.covering_max_k, "Largest k for covering numbers at 4^-k");
  opt(nec, "minkowski_s", ne.minkowski_s, "Dimensions of the Cantor sets");
  opt(nec, "minkowski_n", ne.minkowski_n, "Ambient dimension of the Cantor sets");
  opt(nec, "ladder", ne.ladder, "Scales for Minkowski constants");
  opt(nec, "minkowski_band", ne.minkowski_band, "Allowed factor around 1");
  opt(nec, "nets", ne.nets, "Entries 'sphere n=..', 'cantor n=.. s=..', 'box n=..' with delta=..");
  opt(nec, "probes", ne.probes, "Random probes for maximality");
  opt(nec, "dump_points", ne.dump_points, "Write the net points");

  CLI11_PARSE(app, argc, argv);

  set_threads(nthreads);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::string sub;
    json cfg;
    std::function<void(Run&)> body;
    if (exc->parsed()) sub = "exponents", cfg = ex, body = [&](Run& r) { run_exponents(r, ex); };
    if (lbc->parsed()) sub = "lowerbound", cfg = lb, body = [&](Run& r) { run_lowerbound(r, lb); };
    if (coc->parsed()) sub = "counting", cfg = co, body = [&](Run& r) { run_counting(r, co); };
    if (voc->parsed()) sub = "volume", cfg = vo, body = [&](Run& r) { run_volume(r, vo); };
    if (duc->parsed()) sub = "dualnorm", cfg = du, body = [&](Run& r) { run_dualnorm(r, du); };
    if (nec->parsed()) sub = "netdump", cfg = ne, body = [&](Run& r) { run_netdump(r, ne); };
    Run run(sub, cfg, seed, out_dir, id_override);
    body(run);
    run.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return run.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}

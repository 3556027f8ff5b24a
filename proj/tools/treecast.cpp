#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "treecast/defaults.hpp"
#include "treecast/family.hpp"
#include "treecast/io.hpp"
#include "treecast/treecast.hpp"

#ifndef TREECAST_VERSION
#define TREECAST_VERSION "0.0.0"
#endif

using namespace treecast;
using io::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kInconsistent = 3, kDegenerate = 4, kNoSignChange = 5 };

// Raised for bad flags or bad input files; always exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, family;
  std::string scheme = "all";
  std::string chain = "beta";
  std::string format = "json";
  int depth = defaults::kDepth;
  int reps = -1;  // command-specific default
  int particles = defaults::kParticles;
  int n = defaults::kSteps;
  int threads = defaults::kThreads;
  int frontier_cap = defaults::kFrontierCap;
  int budget = defaults::kBudget;
  long long sim_budget = defaults::kSimBudget;
  double tol = defaults::kTol;
  std::optional<std::uint64_t> seed;
  bool timing = false;
};

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("TREECAST_SEED")) {
    const std::string s = env;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || s.front() == '-') throw UsageError("TREECAST_SEED is not an unsigned 64-bit integer: \"" + s + "\"");
    return v;
  }
  return defaults::kSeed;
}

json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (const auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw UsageError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

json manifest(const std::string& command, const json& input, std::uint64_t seed) {
  return json{{"command", command}, {"config_digest", hex64(fnv1a64(input.dump()))}, {"seed", seed}, {"versions", "treecast " TREECAST_VERSION}};
}

void add_wall_time(json& m, std::chrono::steady_clock::time_point start, bool timing) {
  if (!timing) return;
  m["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<Scheme> parse_schemes(const std::string& s) {
  if (s == "all") return {Scheme::Augmented, Scheme::Complete, Scheme::Boundary};
  if (s == "augmented") return {Scheme::Augmented};
  if (s == "complete") return {Scheme::Complete};
  if (s == "boundary") return {Scheme::Boundary};
  throw UsageError("--scheme must be augmented, complete, boundary or all");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

SplittingOptions splitting_options(const Options& o, std::uint64_t seed) {
  const int reps = o.reps < 0 ? defaults::kReps : o.reps;
  require(o.n >= defaults::kMinSteps, "--n must be >= " + std::to_string(defaults::kMinSteps));
  require(o.particles >= defaults::kMinParticles, "--particles must be >= " + std::to_string(defaults::kMinParticles));
  require(reps >= defaults::kMinReps, "--reps must be >= " + std::to_string(defaults::kMinReps));
  require(o.threads >= 1, "--threads must be >= 1");
  return SplittingOptions{.n = o.n, .particles = o.particles, .reps = reps, .seed = seed, .threads = o.threads};
}

std::string splitting_flags(const SplittingOptions& s) {
  return " --n " + std::to_string(s.n) + " --particles " + std::to_string(s.particles) + " --reps " + std::to_string(s.reps);
}

ModelConfig load_model(const Options& o, json& raw) {
  require(!o.config.empty(), "--config is required");
  raw = load_json(o.config);
  return io::model_from_json(raw);
}

// ---------------------------------------------------------------------------

int cmd_check(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(o);
  const std::vector<Scheme> schemes = parse_schemes(o.scheme);
  const SplittingOptions sopt = splitting_options(o, seed);
  json raw;
  const ModelConfig cfg = load_model(o, raw);
  const auto verdicts = scheme_report(cfg, sopt, schemes);
  json list = json::array();
  bool inconsistent = false;
  for (const SchemeVerdict& sv : verdicts) {
    list.push_back(io::to_json(sv));
    inconsistent |= sv.inconsistent;
  }
  if (inconsistent) {
    for (const SchemeVerdict& sv : verdicts)
      if (sv.inconsistent) std::cerr << "treecast check: " << to_string(sv.scheme) << ": " << *sv.error << "\n";
    return kInconsistent;
  }
  json m = manifest("check --scheme " + o.scheme + splitting_flags(sopt), raw, seed);
  add_wall_time(m, start, o.timing);
  json report{{"manifest", m}, {"config", io::to_json(cfg)}, {"degenerate", cfg.degenerate_warning()}, {"verdicts", list}};
  out << report.dump(2) << "\n";
  return kOk;
}

int cmd_estimate(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(o);
  require(o.chain == "beta" || o.chain == "gamma", "--chain must be beta (complete routing) or gamma (boundary routing)");
  const Chain chain = o.chain == "beta" ? Chain::W : Chain::U;
  const SplittingOptions sopt = splitting_options(o, seed);
  json raw;
  const ModelConfig cfg = load_model(o, raw);
  const DecayEstimate est = decay_rate(cfg, chain, sopt);
  json m = manifest("estimate --chain " + o.chain + splitting_flags(sopt), raw, seed);
  add_wall_time(m, start, o.timing);
  json report{{"manifest", m}, {"config", io::to_json(cfg)}, {"log_m", cfg.log_m()}, {"estimate", io::to_json(est)}};
  out << report.dump(2) << "\n";
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(o);
  const int reps = o.reps < 0 ? defaults::kReps : o.reps;
  require(o.depth >= 1, "--depth must be >= 1");
  require(reps >= 1, "--reps must be >= 1");
  require(o.frontier_cap >= 1, "--frontier-cap must be >= 1");
  require(o.threads >= 1, "--threads must be >= 1");
  require(o.sim_budget >= 1, "--budget must be >= 1");
  require(static_cast<long long>(o.depth) * reps <= o.sim_budget,
          "depth * reps = " + std::to_string(static_cast<long long>(o.depth) * reps) + " exceeds --budget " + std::to_string(o.sim_budget));
  require(o.format == "json" || o.format == "csv", "--format must be json or csv");
  json raw;
  const ModelConfig cfg = load_model(o, raw);

  const bool csv = o.format == "csv";
  if (csv) out << "rep,level,aug,comp,bond\n";
  std::array<int, 3> survived{};
  int truncated = 0;
  std::uint64_t violations = 0;
  const int threads = std::min(o.threads, reps);
  std::vector<TreeRunReport> batch(static_cast<std::size_t>(threads));
  // Reps run in batches of `threads`; each batch is printed in rep order.
  for (int base = 0; base < reps; base += threads) {
    const int count = std::min(threads, reps - base);
    auto run = [&](int i) {
      batch[i] = run_coupled(cfg, o.depth, derive_key(seed, {static_cast<std::uint64_t>(base + i)}), o.frontier_cap);
    };
    if (count == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (int i = 0; i < count; ++i) pool.emplace_back(run, i);
    }
    for (int i = 0; i < count; ++i) {
      const TreeRunReport& r = batch[i];
      for (Scheme s : {Scheme::Augmented, Scheme::Complete, Scheme::Boundary}) survived[static_cast<int>(s)] += r.survived(s);
      truncated += r.truncated;
      violations += r.hierarchy_violations;
      if (csv) {
        std::istringstream rows(io::to_csv_rows(r));
        for (std::string line; std::getline(rows, line);) out << base + i << "," << line << "\n";
      } else {
        json j{{"type", "run"}, {"rep", base + i}};
        j.update(io::to_json(r));
        out << j.dump() << "\n";
      }
    }
  }
  auto freq = [&](Scheme s) { return static_cast<double>(survived[static_cast<int>(s)]) / reps; };
  json m = manifest("simulate --depth " + std::to_string(o.depth) + " --reps " + std::to_string(reps) + " --frontier-cap " +
                        std::to_string(o.frontier_cap) + " --format " + o.format,
                    raw, seed);
  add_wall_time(m, start, o.timing);
  json summary{{"type", "summary"},
               {"reps", reps},
               {"depth", o.depth},
               {"survival_frequency",
                {{"aug", freq(Scheme::Augmented)}, {"comp", freq(Scheme::Complete)}, {"bond", freq(Scheme::Boundary)}}},
               {"truncated_runs", truncated},
               {"hierarchy_violations", violations},
               {"manifest", m}};
  out << (csv ? "# " : "") << summary.dump() << "\n";
  return kOk;
}

int cmd_threshold(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(o);
  require(!o.family.empty(), "--family is required");
  const std::vector<Scheme> schemes = parse_schemes(o.scheme);
  require(schemes.size() == 1, "threshold needs a single --scheme");
  require(o.tol > 0.0, "--tol must be > 0");
  require(o.budget >= 1, "--budget must be >= 1");
  const SplittingOptions sopt = splitting_options(o, seed);
  const json raw = load_json(o.family);
  const Family fam = family_from_json(raw);
  const ThresholdResult res = find_threshold(fam, schemes.front(), o.tol, o.budget, sopt);
  std::ostringstream tol;
  tol << std::setprecision(17) << o.tol;
  json m = manifest("threshold --scheme " + o.scheme + " --tol " + tol.str() + " --budget " + std::to_string(o.budget) + splitting_flags(sopt),
                    raw, seed);
  add_wall_time(m, start, o.timing);
  json report{{"manifest", m},
              {"family", {{"name", fam.name}, {"param", fam.param}, {"range", {fam.lo, fam.hi}}}},
              {"scheme", o.scheme},
              {"threshold", io::to_json(res)}};
  out << report.dump(2) << "\n";
  return kOk;
}

int cmd_speed(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(o);
  const int reps = o.reps < 0 ? defaults::kReps : o.reps;
  require(o.depth >= 1, "--depth must be >= 1");
  require(reps >= 1, "--reps must be >= 1");
  require(o.frontier_cap >= 1, "--frontier-cap must be >= 1");
  json raw;
  const ModelConfig cfg = load_model(o, raw);
  require(cfg.m >= 2, "speed needs m >= 2");
  const std::vector<double> samples = brw_speed_samples(cfg, o.depth, reps, seed, o.frontier_cap);
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  json m = manifest("speed --depth " + std::to_string(o.depth) + " --reps " + std::to_string(reps) + " --frontier-cap " +
                        std::to_string(o.frontier_cap),
                    raw, seed);
  add_wall_time(m, start, o.timing);
  json report{{"manifest", m},   {"config", io::to_json(cfg)}, {"depth", o.depth}, {"reps", reps},
              {"speed", mean},   {"samples", samples},         {"s_star", io::ext(s_star(cfg))}};
  out << report.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decide signal survival for augmented, complete and boundary routing on random m-ary trees."};
  app.set_version_flag("--version", std::string(TREECAST_VERSION));
  app.require_subcommand(1);
  Options o;

  auto config_opt = [&](CLI::App* sub) { sub->add_option("--config", o.config, "model JSON file")->required(); };
  auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "64-bit seed (default: $TREECAST_SEED, else 0)"); };
  auto split_opts = [&](CLI::App* sub) {
    sub->add_option("--n", o.n, "splitting steps")->capture_default_str();
    sub->add_option("--particles", o.particles, "splitting population")->capture_default_str();
    sub->add_option("--reps", o.reps, "repetitions (default 20)");
    sub->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  };
  auto timing_opt = [&](CLI::App* sub) { sub->add_flag("--timing", o.timing, "add wall_time to the manifest"); };

  CLI::App* check = app.add_subcommand("check", "verdict per routing scheme");
  config_opt(check);
  check->add_option("--scheme", o.scheme, "augmented|complete|boundary|all")->capture_default_str();
  split_opts(check);
  seed_opt(check);
  timing_opt(check);

  CLI::App* estimate = app.add_subcommand("estimate", "decay rate of a ray chain");
  config_opt(estimate);
  estimate->add_option("--chain", o.chain, "beta (complete routing) or gamma (boundary routing)")->capture_default_str();
  split_opts(estimate);
  seed_opt(estimate);
  timing_opt(estimate);

  CLI::App* simulate = app.add_subcommand("simulate", "coupled tree simulation, one report per rep");
  config_opt(simulate);
  simulate->add_option("--depth", o.depth, "levels to simulate")->capture_default_str();
  simulate->add_option("--reps", o.reps, "independent trees (default 20)");
  simulate->add_option("--frontier-cap", o.frontier_cap, "vertices kept per level")->capture_default_str();
  simulate->add_option("--format", o.format, "json (JSON lines) or csv")->capture_default_str();
  simulate->add_option("--budget", o.sim_budget, "upper bound on depth * reps")->capture_default_str();
  simulate->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  seed_opt(simulate);
  timing_opt(simulate);

  CLI::App* threshold = app.add_subcommand("threshold", "critical parameter of a family");
  threshold->add_option("--family", o.family, "family JSON file")->required();
  threshold->add_option("--scheme", o.scheme, "augmented|complete|boundary")->required();
  threshold->add_option("--tol", o.tol, "bracket width")->capture_default_str();
  threshold->add_option("--budget", o.budget, "maximum bisection steps")->capture_default_str();
  split_opts(threshold);
  seed_opt(threshold);
  timing_opt(threshold);

  CLI::App* speed = app.add_subcommand("speed", "maximal displacement speed of the branching random walk");
  config_opt(speed);
  speed->add_option("--depth", o.depth, "generations")->capture_default_str();
  speed->add_option("--reps", o.reps, "independent walks (default 20)");
  speed->add_option("--frontier-cap", o.frontier_cap, "particles kept per generation")->capture_default_str();
  seed_opt(speed);
  timing_opt(speed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  // The report is buffered so nothing reaches stdout on failure, except for
  // simulate, which streams and only fails before its first line.
  std::ostringstream buf;
  const bool streaming = simulate->parsed();
  std::ostream& out = streaming ? std::cout : buf;
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    int code = kOk;
    if (check->parsed()) code = cmd_check(o, out);
    if (estimate->parsed()) code = cmd_estimate(o, out);
    if (simulate->parsed()) code = cmd_simulate(o, out);
    if (threshold->parsed()) code = cmd_threshold(o, out);
    if (speed->parsed()) code = cmd_speed(o, out);
    if (code == kOk && !streaming) std::cout << buf.str();
    std::cout.flush();
    return code;
  } catch (const UsageError& e) {
    std::cerr << "treecast " << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaError& e) {
    std::cerr << "treecast " << name << ": invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const PreconditionFailed& e) {
    std::cerr << "treecast " << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const ConsistencyError& e) {
    std::cerr << "treecast " << name << ": internal consistency check failed: " << e.what() << "\n";
    return kInconsistent;
  } catch (const DegenerateExtinction& e) {
    std::cerr << "treecast " << name << ": " << e.what()
              << "\n  the chain dies too fast to estimate; raise --particles, or the rate exceeds log m and the scheme dies\n";
    return kDegenerate;
  } catch (const NoSignChange& e) {
    std::cerr << "treecast " << name << ": " << e.what() << "\n  widen the family range so the verdict changes inside it\n";
    return kNoSignChange;
  } catch (const std::exception& e) {
    std::cerr << "treecast " << name << ": " << e.what() << "\n";
    return kInternal;
  }
}

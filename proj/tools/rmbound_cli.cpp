// rmbound command-line front end. Every subcommand reads a JSON manifest
// and/or flags (flags win), validates all parameters up front, then runs.
//
// Exit status: 0 ok, 1 validation error, 2 guarantee failure,
// 3 numerical non-convergence. Errors go to stderr as one JSON object.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rmbound.hpp"

using json = nlohmann::json;
using namespace rmb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitGuarantee = 2;
constexpr int kExitNonConvergence = 3;
constexpr const char* kOutputDirEnv = "RMBOUND_OUTPUT_DIR";

// ------------------------------------------------------------------ keys

enum class KeyType { string, real, integer, seed, boolean, integer_list, real_list };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* help;
};

const std::vector<KeySpec> kKeys = {
    {"command", KeyType::string, "subcommand to run (manifest files and 'run'/'validate')"},
    {"pattern", KeyType::string, "coefficient pattern 'name:params', e.g. band:4096,16 or csv:path"},
    {"file", KeyType::string, "dense CSV coefficient file (symmetric)"},
    {"matrix", KeyType::string, "dense CSV of a realized matrix whose norm is computed directly"},
    {"distribution", KeyType::string, "entry law: gaussian | rademacher | uniform | heavy:<beta>"},
    {"epsilon", KeyType::real, "epsilon in (0, 1/2]"},
    {"alpha", KeyType::real, "alpha >= 3 for the bounded-entry bound"},
    {"beta", KeyType::real, "beta >= 1 for the heavy-tailed bound"},
    {"p", KeyType::real, "dimension-free exponent in [1, 2), or moment half-length for 'moments'"},
    {"r", KeyType::integer, "Wigner dimension r for 'moments wigner'"},
    {"rprime", KeyType::integer, "second dimension r' for rectangular Wigner moments"},
    {"action", KeyType::string, "census | verify | trace | wigner"},
    {"rescale", KeyType::boolean, "divide integer coefficients by sigma_* in exact rationals"},
    {"trials", KeyType::integer, "Monte Carlo trials"},
    {"trial", KeyType::integer, "trial index of the sampled matrix"},
    {"seed", KeyType::seed, "64-bit master seed"},
    {"tol", KeyType::real, "relative tolerance of iterative norms"},
    {"method", KeyType::string, "norm method: auto | dense_eig | lanczos | power"},
    {"n", KeyType::integer_list, "grid of dimensions, comma separated"},
    {"k_rule", KeyType::string, "degree rule: const(K) | c_log(C) | log_sq | sqrt"},
    {"t", KeyType::real_list, "tail offsets t >= 0, comma separated"},
    {"format", KeyType::string, "matrix output format: dense | triples"},
    {"output", KeyType::string, "output file (default: $RMBOUND_OUTPUT_DIR/<command>.<ext>, else stdout)"},
    {"threads", KeyType::integer, "worker threads, 0 = one per hardware thread"},
};

const KeySpec& key_spec(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return k;
  throw ValidationError("unknown key '" + name + "'");
}

struct CommandSpec {
  const char* name;
  const char* help;
  const char* ext;
  std::vector<std::string> keys;
};

const std::vector<std::string> kCommonKeys = {"command", "seed", "output", "threads"};

const std::vector<CommandSpec> kCommands = {
    {"bounds",
     "Evaluate upper bounds on E||X|| for X_ij = b_ij xi_ij: the main estimate "
     "(1+eps)(2 sigma + 6/sqrt(log(1+eps)) sigma_* sqrt(log n)), its rectangular form, the "
     "subgaussian, bounded-entry (alpha >= 3) and heavy-tailed variants, and the noncommutative "
     "Khintchine, Gordon, Seginer-type, Rademacher and dimension-free reference bounds.",
     "json",
     {"pattern", "file", "distribution", "epsilon", "alpha", "beta", "p"}},
    {"sample", "Draw one matrix X_ij = b_ij xi_ij from the seeded trial stream and write it as CSV.", "csv",
     {"pattern", "file", "distribution", "trial", "format"}},
    {"norm",
     "Monte Carlo estimate of E||X|| and of E max_i ||X e_i|| with standard errors, or the spectral "
     "norm of a given matrix file.",
     "json",
     {"pattern", "file", "matrix", "distribution", "trials", "tol", "method"}},
    {"moments",
     "Exact moment engine: census of even closed-walk shapes, E Tr[Y_r^{2p}] by the shape-sum "
     "formula (wigner), brute-force E Tr[X^{2p}] (trace), and the Gaussian comparison "
     "E Tr[X^{2p}] <= (n/r) E Tr[Y_r^{2p}] with r = ceil(sigma^2) + p for sigma_* <= 1 (verify).",
     "json",
     {"action", "pattern", "file", "p", "r", "rprime", "distribution", "rescale"}},
    {"phase",
     "Sparse phase transition: E||X|| / sqrt(k) on k-regular patterns (cyclic band, truncated band, "
     "regular random) with k = k_rule(n). The ratio tends to 2 when k >> log n and stays above 2 for "
     "bounded k.",
     "csv",
     {"pattern", "n", "k_rule", "distribution", "trials", "tol", "method"}},
    {"tails",
     "Empirical survival P[||X|| >= (main bound) + t] against exp(-t^2 / (4 sigma_*^2)), plus the "
     "second tail form at level (1+eps) 2 sigma + t.",
     "csv",
     {"pattern", "file", "distribution", "epsilon", "t", "trials", "tol", "method"}},
    {"density",
     "Kolmogorov-Smirnov distance between the spectrum of X / sqrt(k) for a k-regular pattern and the "
     "semicircle law on [-2, 2].",
     "json",
     {"pattern", "file", "distribution"}},
    {"seginer",
     "Block-diagonal matrices with k x k blocks, k = ceil(sqrt(log n)): E||X|| / sqrt(log n), the "
     "example showing the sigma_* sqrt(log n) term cannot be dropped.",
     "csv",
     {"n", "distribution", "trials", "tol", "method"}},
    {"report",
     "Sandwich report: Monte Carlo E||X|| against every applicable upper bound and, for Gaussian "
     "entries, the lower estimate sigma + E max |b_ij g_ij|.",
     "json",
     {"pattern", "file", "distribution", "epsilon", "p", "trials", "tol", "method"}},
};

const CommandSpec* find_command(const std::string& name) {
  for (const auto& c : kCommands)
    if (name == c.name) return &c;
  return nullptr;
}

bool command_uses(const CommandSpec& c, const std::string& key) {
  return std::find(kCommonKeys.begin(), kCommonKeys.end(), key) != kCommonKeys.end() ||
         std::find(c.keys.begin(), c.keys.end(), key) != c.keys.end();
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

// ------------------------------------------------------------ normalizing

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

std::uint64_t parse_seed(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ValidationError("seed must be a non-negative integer");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ValidationError("seed does not fit in 64 bits");
  }
}

json from_flag(const KeySpec& k, const std::string& raw) {
  switch (k.type) {
    case KeyType::string: return raw;
    case KeyType::real: return parse_double(raw);
    case KeyType::integer: return parse_integer(raw);
    case KeyType::seed: return parse_seed(raw);
    case KeyType::boolean:
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw ValidationError("expected true or false");
    case KeyType::integer_list: {
      json a = json::array();
      for (const auto& f : split_commas(raw)) a.push_back(parse_integer(f));
      return a;
    }
    case KeyType::real_list: {
      json a = json::array();
      for (const auto& f : split_commas(raw)) a.push_back(parse_double(f));
      return a;
    }
  }
  return raw;
}

// Checks the JSON type of a manifest value; list keys also take a comma string.
json normalize(const KeySpec& k, const json& v) {
  auto fail = [&](const char* want) -> json { throw ValidationError(std::string("expected ") + want); };
  switch (k.type) {
    case KeyType::string: return v.is_string() ? v : fail("a string");
    case KeyType::real: return v.is_number() ? json(v.get<double>()) : fail("a number");
    case KeyType::integer: return v.is_number_integer() ? v : fail("an integer");
    case KeyType::seed:
      if (v.is_number_unsigned()) return v;
      if (v.is_number_integer() && v.get<long long>() >= 0) return json(v.get<std::uint64_t>());
      if (v.is_string()) return parse_seed(v.get<std::string>());
      return fail("a non-negative integer");
    case KeyType::boolean: return v.is_boolean() ? v : fail("a boolean");
    case KeyType::integer_list:
    case KeyType::real_list: {
      if (v.is_string()) return from_flag(k, v.get<std::string>());
      if (!v.is_array()) return fail("an array");
      json a = json::array();
      for (const auto& e : v) {
        if (k.type == KeyType::integer_list && !e.is_number_integer()) return fail("an array of integers");
        if (k.type == KeyType::real_list && !e.is_number()) return fail("an array of numbers");
        a.push_back(k.type == KeyType::real_list ? json(e.get<double>()) : e);
      }
      return a;
    }
  }
  return v;
}

// ------------------------------------------------------------------ run

struct Run {
  const CommandSpec* cmd = nullptr;
  json params = json::object();  // normalized, defaults filled
  std::vector<std::string> violations;
  std::optional<CoefficientMatrix> coeffs;
  std::optional<EntryDistribution> dist;
  std::map<std::string, std::string> input_files;  // path -> blob hash
  TrialOptions trials;

  bool has(const std::string& k) const { return params.contains(k); }
  template <class T>
  T get(const std::string& k) const {
    return params.at(k).get<T>();
  }
  void violation(std::string msg) { violations.push_back(std::move(msg)); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// git blob hash: sha1("blob <size>\0" + content).
std::string git_blob_hash(const std::string& content) {
  const std::string data = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void set_default(Run& run, const std::string& key, json value) {
  if (command_uses(*run.cmd, key) && !run.params.contains(key)) run.params[key] = std::move(value);
}

CoefficientMatrix load_coefficients(Run& run) {
  std::string spec;
  if (run.has("file")) {
    if (run.has("pattern")) throw ValidationError("give either 'pattern' or 'file', not both");
    spec = "csv:" + run.get<std::string>("file");
  } else if (run.has("pattern")) {
    spec = run.get<std::string>("pattern");
  } else {
    throw ValidationError("a coefficient pattern is required ('pattern' or 'file')");
  }
  const auto ps = parse_pattern_spec(spec);
  if (!ps.path.empty()) run.input_files[ps.path] = git_blob_hash(read_file(ps.path));
  return build_pattern(ps);
}

// Records any library error as a violation instead of propagating it.
template <class F>
void check(Run& run, F&& f) {
  try {
    f();
  } catch (const NonConvergence&) {
    throw;
  } catch (const std::exception& e) {
    run.violation(e.what());
  }
}

bool needs_pattern(const Run& run) {
  const std::string c = run.cmd->name;
  if (c == "phase" || c == "seginer") return false;
  if (c == "norm" && run.has("matrix")) return false;
  if (c == "moments") {
    const auto a = run.has("action") ? run.get<std::string>("action") : "";
    return a == "verify" || a == "trace";
  }
  return true;
}

void fill_defaults(Run& run) {
  const std::string c = run.cmd->name;
  set_default(run, "seed", 0);
  set_default(run, "threads", 0);
  set_default(run, "distribution", c == "seginer" ? "rademacher" : "gaussian");
  set_default(run, "epsilon", 0.25);
  if (c == "bounds") set_default(run, "alpha", 3.0);
  set_default(run, "p", c == "moments" ? 2.0 : 1.5);
  set_default(run, "trials", c == "tails" ? kDefaultTailTrials : kDefaultNormTrials);
  set_default(run, "tol", kDefaultNormTol);
  set_default(run, "method", "auto");
  set_default(run, "t", json::array({0.0, 1.0, 2.0, 3.0, 4.0}));
  set_default(run, "k_rule", "log_sq");
  set_default(run, "trial", 0);
  set_default(run, "format", "dense");
  set_default(run, "rescale", false);
  if (c == "phase") set_default(run, "pattern", "band");
}

std::optional<NormMethod> parse_method(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "dense_eig" || s == "dense") return NormMethod::dense_eig;
  if (s == "lanczos") return NormMethod::lanczos;
  if (s == "power") return NormMethod::power;
  throw ValidationError("unknown norm method '" + s + "'");
}

int moment_p(const Run& run) {
  const double p = run.get<double>("p");
  if (p != std::floor(p) || p < 1 || p > kMaxShapeHalfLength)
    throw ValidationError("moment half-length p must be an integer in [1, " + std::to_string(kMaxShapeHalfLength) + "]");
  return static_cast<int>(p);
}

void validate_semantics(Run& run) {
  const std::string c = run.cmd->name;

  if (run.has("threads"))
    check(run, [&] {
      const auto t = run.get<long long>("threads");
      if (t < 0 || t > 1024) throw ValidationError("threads must be in [0, 1024]");
    });
  if (run.has("distribution")) check(run, [&] { run.dist = parse_distribution(run.get<std::string>("distribution")); });
  if (run.has("epsilon") && (c == "bounds" || c == "tails" || c == "report"))
    check(run, [&] { check_epsilon(run.get<double>("epsilon")); });
  if (run.has("alpha")) check(run, [&] { check_alpha(run.get<double>("alpha")); });
  if (run.has("beta"))
    check(run, [&] {
      const double b = run.get<double>("beta");
      if (!(b >= 1.0) || !std::isfinite(b)) throw ValidationError("beta must be >= 1");
    });
  if (run.has("p") && c != "moments")
    check(run, [&] {
      const double p = run.get<double>("p");
      if (!(p >= 1.0 && p < 2.0)) throw ValidationError("dimension-free exponent p must be in [1, 2)");
    });
  if (run.has("trials"))
    check(run, [&] {
      if (run.get<long long>("trials") < 2) throw ValidationError("trials must be >= 2");
    });
  if (run.has("tol"))
    check(run, [&] {
      const double t = run.get<double>("tol");
      if (!(t > 0.0 && t < 1.0)) throw ValidationError("tol must be in (0, 1)");
    });
  std::optional<NormMethod> method;
  if (run.has("method")) check(run, [&] { method = parse_method(run.get<std::string>("method")); });
  if (run.has("trial"))
    check(run, [&] {
      if (run.get<long long>("trial") < 0) throw ValidationError("trial must be >= 0");
    });
  if (run.has("format"))
    check(run, [&] {
      const auto f = run.get<std::string>("format");
      if (f != "dense" && f != "triples") throw ValidationError("format must be dense or triples");
    });
  if (run.has("t"))
    check(run, [&] {
      const auto ts = run.get<std::vector<double>>("t");
      if (ts.empty()) throw ValidationError("t grid is empty");
      for (double t : ts)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("t must be >= 0");
    });

  if (c == "moments") {
    if (!run.has("action")) {
      run.violation("moments needs an action: census | verify | trace | wigner");
    } else {
      const auto a = run.get<std::string>("action");
      if (a != "census" && a != "verify" && a != "trace" && a != "wigner")
        run.violation("unknown moments action '" + a + "'");
    }
  }
  if (needs_pattern(run)) check(run, [&] { run.coeffs = load_coefficients(run); });
  if (c == "norm" && run.has("matrix")) {
    if (run.has("pattern") || run.has("file")) run.violation("give either a matrix or a coefficient pattern");
    check(run, [&] {
      const auto path = run.get<std::string>("matrix");
      run.input_files[path] = git_blob_hash(read_file(path));
    });
  }

  if (c == "moments" && run.has("action")) {
    const auto a = run.get<std::string>("action");
    int p = 0;
    check(run, [&] { p = moment_p(run); });
    if (p > 0 && run.coeffs && (a == "verify" || a == "trace")) {
      const auto& cm = *run.coeffs;
      const double n = static_cast<double>(cm.rows());
      const double tuples = cm.is_symmetric() ? std::pow(n, 2.0 * p) : std::pow(n * cm.cols(), p);
      if (tuples > kBruteForceTupleLimit)
        run.violation(std::string("brute force limited to ") + (cm.is_symmetric() ? "n^(2p)" : "(nm)^p") +
                      " <= 1e8 (got " + format_double(tuples) + ")");
      if (a == "verify") {
        if (!cm.is_symmetric()) run.violation("verify requires a symmetric pattern");
        if (run.get<bool>("rescale")) {
          if (!detail::integer_valued(cm.matrix())) run.violation("rescale needs integer coefficients");
        } else if (structural_params(cm).sigma_star > 1.0) {
          run.violation("verify requires sigma_* <= 1 (got " + format_double(structural_params(cm).sigma_star) +
                        "); divide by sigma_* or pass rescale");
        }
      }
      if (a == "trace" && run.dist && run.dist->family == Family::custom)
        run.violation("brute force needs a named distribution");
    }
    if (p > 0 && a == "wigner") {
      if (!run.has("r")) {
        run.violation("wigner needs r");
      } else if (run.has("rprime")) {
        const auto r = run.get<long long>("r"), rp = run.get<long long>("rprime");
        if (2 * r <= p || 2 * rp <= p) run.violation("rectangular moment requires 2r > p and 2r' > p");
      } else if (run.get<long long>("r") <= p) {
        run.violation("wigner_trace_moment requires r > p");
      }
    }
  }

  if (c == "phase") {
    std::optional<PhasePattern> pat;
    std::optional<KRule> rule;
    check(run, [&] { pat = parse_phase_pattern(run.get<std::string>("pattern")); });
    check(run, [&] { rule = parse_k_rule(run.get<std::string>("k_rule")); });
    if (!run.has("n")) run.violation("phase needs an n grid");
    if (run.has("n") && pat && rule)
      for (long long n : run.get<std::vector<long long>>("n")) {
        if (n < 2) {
          run.violation("grid dimensions must be >= 2");
          continue;
        }
        const long long k = rule->target(n);
        const long long degree = *pat == PhasePattern::regular_random ? k : 2 * (k / 2) + 1;
        if (degree >= n)
          run.violation("degree " + std::to_string(degree) + " from " + rule->name() + " is not below n = " +
                        std::to_string(n));
      }
  }
  if (c == "seginer") {
    if (!run.has("n")) run.violation("seginer needs an n grid");
    else
      for (long long n : run.get<std::vector<long long>>("n"))
        if (n < 2) run.violation("grid dimensions must be >= 2");
  }
  if (c == "density" && run.coeffs) {
    const auto& cm = *run.coeffs;
    if (!cm.is_symmetric()) run.violation("density requires a symmetric pattern");
    if (cm.rows() > kFullSpectrumMax)
      run.violation("full spectrum limited to n <= " + std::to_string(kFullSpectrumMax));
  }
  if (c == "tails" && run.coeffs && !run.coeffs->is_symmetric()) run.violation("tails requires a symmetric pattern");
  if (c == "report" && run.coeffs && run.dist && run.dist->family == Family::custom)
    run.violation("report needs a named distribution");

  if (run.has("trials")) run.trials.trials = static_cast<int>(run.get<long long>("trials"));
  if (run.has("seed")) run.trials.seed = run.get<std::uint64_t>("seed");
  if (run.has("tol")) run.trials.tol = run.get<double>("tol");
  if (run.has("threads") && run.get<long long>("threads") >= 0)
    run.trials.threads = resolve_threads(static_cast<unsigned>(run.get<long long>("threads")));
  run.trials.method = method;
}

// Builds a Run from manifest JSON plus flag overrides; never throws.
Run prepare(const std::string& command, const json& manifest, const std::map<std::string, std::string>& flags) {
  Run run;
  std::string target = command;
  if (target.empty()) {
    if (flags.count("command")) target = flags.at("command");
    else if (manifest.contains("command") && manifest["command"].is_string()) target = manifest["command"];
  }
  run.cmd = find_command(target);
  if (!run.cmd) {
    run.violation(target.empty() ? "no command given" : "unknown command '" + target + "'");
    return run;
  }
  auto take = [&](const std::string& key, auto&& convert) {
    const KeySpec* spec = nullptr;
    try {
      spec = &key_spec(key);
    } catch (const std::exception& e) {
      run.violation(e.what());
      return;
    }
    if (!command_uses(*run.cmd, key)) {
      run.violation("key '" + key + "' is not used by '" + run.cmd->name + "'");
      return;
    }
    try {
      run.params[key] = convert(*spec);
    } catch (const std::exception& e) {
      run.violation("invalid value for '" + key + "': " + e.what());
    }
  };
  if (!manifest.is_object()) {
    run.violation("manifest must be a JSON object");
  } else {
    for (const auto& [key, value] : manifest.items())
      take(key, [&](const KeySpec& k) { return normalize(k, value); });
  }
  for (const auto& [key, raw] : flags) take(key, [&](const KeySpec& k) { return from_flag(k, raw); });
  if (run.has("command") && run.get<std::string>("command") != run.cmd->name)
    run.violation("manifest command '" + run.get<std::string>("command") + "' does not match '" + run.cmd->name + "'");
  run.params["command"] = run.cmd->name;
  fill_defaults(run);
  try {
    validate_semantics(run);
  } catch (const std::exception& e) {
    run.violation(e.what());
  }
  return run;
}

// ------------------------------------------------------------------ output

[[noreturn]] void fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  j.update(extra);
  std::cerr << j.dump() << std::endl;
  std::exit(code);
}

json manifest_echo(const Run& run) {
  json params = run.params;
  params.erase("threads");
  params.erase("output");
  json files = json::object();
  for (const auto& [path, hash] : run.input_files) files[path] = hash;
  json hashed = {{"parameters", params}, {"input_files", files}};
  return {{"command", run.cmd->name},
          {"parameters", params},
          {"input_files", files},
          {"content_hash", git_blob_hash(hashed.dump())}};
}

void emit(const Run& run, const std::string& text) {
  std::string path;
  if (run.has("output")) {
    path = run.get<std::string>("output");
  } else if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) {
    path = (std::filesystem::path(dir) / (std::string(run.cmd->name) + "." + run.cmd->ext)).string();
  }
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  auto write = [](const std::string& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + p + "'");
    out << content;
  };
  write(path, text);
  write(path + ".manifest.json", manifest_echo(run).dump(2) + "\n");
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::string big(const BigInt& v) { return v.str(); }

// ---------------------------------------------------------------- commands

int cmd_bounds(const Run& run) {
  const auto& c = *run.coeffs;
  const double eps = run.get<double>("epsilon");
  json reports = json::array(), skipped = json::array();
  auto add = [&](const char* name, auto&& f) {
    try {
      reports.push_back(to_json(f()));
    } catch (const Error& e) {
      skipped.push_back({{"bound_name", name}, {"reason", e.what()}});
    }
  };
  if (c.is_symmetric()) {
    add("main", [&] { return bound_main(c, eps); });
    add("nck", [&] { return bound_reference(c, ReferenceKind::nck); });
    add("gordon", [&] { return bound_reference(c, ReferenceKind::gordon); });
    add("subgaussian", [&] { return bound_subgaussian(c, eps); });
    add("bounded_entries", [&] {
      return bound_bounded_entries(c, run.get<double>("alpha"), entry_moment_from(c, *run.dist));
    });
    std::optional<double> beta;
    if (run.has("beta")) beta = run.get<double>("beta");
    else if (run.dist->family == Family::heavy_tailed) beta = run.dist->beta;
    if (beta) add("heavy", [&] { return bound_heavy(c, *beta); });
    add("seginer", [&] { return bound_seginer(c); });
    add("rademacher", [&] { return bound_rademacher(c, eps); });
  } else {
    add("rect", [&] { return bound_rect(c, eps); });
    add("subgaussian", [&] { return bound_subgaussian(c, eps); });
  }
  add("dimfree", [&] { return bound_dimfree(c, run.get<double>("p")); });
  emit(run, json_text({{"bounds", reports}, {"skipped", skipped}}));
  return kExitOk;
}

int cmd_sample(const Run& run) {
  const auto x = sample_matrix(*run.coeffs, *run.dist,
                               SeedSpec{run.get<std::uint64_t>("seed"), run.get<std::uint64_t>("trial")});
  std::ostringstream out;
  if (run.get<std::string>("format") == "dense") write_dense_csv(out, x);
  else write_triples_csv(out, x, run.coeffs->is_symmetric());
  emit(run, out.str());
  return kExitOk;
}

int cmd_norm(const Run& run) {
  if (run.has("matrix")) {
    auto in = open_input(run.get<std::string>("matrix"));
    NormOptions opt;
    opt.tol = run.trials.tol;
    opt.method = run.trials.method;
    const auto r = spectral_norm(read_dense_csv(in), opt);
    emit(run, json_text({{"value", r.value},
                         {"method", to_string(r.method)},
                         {"iterations", r.iterations},
                         {"rel_error_bound", r.rel_error_bound}}));
    return kExitOk;
  }
  const auto s = estimate_norms(*run.coeffs, *run.dist, run.trials);
  json j = {{"norm", estimate_json(s.norm)}, {"column_max", estimate_json(s.column_max)}};
  j["norm"]["per_trial"] = s.norm.per_trial_values;
  emit(run, json_text(j));
  return kExitOk;
}

int cmd_moments(const Run& run) {
  const auto action = run.get<std::string>("action");
  const int p = moment_p(run);
  json j = {{"action", action}, {"p", p}};
  int code = kExitOk;
  if (action == "census") {
    j["census"] = json::array();
    for (int q = 1; q <= p; ++q) {
      json shapes = json::array();
      for (const auto& s : enumerate_shapes(q)) shapes.push_back(s.seq);
      j["census"].push_back({{"length", 2 * q},
                             {"cycle_shapes", enumerate_shapes(q).size()},
                             {"bipartite_shapes", enumerate_bipartite_shapes(q).size()},
                             {"shapes", shapes}});
    }
  } else if (action == "wigner") {
    const auto r = run.get<long long>("r");
    j["r"] = r;
    if (run.has("rprime")) {
      j["rprime"] = run.get<long long>("rprime");
      j["moment"] = big(rect_trace_moment(r, run.get<long long>("rprime"), p));
    } else {
      j["moment"] = big(wigner_trace_moment(r, p));
    }
  } else if (action == "trace") {
    const auto& c = *run.coeffs;
    const auto t = c.is_symmetric() ? trace_moment_bruteforce(c, p, *run.dist)
                                    : rect_trace_moment_bruteforce(c, p, *run.dist);
    j["value"] = t.value;
    j["exact"] = t.exact ? json(big(*t.exact)) : json(nullptr);
  } else {
    const auto r = run.get<bool>("rescale") ? verify_comparison_rescaled(*run.coeffs, p)
                                            : verify_comparison(*run.coeffs, p);
    j.update({{"r", r.r},
              {"lhs", r.lhs},
              {"rhs", r.rhs},
              {"holds", r.holds},
              {"exact", r.exact},
              {"lhs_exact", r.lhs_exact ? json(big(*r.lhs_exact)) : json(nullptr)},
              {"wigner_moment", big(r.wigner_moment)}});
    if (!r.holds) code = kExitGuarantee;
  }
  emit(run, json_text(j));
  if (code != kExitOk) fail(code, "guarantee", "comparison inequality violated", {{"result", j}});
  return code;
}

int cmd_phase(const Run& run) {
  const auto r = phase_scan(parse_phase_pattern(run.get<std::string>("pattern")), run.get<std::vector<long long>>("n"),
                            parse_k_rule(run.get<std::string>("k_rule")), *run.dist, run.trials);
  emit(run, phase_csv(r));
  return kExitOk;
}

int cmd_tails(const Run& run) {
  const auto t = tail_empirics(*run.coeffs, *run.dist, run.get<double>("epsilon"), run.get<std::vector<double>>("t"),
                               run.trials);
  emit(run, tails_csv(t));
  // Domination is only a guarantee for Gaussian entries.
  if (run.dist->family == Family::gaussian) {
    json bad = json::array();
    for (const auto& row : t.rows)
      if (row.empirical_survival > row.bound_value + 3 * row.binomial_stderr)
        bad.push_back({{"t", row.t}, {"survival", row.empirical_survival}, {"bound", row.bound_value}});
    if (!bad.empty()) fail(kExitGuarantee, "guarantee", "empirical survival exceeds the tail bound", {{"rows", bad}});
  }
  return kExitOk;
}

int cmd_density(const Run& run) {
  const auto d = spectral_density_check(*run.coeffs, *run.dist, run.get<std::uint64_t>("seed"));
  emit(run, json_text({{"ks_distance", d.ks_distance}, {"n", d.n}, {"degree", d.degree}}));
  return kExitOk;
}

int cmd_seginer(const Run& run) {
  emit(run, seginer_csv(seginer_block_experiment(run.get<std::vector<long long>>("n"), *run.dist, run.trials)));
  return kExitOk;
}

int cmd_report(const Run& run) {
  const auto r = bounds_vs_empirical_report(*run.coeffs, *run.dist, run.get<double>("epsilon"), run.trials,
                                            run.get<double>("p"));
  emit(run, json_text(report_json(r)));
  if (!r.all_hold()) {
    json bad = json::array();
    for (const auto& c : r.checks)
      if (!c.holds) bad.push_back({{"name", c.name}, {"detail", c.detail}});
    fail(kExitGuarantee, "guarantee", "report check failed", {{"checks", bad}});
  }
  return kExitOk;
}

int execute(const Run& run) {
  const std::string c = run.cmd->name;
  if (c == "bounds") return cmd_bounds(run);
  if (c == "sample") return cmd_sample(run);
  if (c == "norm") return cmd_norm(run);
  if (c == "moments") return cmd_moments(run);
  if (c == "phase") return cmd_phase(run);
  if (c == "tails") return cmd_tails(run);
  if (c == "density") return cmd_density(run);
  if (c == "seginer") return cmd_seginer(run);
  return cmd_report(run);
}

json load_manifest(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
}

struct Invocation {
  std::string manifest;
  std::map<std::string, std::string> raw;  // key -> flag text
  std::map<std::string, CLI::Option*> options;
  bool rescale = false;
};

void add_key_options(CLI::App* sub, Invocation& inv, const std::vector<std::string>& keys) {
  sub->add_option("--manifest", inv.manifest, "JSON manifest file; flags override its fields");
  for (const auto& key : keys) {
    const auto& spec = key_spec(key);
    if (spec.type == KeyType::boolean) {
      inv.options[key] = sub->add_flag(flag_name(key), inv.rescale, spec.help);
    } else {
      inv.options[key] = sub->add_option(flag_name(key), inv.raw[key], spec.help);
    }
  }
}

std::map<std::string, std::string> given_flags(const Invocation& inv) {
  std::map<std::string, std::string> out;
  for (const auto& [key, opt] : inv.options)
    if (opt->count() > 0) out[key] = key_spec(key).type == KeyType::boolean ? (inv.rescale ? "true" : "false") : inv.raw.at(key);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds, exact moments and Monte Carlo experiments for the spectral norm of random matrices "
               "X_ij = b_ij xi_ij with independent entries."};
  app.require_subcommand(1);

  std::map<std::string, Invocation> invocations;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : kCommands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& inv = invocations[cmd.name];
    std::vector<std::string> keys(kCommonKeys.begin() + 1, kCommonKeys.end());
    for (const auto& k : cmd.keys)
      if (k != "action") keys.push_back(k);
    add_key_options(sub, inv, keys);
    if (std::string(cmd.name) == "moments")
      inv.options["action"] = sub->add_option("action", inv.raw["action"], key_spec("action").help);
    subs[cmd.name] = sub;
  }
  std::vector<std::string> all_keys;
  for (const auto& k : kKeys) all_keys.push_back(k.name);
  auto* run_sub = app.add_subcommand("run", "Execute a manifest; its 'command' field selects the subcommand.");
  add_key_options(run_sub, invocations["run"], all_keys);
  auto* validate_sub = app.add_subcommand(
      "validate", "Check every precondition of a manifest without running it; lists violations as JSON.");
  add_key_options(validate_sub, invocations["validate"], all_keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(kExitValidation, "usage", e.what());
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;
  const bool validate_only = validate_sub->parsed();
  if (run_sub->parsed()) name = "run";
  if (validate_only) name = "validate";
  const auto& inv = invocations.at(name);

  json manifest;
  try {
    manifest = load_manifest(inv.manifest);
  } catch (const std::exception& e) {
    fail(kExitValidation, "validation", e.what());
  }
  Run run;
  try {
    run = prepare(name == "run" || name == "validate" ? "" : name, manifest, given_flags(inv));
  } catch (const NonConvergence& e) {
    fail(kExitNonConvergence, e.kind(), e.what());
  }

  if (validate_only) {
    json j = {{"command", run.cmd ? json(run.cmd->name) : json(nullptr)},
              {"valid", run.violations.empty()},
              {"violations", run.violations}};
    std::cout << j.dump(2) << std::endl;
    return run.violations.empty() ? kExitOk : kExitValidation;
  }
  if (!run.violations.empty()) fail(kExitValidation, "validation", run.violations.front(), {{"violations", run.violations}});

  try {
    return execute(run);
  } catch (const NonConvergence& e) {
    fail(kExitNonConvergence, e.kind(), e.what(), {{"estimate", e.estimate()}, {"rel_error", e.rel_error()}});
  } catch (const Error& e) {
    fail(kExitValidation, e.kind(), e.what());
  } catch (const std::exception& e) {
    fail(kExitValidation, "error", e.what());
  }
}

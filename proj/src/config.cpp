#include "byzmix/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace byzmix {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::Vanilla: return "vanilla";
    case Method::Dfmr: return "dfmr";
    case Method::Dfmr1: return "dfmr1";
    case Method::Trim: return "trim";
    case Method::Coat: return "coat";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::Vanilla, Method::Dfmr, Method::Dfmr1, Method::Trim, Method::Coat, Method::Oracle})
    if (method_name(m) == name) return m;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::string_view key, const std::string& why) {
  throw ConfigError("config key '" + std::string(key) + "': " + why);
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || std::isnan(v)) fail(key, "expected a real number, got '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    fail(key, "expected an integer, got '" + std::string(value) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(key, "expected true or false, got '" + std::string(value) + "'");
}

}  // namespace

std::vector<double> parse_real_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (auto item : split_list(value)) out.push_back(parse_real(key, item));
  if (out.empty()) fail(key, "list is empty");
  return out;
}

std::vector<Method> parse_method_list(std::string_view key, std::string_view value) {
  std::vector<Method> out;
  for (auto item : split_list(value)) {
    try {
      out.push_back(parse_method(item));
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }
  if (out.empty()) fail(key, "list is empty");
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  bool d_given = false;
  bool failures_given = false;
  std::set<std::string, std::less<>> required{"family", "K", "m", "n", "methods"};

  using Setter = std::function<void(std::string_view key, std::string_view value)>;
  const std::map<std::string, Setter, std::less<>> schema{
      {"family", [&](auto k, auto v) {
         try { cfg.family = parse_family(v); } catch (const std::invalid_argument& e) { fail(k, e.what()); }
       }},
      {"K", [&](auto k, auto v) { cfg.K = parse_int<int>(k, v); }},
      {"d", [&](auto k, auto v) { cfg.d = parse_int<int>(k, v); d_given = true; }},
      {"m", [&](auto k, auto v) { cfg.m = parse_int<int>(k, v); }},
      {"n", [&](auto k, auto v) { cfg.n = parse_int<int>(k, v); }},
      {"repetitions", [&](auto k, auto v) { cfg.repetitions = parse_int<int>(k, v); }},
      {"truth_file", [&](auto, auto v) {
         std::filesystem::path p{std::string(v)};
         cfg.truth_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
       }},
      {"truth_per_repetition", [&](auto k, auto v) { cfg.truth_per_repetition = parse_bool(k, v); }},
      {"weight_floor", [&](auto k, auto v) { cfg.weight_floor = parse_real(k, v); }},
      {"mean_box", [&](auto k, auto v) { cfg.mean_box = parse_real(k, v); }},
      {"eig_min", [&](auto k, auto v) { cfg.eig_min = parse_real(k, v); }},
      {"eig_max", [&](auto k, auto v) { cfg.eig_max = parse_real(k, v); }},
      {"alpha", [&](auto k, auto v) { cfg.alphas = parse_real_list(k, v); }},
      {"failures", [&](auto k, auto v) {
         cfg.failures.clear();
         failures_given = true;
         for (auto item : split_list(v)) {
           try { cfg.failures.push_back(parse_failure(item)); } catch (const std::invalid_argument& e) { fail(k, e.what()); }
         }
       }},
      {"methods", [&](auto k, auto v) { cfg.methods = parse_method_list(k, v); }},
      {"rho", [&](auto k, auto v) { cfg.rhos = parse_real_list(k, v); }},
      {"eta", [&](auto k, auto v) { cfg.eta = parse_real(k, v); }},
      {"init", [&](auto k, auto v) {
         if (v == "truth") cfg.init = InitPolicy::Truth;
         else if (v == "kmeans++") cfg.init = InitPolicy::KMeansPP;
         else fail(k, "expected truth or kmeans++");
       }},
      {"em_max_iters", [&](auto k, auto v) { cfg.em.max_iters = parse_int<int>(k, v); }},
      {"em_tol", [&](auto k, auto v) { cfg.em.tol = parse_real(k, v); }},
      {"em_penalty", [&](auto k, auto v) { cfg.em.penalty = parse_real(k, v); }},
      {"mm_tol", [&](auto k, auto v) { cfg.mm_tol = parse_real(k, v); }},
      {"mm_max_iters", [&](auto k, auto v) { cfg.mm_max_iters = parse_int<int>(k, v); }},
      {"mm_restarts", [&](auto k, auto v) { cfg.mm_restarts = parse_int<int>(k, v); }},
      {"test_size", [&](auto k, auto v) { cfg.test_size = parse_int<int>(k, v); }},
      {"seed", [&](auto k, auto v) { cfg.seed = parse_int<std::uint64_t>(k, v); }},
      {"threads", [&](auto k, auto v) { cfg.threads = parse_int<int>(k, v); }},
      {"output", [&](auto, auto v) {
         std::filesystem::path p{std::string(v)};
         cfg.output = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
       }},
      {"timings", [&](auto k, auto v) { cfg.timings = parse_bool(k, v); }},
      {"dump_estimates", [&](auto k, auto v) { cfg.dump_estimates = parse_bool(k, v); }},
  };

  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end()) fail(key, "unknown key");
    if (!seen.insert(std::string(key)).second) fail(key, "given more than once");
    if (value.empty()) fail(key, "missing value");
    it->second(key, value);
    required.erase(std::string(key));
  }
  if (!required.empty()) fail(*required.begin(), "required key is missing");
  if (cfg.family == Family::Gamma && !d_given) cfg.d = 1;
  if (!failures_given) cfg.failures = {cfg.family == Family::Gaussian ? FailureKind::Mean : FailureKind::Shape};
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  if (K < 1) fail("K", "must be >= 1");
  if (d < 1) fail("d", "must be >= 1");
  if (family == Family::Gamma && d != 1) fail("d", "Gamma mixtures are one-dimensional");
  if (m < 2) fail("m", "must be >= 2");
  if (n < 2) fail("n", "must be >= 2");
  if (family == Family::Gaussian && n <= d) fail("n", "must exceed d");
  if (repetitions < 1) fail("repetitions", "must be >= 1");
  if (!truth_file && family == Family::Gamma) fail("truth_file", "Gamma experiments need an explicit ground truth");
  if (!truth_file) {
    if (!(weight_floor >= 0.0) || weight_floor * K > 1.0) fail("weight_floor", "must satisfy 0 <= floor * K <= 1");
    if (!(mean_box > 0.0)) fail("mean_box", "must be > 0");
    if (!(eig_min > 0.0)) fail("eig_min", "must be > 0");
    if (!(eig_max >= eig_min) || !std::isfinite(eig_max)) fail("eig_max", "must be finite and >= eig_min");
  }
  for (double a : alphas)
    if (!(a >= 0.0 && a < 0.5)) fail("alpha", "values must lie in [0, 0.5)");
  if (failures.empty()) fail("failures", "list is empty");
  for (auto f : failures)
    if (!failure_applies(f, family))
      fail("failures", "'" + std::string(failure_name(f)) + "' does not apply to " + std::string(family_name(family)));
  if (methods.empty()) fail("methods", "list is empty");
  if (rhos.empty()) fail("rho", "list is empty");
  for (double r : rhos)
    if (!(r >= 1.0)) fail("rho", "values must be >= 1");
  if (!(eta > 0.0 && eta < 1.0)) fail("eta", "must lie in (0, 1)");
  if (em.max_iters < 1) fail("em_max_iters", "must be >= 1");
  if (!(em.tol > 0.0)) fail("em_tol", "must be > 0");
  if (em.penalty && !(*em.penalty >= 0.0)) fail("em_penalty", "must be >= 0");
  if (!(mm_tol >= 0.0)) fail("mm_tol", "must be >= 0");
  if (mm_max_iters < 1) fail("mm_max_iters", "must be >= 1");
  if (mm_restarts < 1) fail("mm_restarts", "must be >= 1");
  if (test_size && *test_size < 2) fail("test_size", "must be >= 2");
  if (threads < 1) fail("threads", "must be >= 1");
}

int ExperimentConfig::effective_test_size() const {
  if (test_size) return *test_size;
  const long long total = static_cast<long long>(n) * m;
  return static_cast<int>(std::min<long long>(total, 100000));
}

}  // namespace byzmix

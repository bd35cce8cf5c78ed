#include "conelab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace conelab::scenario {
namespace {

enum class Type { real, integer, boolean, string, reals, integers };

using Rule = std::function<std::optional<std::string>(const Value&)>;

struct KeySpec {
  Type type;
  Rule rule;
};

std::optional<std::string> ok() { return std::nullopt; }

Rule real_rule(std::function<bool(double)> pred, std::string msg) {
  return [=](const Value& v) -> std::optional<std::string> {
    const double x = std::get<double>(v);
    if (!std::isfinite(x) || !pred(x)) return msg;
    return ok();
  };
}
Rule int_rule(std::function<bool(std::int64_t)> pred, std::string msg) {
  return [=](const Value& v) -> std::optional<std::string> {
    if (!pred(std::get<std::int64_t>(v))) return msg;
    return ok();
  };
}
Rule reals_rule(std::size_t min_size, std::function<bool(double)> pred, std::string msg) {
  return [=](const Value& v) -> std::optional<std::string> {
    const auto& xs = std::get<std::vector<double>>(v);
    if (xs.size() < min_size) return msg;
    for (double x : xs)
      if (!std::isfinite(x) || !pred(x)) return msg;
    return ok();
  };
}
Rule ints_rule(std::size_t min_size, std::function<bool(std::int64_t)> pred, std::string msg,
               bool increasing = false, bool allow_empty = false) {
  return [=](const Value& v) -> std::optional<std::string> {
    const auto& xs = std::get<std::vector<std::int64_t>>(v);
    if (xs.empty() && allow_empty) return ok();
    if (xs.size() < min_size) return msg;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!pred(xs[i])) return msg;
      if (increasing && i > 0 && xs[i] <= xs[i - 1]) return msg;
    }
    if (!increasing) {
      std::set<std::int64_t> seen(xs.begin(), xs.end());
      if (seen.size() != xs.size()) return msg + " (duplicates found)";
    }
    return ok();
  };
}

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = [] {
    std::map<std::string, KeySpec> m;
    auto positive = [](double x) { return x > 0.0; };
    auto nonneg = [](double x) { return x >= 0.0; };
    auto any = [](double) { return true; };
    m["grid.extent"] = {Type::integer, int_rule([](auto n) { return n >= 4; },
                                                "extent must be an integer >= 4")};
    m["grid.length"] = {Type::real, real_rule(positive, "length must be > 0")};
    m["grid.levels"] = {Type::integers,
                        ints_rule(3, [](auto n) { return n >= 4; },
                                  "levels must list at least three increasing extents >= 4",
                                  true, true)};
    m["region.center"] = {Type::real, real_rule(any, "center must be finite")};
    m["region.radius"] = {Type::real, real_rule(positive, "radius must be > 0")};
    m["region.bump_width"] = {Type::real, real_rule(positive, "bump_width must be > 0")};
    m["region.gap"] = {Type::real, real_rule(nonneg, "gap must be >= 0")};
    m["region.jitter"] = {Type::real, real_rule(nonneg, "jitter must be >= 0")};
    m["region.margin"] = {Type::integer, int_rule([](auto n) { return n >= 1; },
                                                  "margin must be an integer >= 1")};
    m["region.sites"] = {Type::integers,
                         ints_rule(1, [](auto n) { return n >= 0; },
                                   "sites must be a non-empty list of distinct site indices")};
    m["solver.mass"] = {Type::real, real_rule(nonneg, "mass must be >= 0")};
    m["solver.cfl"] = {Type::real,
                       real_rule([](double c) { return c > 0.0 && c <= 1.0; },
                                 "cfl must be in (0,1]")};
    m["solver.steps"] = {Type::integer, int_rule([](auto n) { return n >= 0; },
                                                 "steps must be an integer >= 0")};
    m["solver.seeds"] = {Type::integers,
                         ints_rule(1, [](auto n) { return n >= 0; },
                                   "seeds must be a non-empty list of distinct non-negative integers")};
    m["solver.time"] = {Type::real, real_rule(positive, "time must be > 0")};
    m["solver.dt"] = {Type::real, real_rule(positive, "dt must be > 0")};
    m["solver.sigma"] = {Type::real, real_rule(positive, "sigma must be > 0")};
    m["solver.n_max"] = {Type::integer, int_rule([](auto n) { return n >= 0 && n <= 3; },
                                                 "n_max must be in [0,3]")};
    m["solver.states"] = {Type::integer, int_rule([](auto n) { return n >= 1; },
                                                  "states must be an integer >= 1")};
    m["solver.guard_band"] = {Type::integer, int_rule([](auto n) { return n >= 0 && n <= 64; },
                                                      "guard_band must be in [0,64]")};
    m["solver.intervals"] = {Type::integer, int_rule([](auto n) { return n >= 1; },
                                                     "intervals must be an integer >= 1")};
    m["solver.lengths"] = {Type::integers,
                           ints_rule(3, [](auto n) { return n >= 1; },
                                     "lengths must list at least three increasing lengths >= 1",
                                     true)};
    m["solver.symmetry_extent"] = {Type::integer, int_rule([](auto n) { return n >= 4; },
                                                           "symmetry_extent must be >= 4")};
    m["solver.symmetry_mass"] = {Type::real, real_rule(positive, "symmetry_mass must be > 0")};
    m["solver.tail_max_margin"] = {Type::integer, int_rule([](auto n) { return n >= 4; },
                                                           "tail_max_margin must be >= 4")};
    m["solver.tail_step"] = {Type::integer, int_rule([](auto n) { return n >= 1; },
                                                     "tail_step must be >= 1")};
    m["solver.mr_points"] = {Type::reals,
                             reals_rule(1, positive, "mr_points must be positive numbers")};
    m["solver.times"] = {Type::reals, reals_rule(1, positive, "times must be positive numbers")};
    m["solver.offsets"] = {Type::reals,
                           reals_rule(1, positive, "offsets must be positive numbers")};
    m["solver.falloff_r"] = {Type::reals,
                             reals_rule(3, positive, "falloff_r must list at least three radii > 0")};
    m["solver.falloff_t"] = {Type::real, real_rule(positive, "falloff_t must be > 0")};
    m["solver.distances"] = {
        Type::reals, reals_rule(3, positive, "distances must list at least three values > 0")};
    m["solver.source_charge"] = {Type::real, real_rule(any, "source_charge must be finite")};
    m["solver.source_speed"] = {Type::real,
                                real_rule([](double v) { return std::abs(v) < 1.0; },
                                          "source_speed must satisfy |v| < 1")};
    m["solver.source_width"] = {Type::real, real_rule(positive, "source_width must be > 0")};
    m["output.dir"] = {Type::string, [](const Value& v) -> std::optional<std::string> {
                         if (std::get<std::string>(v).empty()) return "dir must not be empty";
                         return ok();
                       }};
    m["output.csv"] = {Type::boolean, nullptr};
    m["output.plot_script"] = {Type::boolean, nullptr};
    for (const char* k :
         {"inside_tol", "min_order", "floor", "energy_floor", "lorenz_tol", "gamma_tol",
          "drift_tol", "leakage_floor", "stability_max", "control_ceiling", "contrast",
          "purity_tol", "r2_min", "tail_floor", "symmetry_tol", "slope_min", "slope_max",
          "wightman_rtol", "pj_tol", "falloff_rtol", "min_penetration", "max_order",
          "rate_rtol", "trace_tol", "eig_tol", "binomial_tol", "reduced_tol"})
      m[std::string("checks.") + k] = {
          Type::real, real_rule(positive, std::string("tolerance checks.") + k +
                                              " must be positive")};
    return m;
  }();
  return s;
}

using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults& common_defaults() {
  static const Defaults d{{"output.dir", "."}, {"output.csv", "true"},
                          {"output.plot_script", "true"}};
  return d;
}

Defaults wave_defaults(bool em) {
  Defaults d{{"grid.extent", "2048"},
             {"grid.length", "1.0"},     {"grid.levels", ""},
             {"region.center", "0.3"},   {"region.radius", "0.15"},
             {"region.bump_width", "0.05"}, {"region.gap", "0.008"},
             {"region.jitter", "0.0"},   {"solver.cfl", "1.0"},
             {"solver.steps", "0"},      {"solver.seeds", "1"},
             {"solver.guard_band", "2"}, {"checks.inside_tol", "1e-13"},
             {"checks.min_order", "1.9"}, {"checks.floor", "1e-15"},
             {"checks.energy_floor", "1e-28"}};
  if (em) {
    d.insert(d.end(), {{"solver.source_charge", "1.0"},
                       {"solver.source_speed", "0.3"},
                       {"solver.source_width", "0.05"},
                       {"checks.lorenz_tol", "1e-5"}});
  } else {
    d.push_back({"solver.mass", "0.0"});
  }
  return d;
}

const Defaults& defaults(Experiment e) {
  static const std::map<Experiment, Defaults> table = [] {
    std::map<Experiment, Defaults> t;
    t[Experiment::kg_locality] = wave_defaults(false);
    t[Experiment::em_locality] = wave_defaults(true);
    t[Experiment::dirac_locality] = {
        {"grid.extent", "1024"},       {"grid.length", "1.0"},
        {"grid.levels", "512, 1024, 2048"},
        {"region.center", "0.3"},      {"region.radius", "0.15"},
        {"region.bump_width", "0.05"}, {"region.gap", "0.008"},
        {"solver.mass", "1.0"},        {"solver.cfl", "0.5"},
        {"solver.steps", "1000"},      {"solver.seeds", "1"},
        {"checks.gamma_tol", "1e-14"}, {"checks.drift_tol", "1e-12"},
        {"checks.min_order", "1.9"},   {"checks.floor", "1e-15"},
        {"checks.energy_floor", "1e-30"}};
    t[Experiment::sqrt_kg_leakage] = {
        {"grid.levels", "1024, 2048, 4096"}, {"grid.length", "20.48"},
        {"region.center", "10.24"},          {"region.bump_width", "0.5"},
        {"solver.mass", "1.0"},              {"solver.time", "2.0"},
        {"solver.cfl", "0.5"},               {"checks.leakage_floor", "1e-8"},
        {"checks.stability_max", "0.5"},     {"checks.control_ceiling", "1e-10"},
        {"checks.min_order", "1.9"},         {"checks.contrast", "1e3"}};
    t[Experiment::gaussian_locality] = {
        {"grid.extent", "256"},          {"region.radius", "50"},
        {"region.margin", "32"},         {"solver.mass", "0.5"},
        {"solver.dt", "0.5"},            {"solver.time", "16"},
        {"solver.tail_max_margin", "38"}, {"solver.tail_step", "2"},
        {"checks.purity_tol", "1e-10"},  {"checks.r2_min", "0.95"},
        {"checks.tail_floor", "1e-13"}};
    t[Experiment::entropy_scan] = {
        {"grid.extent", "128"},           {"solver.mass", "1e-3"},
        {"solver.lengths", "4, 8, 16, 32"}, {"solver.symmetry_extent", "64"},
        {"solver.symmetry_mass", "0.3"},  {"solver.intervals", "10"},
        {"solver.seeds", "1"},            {"checks.symmetry_tol", "1e-8"},
        {"checks.slope_min", "0.25"},     {"checks.slope_max", "0.45"}};
    t[Experiment::two_point_scan] = {
        {"solver.mass", "1.0"},
        {"solver.sigma", "0.1"},
        {"solver.mr_points", "0.5, 1, 2, 3, 4, 5"},
        {"solver.times", "0.5, 1, 1.5, 2"},
        {"solver.offsets", "1, 2"},
        {"solver.falloff_r", "4, 5, 6, 7, 8"},
        {"solver.falloff_t", "1.0"},
        {"checks.wightman_rtol", "1e-6"},
        {"checks.pj_tol", "1e-8"},
        {"checks.contrast", "1e3"},
        {"checks.falloff_rtol", "0.2"}};
    t[Experiment::nw_probe] = {
        {"grid.levels", "2048, 4096, 8192"}, {"grid.length", "81.92"},
        {"region.center", "40.96"},          {"region.radius", "3.0"},
        {"region.bump_width", "0.5"},        {"region.gap", "3.0"},
        {"solver.mass", "1.0"},              {"solver.time", "2.0"},
        {"solver.distances", "4, 6, 8, 10, 12, 14, 16"},
        {"checks.min_penetration", "1e-13"}, {"checks.max_order", "0.5"},
        {"checks.rate_rtol", "0.2"}};
    t[Experiment::fock_regional] = {
        {"grid.extent", "12"},       {"grid.length", "6.0"},
        {"region.sites", "1, 2, 3, 7, 8, 11"},
        {"solver.n_max", "2"},       {"solver.states", "8"},
        {"solver.seeds", "1"},       {"checks.trace_tol", "1e-10"},
        {"checks.eig_tol", "1e-10"}, {"checks.purity_tol", "1e-12"},
        {"checks.binomial_tol", "1e-12"}};
    t[Experiment::nonseparability] = {{"checks.reduced_tol", "1e-15"}};
    for (auto& [e, d] : t) d.insert(d.end(), common_defaults().begin(), common_defaults().end());
    return t;
  }();
  return table.at(e);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_snake(const std::string& k) {
  if (k.empty() || !(k[0] >= 'a' && k[0] <= 'z')) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::optional<double> to_real(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::optional<std::int64_t> to_int(const std::string& s) {
  std::int64_t v = 0;
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(std::string raw) {
  raw = trim(raw);
  if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']')
    raw = trim(raw.substr(1, raw.size() - 2));
  std::vector<std::string> items;
  if (raw.empty()) return items;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

// Converts raw text to the key's type; nullopt plus message on failure.
std::optional<Value> convert(const std::string& key, Type type, const std::string& raw,
                             std::string& err) {
  switch (type) {
    case Type::real: {
      if (auto v = to_real(raw)) return Value{*v};
      err = key + ": expected a number, got '" + raw + "'";
      return std::nullopt;
    }
    case Type::integer: {
      if (auto v = to_int(raw)) return Value{*v};
      err = key + ": expected an integer, got '" + raw + "'";
      return std::nullopt;
    }
    case Type::boolean: {
      if (raw == "true") return Value{true};
      if (raw == "false") return Value{false};
      err = key + ": expected true or false, got '" + raw + "'";
      return std::nullopt;
    }
    case Type::string:
      return Value{unquote(raw)};
    case Type::reals: {
      std::vector<double> out;
      for (const auto& item : split_list(raw)) {
        auto v = to_real(item);
        if (!v) {
          err = key + ": expected a comma-separated list of numbers, got '" + raw + "'";
          return std::nullopt;
        }
        out.push_back(*v);
      }
      return Value{out};
    }
    case Type::integers: {
      std::vector<std::int64_t> out;
      for (const auto& item : split_list(raw)) {
        auto v = to_int(item);
        if (!v) {
          err = key + ": expected a comma-separated list of integers, got '" + raw + "'";
          return std::nullopt;
        }
        out.push_back(*v);
      }
      return Value{out};
    }
  }
  return std::nullopt;
}

struct RawEntry {
  std::string value;
  std::size_t line;
};

// Cross-field rules that depend on the experiment. Messages use the line of
// the first key involved that the user set.
void cross_checks(const ScenarioConfig& c, std::vector<ConfigIssue>& issues) {
  auto line_of = [&](std::initializer_list<const char*> keys) -> std::size_t {
    for (const char* k : keys)
      if (c.user_set(k)) return c.lines.at(k);
    return 0;
  };
  auto fail = [&](std::initializer_list<const char*> keys, std::string msg) {
    issues.push_back({line_of(keys), std::move(msg)});
  };
  const auto e = c.experiment;
  const bool wave = e == Experiment::kg_locality || e == Experiment::em_locality;
  if (wave || e == Experiment::dirac_locality) {
    const double L = c.real("grid.length"), ctr = c.real("region.center"),
                 r = c.real("region.radius"), w = c.real("region.bump_width"),
                 gap = c.real("region.gap");
    const double jitter = wave ? c.real("region.jitter") : 0.0;
    std::vector<std::size_t> extents{c.count("grid.extent")};
    for (auto n : c.integers("grid.levels")) extents.push_back(static_cast<std::size_t>(n));
    const double h = L / static_cast<double>(*std::min_element(extents.begin(), extents.end()));
    if (ctr - r <= 0.0 || ctr + r >= L - h)
      fail({"region.center", "region.radius"}, "region ball must lie strictly inside the grid");
    if (ctr + r + gap + 2.0 * w + jitter >= L - h)
      fail({"region.gap", "region.bump_width", "region.jitter"},
           "perturbation bump (center + radius + gap + 2 bump_width + jitter) must fit inside "
           "the grid");
    if (e == Experiment::dirac_locality && c.integers("grid.levels").empty())
      fail({"grid.levels"}, "dirac_locality needs three or more refinement levels");
  }
  if (e == Experiment::em_locality && c.real("solver.source_width") * 4 >= c.real("grid.length"))
    fail({"solver.source_width"}, "source_width must be below a quarter of the grid length");
  if (e == Experiment::sqrt_kg_leakage) {
    const double L = c.real("grid.length"), ctr = c.real("region.center"),
                 reach = c.real("region.bump_width") + c.real("solver.time");
    if (c.real("solver.mass") <= 0.0) fail({"solver.mass"}, "sqrt_kg_leakage needs mass > 0");
    if (c.integers("grid.levels").empty())
      fail({"grid.levels"}, "sqrt_kg_leakage needs three or more refinement levels");
    if (ctr - reach <= 0.0 || ctr + reach >= L * 0.99)
      fail({"region.center", "solver.time"},
           "bump support dilated by the light cone must stay inside the grid");
  }
  if (e == Experiment::nw_probe) {
    const double L = c.real("grid.length"), ctr = c.real("region.center"),
                 r = c.real("region.radius"), w = c.real("region.bump_width"),
                 T = c.real("solver.time");
    if (c.real("solver.mass") <= 0.0) fail({"solver.mass"}, "nw_probe needs mass > 0");
    if (T >= r) fail({"solver.time", "region.radius"}, "time must be below the region radius");
    if (c.integers("grid.levels").empty())
      fail({"grid.levels"}, "nw_probe needs three or more refinement levels");
    const auto& ds = c.reals("solver.distances");
    const double far = std::max(c.real("region.gap"), *std::max_element(ds.begin(), ds.end()));
    if (ctr - r <= 0.0 || ctr + r + far + 2 * w >= L)
      fail({"region.center", "solver.distances", "region.gap"},
           "region and probe bumps must fit inside the grid");
  }
  if (e == Experiment::gaussian_locality) {
    const auto n = static_cast<double>(c.count("grid.extent"));
    const double r = c.real("region.radius"), d = static_cast<double>(c.count("region.margin"));
    const double tail = static_cast<double>(c.count("solver.tail_max_margin"));
    if (c.real("solver.mass") <= 0.0) fail({"solver.mass"}, "gaussian_locality needs mass > 0");
    if (n / 2 + r + d >= n)
      fail({"region.radius", "region.margin", "grid.extent"},
           "region plus margin must fit in the right half of the chain");
    if (n / 2 + d - tail - 2 * r < 0)
      fail({"solver.tail_max_margin", "region.radius"},
           "tail scan regions must fit on the chain");
    if (c.real("solver.time") >= r)
      fail({"solver.time", "region.radius"}, "tail time must be below the region radius");
  }
  if (e == Experiment::entropy_scan) {
    const auto& ls = c.integers("solver.lengths");
    if (static_cast<std::size_t>(ls.back()) >= c.count("grid.extent"))
      fail({"solver.lengths", "grid.extent"}, "interval lengths must be below the chain extent");
    if (c.real("solver.mass") <= 0.0) fail({"solver.mass"}, "entropy_scan needs mass > 0");
  }
  if (e == Experiment::two_point_scan && c.real("solver.mass") <= 0.0)
    fail({"solver.mass"}, "two-point functions need mass > 0");
  if (e == Experiment::two_point_scan && c.real("solver.sigma") * 20 * c.real("solver.mass") > 8)
    fail({"solver.sigma"}, "sigma is too wide for the momentum cutoff (sigma * 20 m must be <= 8)");
  if (e == Experiment::fock_regional) {
    const auto n = c.count("grid.extent");
    if (n > 16) fail({"grid.extent"}, "fock_regional supports at most 16 sites");
    for (auto s : c.integers("region.sites"))
      if (static_cast<std::size_t>(s) >= n) {
        fail({"region.sites"}, "region site " + std::to_string(s) + " is outside the lattice");
        break;
      }
  }
}

}  // namespace

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> v{
      Experiment::em_locality,     Experiment::kg_locality,       Experiment::dirac_locality,
      Experiment::sqrt_kg_leakage, Experiment::gaussian_locality, Experiment::entropy_scan,
      Experiment::two_point_scan,  Experiment::nw_probe,          Experiment::fock_regional,
      Experiment::nonseparability};
  return v;
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::em_locality: return "em_locality";
    case Experiment::kg_locality: return "kg_locality";
    case Experiment::dirac_locality: return "dirac_locality";
    case Experiment::sqrt_kg_leakage: return "sqrt_kg_leakage";
    case Experiment::gaussian_locality: return "gaussian_locality";
    case Experiment::entropy_scan: return "entropy_scan";
    case Experiment::two_point_scan: return "two_point_scan";
    case Experiment::nw_probe: return "nw_probe";
    case Experiment::fock_regional: return "fock_regional";
    case Experiment::nonseparability: return "nonseparability";
  }
  return "?";
}

std::string summary(Experiment e) {
  switch (e) {
    case Experiment::em_locality:
      return "Lorenz-gauge potentials with a moving neutral source: twin-run cone leakage, "
             "frustum energy, Lorenz residual";
    case Experiment::kg_locality:
      return "Klein-Gordon twin runs: inside-cone differences or leakage orders and frustum "
             "energy";
    case Experiment::dirac_locality:
      return "Dirac algebra, spectral unitarity, plane-wave order, exact numerical cone, "
             "probability frustum";
    case Experiment::sqrt_kg_leakage:
      return "first-order sqrt-KG leakage outside the light cone against a second-order "
             "control";
    case Experiment::gaussian_locality:
      return "lattice vacuum: purity, exact locality of symplectic steps, exponential tail";
    case Experiment::entropy_scan:
      return "vacuum entanglement: complement symmetry, mutual information, log scaling";
    case Experiment::two_point_scan:
      return "Wightman, Pauli-Jordan and Newton-Wigner two-point functions";
    case Experiment::nw_probe:
      return "Newton-Wigner evolution reaching into the contracting cone";
    case Experiment::fock_regional:
      return "Newton-Wigner Fock states reduced to a lattice region";
    case Experiment::nonseparability:
      return "two-qubit singlet/triplet reduced states and a local flip";
  }
  return "";
}

ConfigErrors::ConfigErrors(std::vector<ConfigIssue> issues)
    : ConfigError([&] {
        std::string msg = std::to_string(issues.size()) + " configuration error(s):";
        for (const auto& i : issues)
          msg += "\n  " + (i.line ? "line " + std::to_string(i.line) + ": " : std::string()) +
                 i.message;
        return msg;
      }()),
      issues_(std::move(issues)) {}

namespace {
template <typename T>
const T& get_as(const ScenarioConfig& c, const std::string& key) {
  const auto it = c.values.find(key);
  if (it == c.values.end())
    throw ConfigError("key " + key + " is not used by " + to_string(c.experiment));
  if (const auto* v = std::get_if<T>(&it->second)) return *v;
  throw ConfigError("key " + key + " has an unexpected type");
}
}  // namespace

double ScenarioConfig::real(const std::string& key) const { return get_as<double>(*this, key); }
std::int64_t ScenarioConfig::integer(const std::string& key) const {
  return get_as<std::int64_t>(*this, key);
}
std::size_t ScenarioConfig::count(const std::string& key) const {
  return static_cast<std::size_t>(std::max<std::int64_t>(0, integer(key)));
}
bool ScenarioConfig::flag(const std::string& key) const { return get_as<bool>(*this, key); }
const std::string& ScenarioConfig::text(const std::string& key) const {
  return get_as<std::string>(*this, key);
}
const std::vector<double>& ScenarioConfig::reals(const std::string& key) const {
  return get_as<std::vector<double>>(*this, key);
}
const std::vector<std::int64_t>& ScenarioConfig::integers(const std::string& key) const {
  return get_as<std::vector<std::int64_t>>(*this, key);
}

void ScenarioConfig::override_seed(std::uint64_t seed) {
  const auto it = values.find("solver.seeds");
  if (it != values.end()) it->second = std::vector<std::int64_t>{static_cast<std::int64_t>(seed)};
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = to_string(experiment);
  j["name"] = name;
  for (const auto& [key, v] : values) {
    const auto dot = key.find('.');
    auto& slot = j[key.substr(0, dot)][key.substr(dot + 1)];
    std::visit([&](const auto& x) { slot = x; }, v);
  }
  return j;
}

ScenarioConfig parse_config(std::string_view text) {
  static const std::set<std::string> sections{"grid", "region", "solver", "checks", "output"};
  std::vector<ConfigIssue> issues;
  std::map<std::string, RawEntry> raw;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  bool section_ok = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const auto hash = s.find(" #");
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.front() == '[') {
      if (s.back() != ']') {
        issues.push_back({line_no, "malformed section header '" + s + "'"});
        section_ok = false;
        continue;
      }
      section = trim(s.substr(1, s.size() - 2));
      section_ok = sections.count(section) > 0;
      if (!section_ok)
        issues.push_back({line_no, "unknown section [" + section +
                                       "] (expected grid, region, solver, checks, output)"});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, "expected 'key = value', got '" + s + "'"});
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!is_snake(key)) {
      issues.push_back({line_no, "key '" + key + "' is not lower_snake_case"});
      continue;
    }
    if (!section_ok) continue;  // already reported with the header
    const std::string full = section.empty() ? key : section + "." + key;
    if (section.empty() && key != "experiment" && key != "name") {
      issues.push_back({line_no, "key '" + key + "' must appear inside a section"});
      continue;
    }
    if (raw.count(full)) {
      issues.push_back({line_no, "duplicate key '" + full + "' (first set on line " +
                                     std::to_string(raw[full].line) + ")"});
      continue;
    }
    raw[full] = {value, line_no};
  }

  ScenarioConfig cfg;
  std::optional<Experiment> exp;
  if (!raw.count("experiment")) {
    issues.push_back({0, "missing required key 'experiment'"});
  } else {
    const auto& name = raw["experiment"];
    for (auto e : all_experiments())
      if (to_string(e) == name.value) exp = e;
    if (!exp) {
      std::string valid;
      for (auto e : all_experiments()) valid += (valid.empty() ? "" : ", ") + to_string(e);
      issues.push_back({name.line, "unknown experiment '" + name.value +
                                       "'; valid names: " + valid});
    }
  }
  if (exp) cfg.experiment = *exp;
  cfg.name = raw.count("name") ? unquote(raw["name"].value) : (exp ? to_string(*exp) : "");

  std::set<std::string> applicable;
  if (exp)
    for (const auto& [k, v] : defaults(*exp)) applicable.insert(k);

  for (const auto& [key, entry] : raw) {
    if (key == "experiment" || key == "name") continue;
    const auto spec = schema().find(key);
    if (spec == schema().end()) {
      issues.push_back({entry.line, "unknown key '" + key + "'"});
      continue;
    }
    if (exp && !applicable.count(key)) {
      issues.push_back({entry.line, "key '" + key + "' is not used by experiment " +
                                        to_string(*exp)});
      continue;
    }
    std::string err;
    auto v = convert(key, spec->second.type, entry.value, err);
    if (!v) {
      issues.push_back({entry.line, err});
      continue;
    }
    if (spec->second.rule)
      if (auto msg = spec->second.rule(*v)) {
        issues.push_back({entry.line, *msg});
        continue;
      }
    cfg.values[key] = std::move(*v);
    cfg.lines[key] = entry.line;
  }

  if (exp) {
    for (const auto& [key, text_default] : defaults(*exp)) {
      if (cfg.values.count(key) || raw.count(key)) continue;
      std::string err;
      auto v = convert(key, schema().at(key).type, text_default, err);
      cfg.values[key] = std::move(*v);
    }
    // Only meaningful when every value converted.
    bool complete = true;
    for (const auto& [key, d] : defaults(*exp)) complete = complete && cfg.values.count(key);
    if (complete) cross_checks(cfg, issues);
  }

  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(),
                     [](const auto& a, const auto& b) { return a.line < b.line; });
    throw ConfigErrors(std::move(issues));
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigErrors({{0, "cannot read config file '" + path.string() + "'"}});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> documented_keys(Experiment e) {
  std::vector<std::string> out;
  for (const auto& [k, v] : defaults(e)) out.push_back(k + " = " + v);
  return out;
}

}  // namespace conelab::scenario

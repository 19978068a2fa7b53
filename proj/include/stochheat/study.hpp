#pragma once

// Convergence studies driven by a flat `key = value` configuration, with CSV
// output. Level lists hold base-2 exponents: dt = T 2^-e, dx = 2^-e,
// dtau = T 2^-e, h = 2^-e. Lists are written `a..b` (inclusive) or `a,b,c`;
// `none` marks a list that does not apply to the study.

#include "stochheat/error_lab.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace stochheat {

/// Invalid configuration or command-line input.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class StudyKind { model_space, model_time, tdr, sdr, total, deterministic_cn };

inline std::string to_string(StudyKind kind) {
  switch (kind) {
  case StudyKind::model_space: return "model-space";
  case StudyKind::model_time: return "model-time";
  case StudyKind::tdr: return "tdr";
  case StudyKind::sdr: return "sdr";
  case StudyKind::total: return "total";
  case StudyKind::deterministic_cn: return "deterministic-cn";
  }
  return "?";
}

inline StudyKind parse_study_kind(const std::string &s) {
  for (auto kind : {StudyKind::model_space, StudyKind::model_time, StudyKind::tdr, StudyKind::sdr,
                    StudyKind::total, StudyKind::deterministic_cn})
    if (to_string(kind) == s)
      return kind;
  throw ConfigError("unknown study kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Scalar formatting and parsing.

/// Shortest form is not required; 17 significant digits round-trip doubles.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos)
    return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class Int> Int parse_integer(const std::string &s, const std::string &key) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("invalid integer for '" + key + "': '" + s + "'");
  return value;
}

inline double parse_real(const std::string &s, const std::string &key) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
    throw ConfigError("invalid number for '" + key + "': '" + s + "'");
  return value;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Level lists.

struct LevelList {
  bool applicable = false;
  std::vector<int> exponents; // strictly increasing

  static LevelList none() { return {}; }
  static LevelList range(int first, int last) {
    LevelList l{true, {}};
    for (int e = first; e <= last; ++e)
      l.exponents.push_back(e);
    return l;
  }
  static LevelList single(int e) { return {true, {e}}; }

  std::size_t size() const { return exponents.size(); }
  bool swept() const { return exponents.size() > 1; }

  friend bool operator==(const LevelList &, const LevelList &) = default;
};

inline constexpr int max_level_exponent = 24;

inline LevelList parse_level_list(const std::string &text, const std::string &key) {
  const std::string s = detail::trim(text);
  if (s == "none")
    return LevelList::none();
  if (s.empty())
    throw ConfigError("empty level list for '" + key + "'");
  LevelList list{true, {}};
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const int a = detail::parse_integer<int>(detail::trim(s.substr(0, dots)), key);
    const int b = detail::parse_integer<int>(detail::trim(s.substr(dots + 2)), key);
    if (b < a)
      throw ConfigError("empty level range for '" + key + "'");
    list = LevelList::range(a, b);
  } else {
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
      list.exponents.push_back(detail::parse_integer<int>(detail::trim(item), key));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const int e = list.exponents[i];
    if (e < 0 || e > max_level_exponent)
      throw ConfigError("level exponent out of range [0, 24] for '" + key + "'");
    if (i > 0 && e <= list.exponents[i - 1])
      throw ConfigError("level list for '" + key + "' must be strictly increasing");
  }
  return list;
}

inline std::string format_level_list(const LevelList &list) {
  if (!list.applicable)
    return "none";
  const auto &e = list.exponents;
  bool consecutive = e.size() > 2;
  for (std::size_t i = 1; i < e.size(); ++i)
    consecutive = consecutive && e[i] == e[i - 1] + 1;
  if (consecutive)
    return std::to_string(e.front()) + ".." + std::to_string(e.back());
  std::string out;
  for (std::size_t i = 0; i < e.size(); ++i)
    out += (i ? "," : "") + std::to_string(e[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Truncation policy.

struct KPolicy {
  enum class Kind { tail, fixed, noise_multiple };
  Kind kind = Kind::tail;
  double value = 1e-8;

  /// Modes to keep for a noise grid with j_star space cells.
  int resolve(int j_star) const {
    switch (kind) {
    case Kind::tail: return truncation_for_tolerance(value, 2.0);
    case Kind::fixed: return static_cast<int>(value);
    case Kind::noise_multiple: return static_cast<int>(value) * j_star;
    }
    return 1;
  }

  friend bool operator==(const KPolicy &, const KPolicy &) = default;
};

inline KPolicy parse_k_policy(const std::string &text) {
  const std::string s = detail::trim(text);
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ConfigError("k_policy must be tail:TOL, fixed:N or noise-multiple:C");
  const std::string name = s.substr(0, colon);
  const std::string arg = s.substr(colon + 1);
  if (name == "tail") {
    const double tol = detail::parse_real(arg, "k_policy");
    if (!(tol > 0.0))
      throw ConfigError("k_policy tail tolerance must be positive");
    return {KPolicy::Kind::tail, tol};
  }
  if (name == "fixed" || name == "noise-multiple") {
    const int n = detail::parse_integer<int>(arg, "k_policy");
    if (n < 1)
      throw ConfigError("k_policy count must be >= 1");
    return {name == "fixed" ? KPolicy::Kind::fixed : KPolicy::Kind::noise_multiple,
            static_cast<double>(n)};
  }
  throw ConfigError("unknown k_policy '" + name + "'");
}

inline std::string format_k_policy(const KPolicy &p) {
  switch (p.kind) {
  case KPolicy::Kind::tail: return "tail:" + format_double(p.value);
  case KPolicy::Kind::fixed: return "fixed:" + std::to_string(static_cast<int>(p.value));
  case KPolicy::Kind::noise_multiple:
    return "noise-multiple:" + std::to_string(static_cast<int>(p.value));
  }
  return "";
}

// ---------------------------------------------------------------------------
// Configuration.

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads `key = value` lines; `#` starts a comment.
inline KeyValues parse_key_values(std::istream &in, const std::string &source = "config") {
  KeyValues out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError(source + ":" + std::to_string(number) + ": missing key");
    out.emplace_back(key, detail::trim(line.substr(eq + 1)));
  }
  return out;
}

/// One `key=value` override as given on the command line.
inline std::pair<std::string, std::string> parse_override(const std::string &text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || detail::trim(text.substr(0, eq)).empty())
    throw ConfigError("override must have the form key=value: '" + text + "'");
  return {detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1))};
}

struct StudyConfig {
  StudyKind study = StudyKind::model_space;
  double horizon = 1.0;
  LevelList dt, dx, dtau, h;
  KPolicy k_policy;
  std::uint64_t seed = 1;
  int samples = 0;
  int fit_finest = 0; // 0: fit all levels
  std::string out = "-";

  friend bool operator==(const StudyConfig &, const StudyConfig &) = default;

  static StudyConfig defaults(StudyKind kind) {
    StudyConfig c;
    c.study = kind;
    switch (kind) {
    case StudyKind::model_space:
      c.dt = LevelList::single(16);
      c.dx = LevelList::range(3, 8);
      break;
    case StudyKind::model_time:
      c.dt = LevelList::range(4, 12);
      c.dx = LevelList::single(10);
      break;
    case StudyKind::tdr:
      c.dt = LevelList::single(10);
      c.dx = LevelList::single(10);
      c.dtau = LevelList::range(4, 9);
      c.k_policy = {KPolicy::Kind::noise_multiple, 4};
      break;
    case StudyKind::sdr:
      c.dt = LevelList::single(12);
      c.dx = LevelList::single(10);
      c.dtau = LevelList::single(12);
      c.h = LevelList::range(3, 7);
      c.k_policy = {KPolicy::Kind::noise_multiple, 4};
      break;
    case StudyKind::total:
      c.dt = LevelList::single(10);
      c.dx = LevelList::single(10);
      c.dtau = LevelList::range(4, 9);
      c.h = LevelList::single(7);
      c.k_policy = {KPolicy::Kind::noise_multiple, 4};
      break;
    case StudyKind::deterministic_cn:
      c.dtau = LevelList::range(4, 10);
      c.k_policy = {KPolicy::Kind::fixed, 1};
      break;
    }
    return c;
  }

  /// Which lists a study kind reads: dt, dx, dtau, h.
  static std::array<bool, 4> uses(StudyKind kind) {
    switch (kind) {
    case StudyKind::model_space:
    case StudyKind::model_time: return {true, true, false, false};
    case StudyKind::tdr: return {true, true, true, false};
    case StudyKind::sdr:
    case StudyKind::total: return {true, true, true, true};
    case StudyKind::deterministic_cn: return {false, false, true, false};
    }
    return {};
  }

  std::array<const LevelList *, 4> lists() const { return {&dt, &dx, &dtau, &h}; }

  /// Index into lists() of the swept axis.
  int swept_axis() const {
    const auto ls = lists();
    for (int i = 0; i < 4; ++i)
      if (ls[static_cast<std::size_t>(i)]->swept())
        return i;
    // Nothing swept: single-level study along the natural axis.
    switch (study) {
    case StudyKind::model_space: return 1;
    case StudyKind::model_time: return 0;
    case StudyKind::sdr: return 3;
    case StudyKind::deterministic_cn: return h.applicable ? 3 : 2;
    default: return 2;
    }
  }

  int levels() const {
    return static_cast<int>(lists()[static_cast<std::size_t>(swept_axis())]->size());
  }

  void validate() const {
    static const char *names[] = {"dt", "dx", "dtau", "h"};
    auto used = uses(study);
    if (study == StudyKind::deterministic_cn)
      used[3] = h.applicable; // optional: FEM space sweep
    const auto ls = lists();
    int swept = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (used[i] && !ls[i]->applicable)
        throw ConfigError(std::string("level list '") + names[i] + "' is required for study " +
                          to_string(study));
      if (!used[i] && ls[i]->applicable)
        throw ConfigError(std::string("level list '") + names[i] + "' does not apply to study " +
                          to_string(study) + " (use none)");
      swept += ls[i]->swept();
    }
    if (swept > 1)
      throw ConfigError("at most one level list may hold more than one entry");
    if (study == StudyKind::model_space && dt.swept())
      throw ConfigError("model-space sweeps dx; dt must be a single level");
    if (study == StudyKind::model_time && dx.swept())
      throw ConfigError("model-time sweeps dt; dx must be a single level");
    if (study == StudyKind::tdr && !dtau.swept() && (dt.swept() || dx.swept()))
      throw ConfigError("tdr sweeps dtau");
    if (study == StudyKind::sdr && (dt.swept() || dx.swept() || dtau.swept()))
      throw ConfigError("sdr sweeps h");
    if (study == StudyKind::total && (dt.swept() || dx.swept()))
      throw ConfigError("total sweeps dtau or h");
    if (study == StudyKind::deterministic_cn && h.applicable && dtau.swept())
      throw ConfigError("deterministic-cn with an h list needs a single dtau level");
    if (h.applicable)
      for (int e : h.exponents)
        if (e < 1)
          throw ConfigError("h exponents must be >= 1 (at least two mesh intervals)");
    if (!(horizon > 0.0))
      throw ConfigError("horizon must be positive");
    if (samples < 0)
      throw ConfigError("samples must be >= 0");
    if (samples == 1)
      throw ConfigError("samples must be 0 or >= 2");
    if (fit_finest < 0 || fit_finest == 1 || fit_finest == 2)
      throw ConfigError("fit window must be all or finest:N with N >= 3");
    if (fit_finest > levels())
      throw ConfigError("fit window larger than the number of levels");
  }

  /// Canonical text form; parse(serialize()) reproduces the config.
  std::string serialize() const {
    std::ostringstream o;
    o << "study = " << to_string(study) << '\n';
    o << "horizon = " << format_double(horizon) << '\n';
    o << "dt = " << format_level_list(dt) << '\n';
    o << "dx = " << format_level_list(dx) << '\n';
    o << "dtau = " << format_level_list(dtau) << '\n';
    o << "h = " << format_level_list(h) << '\n';
    o << "k_policy = " << format_k_policy(k_policy) << '\n';
    o << "seed = " << seed << '\n';
    o << "samples = " << samples << '\n';
    o << "fit = " << (fit_finest == 0 ? std::string("all") : "finest:" + std::to_string(fit_finest)) << '\n';
    o << "out = " << out << '\n';
    return o.str();
  }
};

/// Builds a config from key/value pairs; later pairs override earlier ones.
/// Unset keys take the defaults of the study kind.
inline StudyConfig build_study_config(const KeyValues &pairs) {
  std::map<std::string, std::string> kv;
  for (const auto &[k, v] : pairs)
    kv[k] = v;
  const auto study = kv.find("study");
  if (study == kv.end())
    throw ConfigError("missing required key 'study'");
  StudyConfig c = StudyConfig::defaults(parse_study_kind(study->second));
  for (const auto &[key, value] : kv) {
    if (key == "study")
      continue;
    if (key == "horizon")
      c.horizon = detail::parse_real(value, key);
    else if (key == "dt")
      c.dt = parse_level_list(value, key);
    else if (key == "dx")
      c.dx = parse_level_list(value, key);
    else if (key == "dtau")
      c.dtau = parse_level_list(value, key);
    else if (key == "h")
      c.h = parse_level_list(value, key);
    else if (key == "k_policy")
      c.k_policy = parse_k_policy(value);
    else if (key == "seed")
      c.seed = detail::parse_integer<std::uint64_t>(value, key);
    else if (key == "samples")
      c.samples = detail::parse_integer<int>(value, key);
    else if (key == "fit") {
      if (value == "all")
        c.fit_finest = 0;
      else if (value.rfind("finest:", 0) == 0)
        c.fit_finest = detail::parse_integer<int>(value.substr(7), key);
      else
        throw ConfigError("fit must be 'all' or 'finest:N'");
    } else if (key == "out") {
      if (value.empty())
        throw ConfigError("out must be a path or -");
      c.out = value;
    } else
      throw ConfigError("unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline StudyConfig parse_study_config(const std::string &text) {
  std::istringstream in(text);
  return build_study_config(parse_key_values(in));
}

// ---------------------------------------------------------------------------
// Execution.

namespace detail {

inline double level_value(double base, int exponent) { return std::ldexp(base, -exponent); }

inline int level_count(int exponent) { return 1 << exponent; }

} // namespace detail

/// Runs every level of the study; `log` receives warnings and notes.
inline ErrorReport run_study(const StudyConfig &config, std::ostream *log = nullptr) {
  config.validate();
  const double T = config.horizon;
  const int levels = config.levels();
  const int axis = config.swept_axis();
  auto at = [&](const LevelList &list, int level) -> std::optional<int> {
    if (!list.applicable)
      return std::nullopt;
    return list.swept() ? list.exponents[static_cast<std::size_t>(level)] : list.exponents.front();
  };
  auto note = [&](const std::string &msg) {
    if (log)
      *log << msg << '\n';
  };

  const bool mc_capable = config.study == StudyKind::tdr || config.study == StudyKind::sdr ||
                          config.study == StudyKind::total;
  if (config.samples > 0 && !mc_capable)
    note("note: Monte Carlo is not available for study " + to_string(config.study) +
         "; error_mc left empty");

  ErrorReport report;
  report.study = to_string(config.study);
  for (int level = 0; level < levels; ++level) {
    ErrorRow row;
    row.level = level + 1;
    const auto e_dt = at(config.dt, level), e_dx = at(config.dx, level);
    const auto e_dtau = at(config.dtau, level), e_h = at(config.h, level);
    if (e_dt)
      row.dt = detail::level_value(T, *e_dt);
    if (e_dx)
      row.dx = detail::level_value(1.0, *e_dx);
    if (e_dtau)
      row.dtau = detail::level_value(T, *e_dtau);
    if (e_h)
      row.h = detail::level_value(1.0, *e_h);
    const std::optional<double> swept[] = {row.dt, row.dx, row.dtau, row.h};
    row.resolution = *swept[axis];

    std::optional<NoiseDims> dims;
    if (e_dt && e_dx)
      dims = NoiseDims{detail::level_count(*e_dt), detail::level_count(*e_dx), T};
    const int K = config.k_policy.resolve(dims ? dims->j_star : 1);
    row.K = K;
    std::optional<Mesh> mesh;
    if (e_h)
      mesh = Mesh(detail::level_count(*e_h));
    const int M = e_dtau ? detail::level_count(*e_dtau) : 0;

    std::optional<ObservableSpec> mc_x, mc_y;
    switch (config.study) {
    case StudyKind::model_space:
    case StudyKind::model_time: {
      const ModelingError z = modeling_error_exact(T, *dims, K);
      if (z.warning)
        note("warning: level " + std::to_string(level + 1) + ": " + *z.warning);
      row.error_exact = z.value;
      break;
    }
    case StudyKind::tdr:
      row.error_exact = tdr_error_exact(M, *dims, M, K);
      mc_x = ObservableSpec::regularized(T, K, T);
      mc_y = ObservableSpec::time_discrete(M, M, K, T);
      break;
    case StudyKind::sdr:
      row.error_exact = sdr_error_exact(M, *dims, M, assemble(*mesh), K);
      mc_x = ObservableSpec::time_discrete(M, M, K, T);
      mc_y = ObservableSpec::fem(M, M, *mesh, T);
      break;
    case StudyKind::total:
      row.error_exact = total_error_exact(M, *dims, M, assemble(*mesh), K);
      mc_x = ObservableSpec::regularized(T, K, T);
      mc_y = ObservableSpec::fem(M, M, *mesh, T);
      break;
    case StudyKind::deterministic_cn: {
      const SpectralField v0 = SpectralField::mode(1, K);
      const double dtau = *row.dtau;
      const auto td = modified_cn_spectral(v0, M, dtau);
      if (mesh) {
        const FemSystem sys = assemble(*mesh);
        row.error_exact = l2t_error(td, modified_cn_fem(v0, sys, M, dtau), sys, TimeNorm::damped_midpoint);
      } else {
        row.error_exact = l2t_error(td, exact_heat_trajectory(v0, M, dtau));
      }
      break;
    }
    }
    if (!std::isfinite(row.error_exact))
      throw NumericalFailure("study " + report.study + ": non-finite error at level " +
                             std::to_string(level + 1));
    if (config.samples > 0 && mc_x && mc_y) {
      const McEstimate mc = mc_error(*mc_x, *mc_y, *dims, config.samples, config.seed);
      row.error_mc = std::sqrt(mc.mean);
      row.stderr_mc = mc.mean > 0.0 ? mc.stderr_ / (2.0 * std::sqrt(mc.mean)) : 0.0;
    }
    report.rows.push_back(row);
  }

  const int window = config.fit_finest == 0 ? levels : config.fit_finest;
  bool positive = true;
  for (const auto &r : report.rows)
    positive = positive && r.error_exact > 0.0;
  if (levels >= 3 && positive)
    report.refit(levels - window, window);
  return report;
}

inline constexpr const char *csv_header = "study,level,dt,dx,dtau,h,K,error_exact,error_mc,stderr";
inline constexpr const char *csv_na = "NA"; // field does not apply to the study

inline void write_csv(std::ostream &out, const ErrorReport &report) {
  auto opt = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string(csv_na); };
  out << csv_header << '\n';
  for (const auto &r : report.rows) {
    out << report.study << ',' << r.level << ',' << opt(r.dt) << ',' << opt(r.dx) << ','
        << opt(r.dtau) << ',' << opt(r.h) << ',' << (r.K ? std::to_string(*r.K) : std::string(csv_na))
        << ',' << format_double(r.error_exact) << ',' << opt(r.error_mc) << ','
        << opt(r.stderr_mc) << '\n';
  }
  if (report.window_size >= 3) {
    const bool all = report.window_size == static_cast<int>(report.rows.size());
    out << "# fit slope=" << format_double(report.fit.slope)
        << " intercept=" << format_double(report.fit.intercept)
        << " residual=" << format_double(report.fit.residual)
        << " window=" << (all ? std::string("all") : "finest:" + std::to_string(report.window_size))
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sample paths of the fully discrete scheme.

struct SamplePathConfig {
  int n_star = 64;
  int j_star = 64;
  int steps = 64;     // M
  int intervals = 32; // J_h
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string noise_in;  // optional binary noise grid to replay
  std::string noise_out; // optional binary dump of the grid used

  void validate() const {
    if (n_star < 1 || j_star < 1 || steps < 1)
      throw ConfigError("sample-path: n_star, j_star and steps must be >= 1");
    if (intervals < 2)
      throw ConfigError("sample-path: intervals must be >= 2");
    if (!(horizon > 0.0))
      throw ConfigError("sample-path: horizon must be positive");
  }
};

inline SamplePathConfig build_sample_path_config(const KeyValues &pairs) {
  SamplePathConfig c;
  for (const auto &[key, value] : pairs) {
    if (key == "n_star")
      c.n_star = detail::parse_integer<int>(value, key);
    else if (key == "j_star")
      c.j_star = detail::parse_integer<int>(value, key);
    else if (key == "steps")
      c.steps = detail::parse_integer<int>(value, key);
    else if (key == "intervals")
      c.intervals = detail::parse_integer<int>(value, key);
    else if (key == "horizon")
      c.horizon = detail::parse_real(value, key);
    else if (key == "seed")
      c.seed = detail::parse_integer<std::uint64_t>(value, key);
    else if (key == "out")
      c.out = value;
    else if (key == "noise_in")
      c.noise_in = value;
    else if (key == "noise_out")
      c.noise_out = value;
    else
      throw ConfigError("unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

/// The grid a sample path is driven by: replayed from noise_in or freshly sampled.
inline NoiseGrid sample_path_noise(const SamplePathConfig &c) {
  if (c.noise_in.empty())
    return sample(c.n_star, c.j_star, c.horizon, c.seed);
  std::ifstream in(c.noise_in, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open noise grid '" + c.noise_in + "'");
  try {
    return read_binary(in);
  } catch (const std::exception &e) {
    throw ConfigError("invalid noise grid '" + c.noise_in + "': " + e.what());
  }
}

/// One row per time level tau_0..tau_M, one column per interior node.
inline void write_sample_path(std::ostream &out, const NodalTrajectory &traj) {
  for (const auto &state : traj.states) {
    for (Eigen::Index i = 0; i < state.size(); ++i)
      out << (i ? "," : "") << format_double(state(i));
    out << '\n';
  }
}

} // namespace stochheat

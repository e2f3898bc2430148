#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/scenario.hpp"
#include "immfpf/text.hpp"

// Scenario files are sectioned key/value text:
//
//   # comment
//   [section]
//   key = value
//
// Sections: [model], [mode.1] ... [mode.M], [truth], [filter], [run] and the
// optional [oracle]. Mode indices in files are 1-based. config_schema()
// lists every key with its default.

namespace immfpf {

namespace ini {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

using Document = std::map<std::string, Section>;

inline Document parse(std::string_view content) {
  Document doc;
  Section* current = nullptr;
  std::string current_name;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::parse_error, where + "unterminated section header");
      current_name = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (current_name.empty()) fail(ErrorCode::parse_error, where + "empty section name");
      if (doc.count(current_name))
        fail(ErrorCode::parse_error, where + "duplicate section [" + current_name + "]");
      current = &doc[current_name];
      current->line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::parse_error, where + "expected 'key = value'");
    if (!current) fail(ErrorCode::parse_error, where + "key outside of any section");
    const std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) fail(ErrorCode::parse_error, where + "empty key");
    if (current->entries.count(key))
      fail(ErrorCode::parse_error, where + "duplicate key '" + key + "' in [" + current_name + "]");
    current->entries[key] = {std::string(text::trim(line.substr(eq + 1))), line_no};
  }
  return doc;
}

}  // namespace ini

namespace detail {

/// Typed access to one section; remembers which keys were consumed so that
/// leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(std::string name, const ini::Section* section)
      : name_(std::move(name)), section_(section) {}

  bool present() const { return section_ != nullptr; }

  const ini::Entry* find(const std::string& key) {
    used_.insert(key);
    if (!section_) return nullptr;
    const auto it = section_->entries.find(key);
    return it == section_->entries.end() ? nullptr : &it->second;
  }

  const ini::Entry& need(const std::string& key) {
    const auto* e = find(key);
    if (!e) fail(ErrorCode::validation_error, "missing key '" + key + "' in [" + name_ + "]");
    return *e;
  }

  double number(const std::string& key) { return to_number(key, need(key)); }
  double number(const std::string& key, double fallback) {
    const auto* e = find(key);
    return e ? to_number(key, *e) : fallback;
  }

  long long integer(const std::string& key) { return to_integer(key, need(key)); }
  long long integer(const std::string& key, long long fallback) {
    const auto* e = find(key);
    return e ? to_integer(key, *e) : fallback;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const auto* e = find(key);
    return e ? e->value : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    const auto* e = find(key);
    std::vector<double> out;
    if (!e) return out;
    for (auto tok : text::tokens(e->value)) {
      const auto v = text::to_double(tok);
      if (!v) fail(ErrorCode::parse_error, error_prefix(key, *e) + "bad number '" + std::string(tok) + "'");
      out.push_back(*v);
    }
    return out;
  }

  std::vector<long long> integers(const std::string& key) {
    const auto* e = find(key);
    std::vector<long long> out;
    if (!e) return out;
    for (auto tok : text::tokens(e->value)) {
      const auto v = text::to_integer(tok);
      if (!v) fail(ErrorCode::parse_error, error_prefix(key, *e) + "bad integer '" + std::string(tok) + "'");
      out.push_back(*v);
    }
    return out;
  }

  ScalarFunction function(const std::string& key) {
    const auto& e = need(key);
    try {
      return ScalarFunction::parse(e.value);
    } catch (const Error& err) {
      fail(ErrorCode::parse_error, error_prefix(key, e) + err.what());
    }
  }

  void reject_unknown() const {
    if (!section_) return;
    for (const auto& [key, entry] : section_->entries)
      if (!used_.count(key))
        fail(ErrorCode::parse_error, "line " + std::to_string(entry.line) + ": unknown key '" + key +
                                         "' in [" + name_ + "]");
  }

  std::string error_prefix(const std::string& key, const ini::Entry& e) const {
    return "line " + std::to_string(e.line) + ": [" + name_ + "] " + key + ": ";
  }

 private:
  double to_number(const std::string& key, const ini::Entry& e) const {
    const auto v = text::to_double(e.value);
    if (!v) fail(ErrorCode::parse_error, error_prefix(key, e) + "expected a number");
    return *v;
  }
  long long to_integer(const std::string& key, const ini::Entry& e) const {
    const auto v = text::to_integer(e.value);
    if (!v) fail(ErrorCode::parse_error, error_prefix(key, e) + "expected an integer");
    return *v;
  }

  std::string name_;
  const ini::Section* section_;
  std::set<std::string> used_;
};

inline std::vector<std::vector<double>> parse_generator(SectionReader& reader) {
  const auto& e = reader.need("generator");
  std::vector<std::vector<double>> rows;
  for (auto row_text : text::split(e.value, ';')) {
    std::vector<double> row;
    for (auto tok : text::tokens(row_text)) {
      if (tok == "*") {
        row.push_back(std::nan(""));
        continue;
      }
      const auto v = text::to_double(tok);
      if (!v) fail(ErrorCode::parse_error, reader.error_prefix("generator", e) + "bad entry '" + std::string(tok) + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != rows.size())
      fail(ErrorCode::validation_error, "generator must be square (row " + std::to_string(i + 1) + ")");
  return rows;
}

inline std::size_t mode_index(long long one_based, std::size_t n_modes, const std::string& what) {
  require(one_based >= 1 && static_cast<std::size_t>(one_based) <= n_modes,
          what + " must be a mode index between 1 and " + std::to_string(n_modes));
  return static_cast<std::size_t>(one_based - 1);
}

inline std::string join(const std::vector<double>& xs, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += text::format_double(xs[i]);
  }
  return out;
}

}  // namespace detail

inline ScenarioConfig config_from_document(const ini::Document& doc) {
  static const std::set<std::string> fixed_sections{"model", "truth", "filter", "run", "oracle"};
  std::size_t n_modes = 0;
  for (const auto& [name, section] : doc) {
    if (fixed_sections.count(name)) continue;
    if (name.rfind("mode.", 0) == 0) {
      const auto idx = text::to_integer(std::string_view(name).substr(5));
      if (idx && *idx >= 1) {
        n_modes = std::max<std::size_t>(n_modes, static_cast<std::size_t>(*idx));
        continue;
      }
    }
    fail(ErrorCode::parse_error,
         "line " + std::to_string(section.line) + ": unknown section [" + name + "]");
  }

  auto section = [&](const std::string& name) {
    const auto it = doc.find(name);
    return detail::SectionReader(name, it == doc.end() ? nullptr : &it->second);
  };

  ScenarioConfig c;
  auto model = section("model");
  if (!model.present()) fail(ErrorCode::validation_error, "missing [model] section");
  require(n_modes >= 1, "at least one [mode.N] section is required");
  for (std::size_t m = 1; m <= n_modes; ++m) {
    auto mode = section("mode." + std::to_string(m));
    if (!mode.present()) fail(ErrorCode::validation_error, "missing [mode." + std::to_string(m) + "] section");
    ModeDynamics dyn;
    dyn.drift = mode.function("drift");
    dyn.diffusion = mode.number("diffusion");
    dyn.observation = mode.function("observation");
    mode.reject_unknown();
    c.model.modes.push_back(std::move(dyn));
  }
  c.model.obs_noise = model.number("obs_noise");
  c.model.generator = validate_generator(detail::parse_generator(model));
  const std::string dist = model.string("initial_mode_dist", "uniform");
  if (dist == "uniform") {
    c.model.initial_mode_dist.assign(n_modes, 1.0 / static_cast<double>(n_modes));
  } else {
    c.model.initial_mode_dist = model.numbers("initial_mode_dist");
  }
  model.reject_unknown();

  auto truth = section("truth");
  if (!truth.present()) fail(ErrorCode::validation_error, "missing [truth] section");
  c.truth.x0 = truth.number("x0");
  const std::string source = truth.string("source", "schedule");
  if (source == "schedule") {
    c.truth.source = TruthSpec::Source::schedule;
  } else if (source == "generator") {
    c.truth.source = TruthSpec::Source::generator;
  } else {
    fail(ErrorCode::validation_error, "[truth] source must be 'schedule' or 'generator'");
  }
  c.truth.schedule.initial_mode = detail::mode_index(truth.integer("initial_mode", 1), n_modes, "initial_mode");
  const auto times = truth.numbers("switch_times");
  const auto modes = truth.integers("switch_modes");
  require(times.size() == modes.size(), "switch_times and switch_modes must have the same length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(i == 0 || times[i] > times[i - 1], "switch_times must be increasing");
    c.truth.schedule.switches.emplace_back(times[i], detail::mode_index(modes[i], n_modes, "switch_modes"));
  }
  truth.reject_unknown();

  auto filter = section("filter");
  if (!filter.present()) fail(ErrorCode::validation_error, "missing [filter] section");
  c.dt = filter.number("dt");
  require(c.dt > 0.0, "dt must be positive");
  c.horizon = filter.number("horizon");
  const long long particles = filter.integer("particles");
  require(particles >= 2, "particles must be at least 2");
  c.n_particles = static_cast<std::size_t>(particles);
  c.prior_mean = filter.number("prior_mean", c.truth.x0);
  c.prior_std = filter.number("prior_std");
  const std::string update = filter.string("mu_update", "euler");
  if (update == "euler") {
    c.mu_update = MuUpdate::euler;
  } else if (update == "bayes") {
    c.mu_update = MuUpdate::bayes;
  } else {
    fail(ErrorCode::validation_error, "[filter] mu_update must be 'euler' or 'bayes'");
  }
  c.clamp_floor = filter.number("clamp_floor", 1e-9);
  c.c_cap = filter.number("c_cap", 1e3);
  filter.reject_unknown();

  auto run = section("run");
  if (run.present()) {
    c.seeds.clear();
    for (auto s : run.integers("seeds")) {
      require(s >= 0, "seeds must be nonnegative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (c.seeds.empty()) c.seeds = {1};
    c.burn_in = run.number("burn_in", 1.0);
    c.output_dir = run.string("output_dir", "out");
    run.reject_unknown();
  }

  auto oracle = section("oracle");
  if (oracle.present()) {
    OracleSpec spec;
    spec.grid.x_min = oracle.number("x_min");
    spec.grid.x_max = oracle.number("x_max");
    const long long cells = oracle.integer("n_cells");
    require(cells >= 16, "n_cells must be at least 16");
    spec.grid.n_cells = static_cast<std::size_t>(cells);
    const long long sub = oracle.integer("substeps", 0);
    require(sub >= 0, "substeps must be nonnegative");
    spec.substeps = static_cast<std::size_t>(sub);
    spec.snapshot_times = oracle.numbers("snapshot_times");
    const std::string correction = oracle.string("correction", "euler");
    if (correction == "euler") {
      spec.correction = GridCorrection::euler;
    } else if (correction == "exponential") {
      spec.correction = GridCorrection::exponential;
    } else {
      fail(ErrorCode::validation_error, "[oracle] correction must be 'euler' or 'exponential'");
    }
    oracle.reject_unknown();
    c.oracle = std::move(spec);
  }

  c.validate();
  return c;
}

inline ScenarioConfig parse_config_text(std::string_view content) {
  return config_from_document(ini::parse(content));
}

inline ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Normalized form: every key explicit, numbers at 17 significant digits.
inline std::string write_config(const ScenarioConfig& c) {
  using detail::join;
  std::ostringstream os;
  const auto rows = c.model.generator.rows();
  os << "[model]\n";
  os << "obs_noise = " << text::format_double(c.model.obs_noise) << '\n';
  os << "generator = ";
  for (std::size_t i = 0; i < rows.size(); ++i) os << (i ? " ; " : "") << join(rows[i]);
  os << '\n';
  os << "initial_mode_dist = " << join(c.model.initial_mode_dist) << "\n\n";
  for (std::size_t m = 0; m < c.model.n_modes(); ++m) {
    const auto& mode = c.model.modes[m];
    os << "[mode." << m + 1 << "]\n";
    os << "drift = " << mode.drift.to_string() << '\n';
    os << "diffusion = " << text::format_double(mode.diffusion) << '\n';
    os << "observation = " << mode.observation.to_string() << "\n\n";
  }
  os << "[truth]\n";
  os << "source = " << (c.truth.source == TruthSpec::Source::schedule ? "schedule" : "generator") << '\n';
  os << "x0 = " << text::format_double(c.truth.x0) << '\n';
  os << "initial_mode = " << c.truth.schedule.initial_mode + 1 << '\n';
  std::vector<double> times;
  std::string modes;
  for (const auto& [t, m] : c.truth.schedule.switches) {
    times.push_back(t);
    modes += (modes.empty() ? "" : " ") + std::to_string(m + 1);
  }
  os << "switch_times = " << join(times) << '\n';
  os << "switch_modes = " << modes << "\n\n";
  os << "[filter]\n";
  os << "dt = " << text::format_double(c.dt) << '\n';
  os << "horizon = " << text::format_double(c.horizon) << '\n';
  os << "particles = " << c.n_particles << '\n';
  os << "prior_mean = " << text::format_double(c.prior_mean) << '\n';
  os << "prior_std = " << text::format_double(c.prior_std) << '\n';
  os << "mu_update = " << (c.mu_update == MuUpdate::euler ? "euler" : "bayes") << '\n';
  os << "clamp_floor = " << text::format_double(c.clamp_floor) << '\n';
  os << "c_cap = " << text::format_double(c.c_cap) << "\n\n";
  os << "[run]\n";
  os << "seeds =";
  for (auto s : c.seeds) os << ' ' << s;
  os << '\n';
  os << "burn_in = " << text::format_double(c.burn_in) << '\n';
  os << "output_dir = " << c.output_dir << '\n';
  if (c.oracle) {
    os << "\n[oracle]\n";
    os << "x_min = " << text::format_double(c.oracle->grid.x_min) << '\n';
    os << "x_max = " << text::format_double(c.oracle->grid.x_max) << '\n';
    os << "n_cells = " << c.oracle->grid.n_cells << '\n';
    os << "substeps = " << c.oracle->substeps << '\n';
    os << "snapshot_times = " << join(c.oracle->snapshot_times) << '\n';
    os << "correction = " << (c.oracle->correction == GridCorrection::euler ? "euler" : "exponential") << '\n';
  }
  return os.str();
}

inline std::string config_schema() {
  return R"(# Scenario configuration reference. '(required)' keys have no default.
# Lists accept spaces or commas. Mode indices are 1-based.
# Functions: poly:c0,c1,...  (c0 + c1*x + ...)   arctan:L[,s]  (s*atan(x/L))

[model]
obs_noise = (required)          # sigma_W > 0
generator = (required)          # rows split by ';', '*' fills the diagonal
initial_mode_dist = uniform     # 'uniform' or M probabilities summing to 1

[mode.N]                        # one section per mode, N = 1..M
drift = (required)              # function of x
diffusion = (required)          # sigma >= 0
observation = (required)        # function of x

[truth]
source = schedule               # 'schedule' or 'generator'
x0 = (required)
initial_mode = 1
switch_times =                  # increasing times (schedule source)
switch_modes =                  # mode taking effect at each switch time

[filter]
dt = (required)                 # > 0, horizon must be a multiple of dt
horizon = (required)
particles = (required)          # per mode, >= 2
prior_mean = <truth x0>
prior_std = (required)          # >= 0
mu_update = euler               # 'euler' or 'bayes'
clamp_floor = 1e-09             # in (0, 1/M)
c_cap = 1000                    # cap on interaction coefficients

[run]
seeds = 1                       # list of nonnegative integers
burn_in = 1                     # time units skipped after each switch
output_dir = out

[oracle]                        # optional; enables the grid oracle
x_min = (required)
x_max = (required)
n_cells = (required)            # >= 16
substeps = 0                    # transport sub-steps per dt, 0 = automatic
snapshot_times =                # times at which densities are exported
correction = euler              # observation factor: 'euler' (1 + d I) or 'exponential'
)";
}

}  // namespace immfpf

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/scenario.hpp"
#include "immfpf/text.hpp"

// CSV columns are fixed; numbers are written with 17 significant digits.
// obs.csv rows carry the left end t_k of each increment's interval.

namespace immfpf::io {

/// Writes to `path.tmp` and renames over `path`, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::io_error, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      fail(ErrorCode::io_error, "write to '" + tmp.string() + "' failed");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::io_error, "cannot rename onto '" + path.string() + "'");
  }
}

/// Several files written as a group: the content is held in memory until
/// commit(), which writes each file atomically.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  std::vector<std::filesystem::path> commit() const {
    std::vector<std::filesystem::path> written;
    for (const auto& [name, content] : files_) {
      write_file_atomic(dir_ / name, content);
      written.push_back(dir_ / name);
    }
    return written;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string truth_csv(const TruthTrajectory& truth) {
  std::ostringstream os;
  os << "t,x,mode\n";
  for (std::size_t k = 0; k < truth.states.size(); ++k)
    os << text::format_double(truth.times[k]) << ',' << text::format_double(truth.states[k]) << ','
       << truth.modes[k] + 1 << '\n';
  return os.str();
}

inline std::string observations_csv(const ObservationPath& obs) {
  std::ostringstream os;
  os << "t,dz\n";
  for (std::size_t k = 0; k < obs.increments.size(); ++k)
    os << text::format_double(static_cast<double>(k) * obs.dt) << ','
       << text::format_double(obs.increments[k]) << '\n';
  return os.str();
}

inline ObservationPath parse_observations_csv(const std::string& content, double dt) {
  ObservationPath obs;
  obs.dt = dt;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (line_no == 1 && trimmed == "t,dz") continue;
    const auto cols = text::split(trimmed, ',');
    if (cols.size() != 2) fail(ErrorCode::parse_error, "obs line " + std::to_string(line_no) + ": expected t,dz");
    const auto t = text::to_double(cols[0]);
    const auto dz = text::to_double(cols[1]);
    if (!t || !dz) fail(ErrorCode::parse_error, "obs line " + std::to_string(line_no) + ": bad number");
    const double expected = static_cast<double>(obs.increments.size()) * dt;
    if (std::abs(*t - expected) > 1e-6 * dt)
      fail(ErrorCode::validation_error,
           "obs line " + std::to_string(line_no) + ": time does not match the filter grid");
    obs.increments.push_back(*dz);
  }
  return obs;
}

inline ObservationPath read_observations_csv(const std::filesystem::path& path, double dt) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_observations_csv(buf.str(), dt);
}

inline std::string estimate_csv(const FilterTrace& trace) {
  std::ostringstream os;
  const std::size_t M = trace.mode_mean.empty() ? 0 : trace.mode_mean.front().size();
  os << "t,xhat";
  for (std::size_t m = 0; m < M; ++m) os << ",xhat_mode_" << m + 1;
  os << '\n';
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    os << text::format_double(trace.times[k]) << ',' << text::format_double(trace.estimate[k]);
    for (double v : trace.mode_mean[k]) os << ',' << text::format_double(v);
    os << '\n';
  }
  return os.str();
}

inline std::string mu_csv(const std::vector<double>& times,
                          const std::vector<std::vector<double>>& mu) {
  std::ostringstream os;
  const std::size_t M = mu.empty() ? 0 : mu.front().size();
  os << 't';
  for (std::size_t m = 0; m < M; ++m) os << ",mu_" << m + 1;
  os << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << text::format_double(times[k]);
    for (double v : mu[k]) os << ',' << text::format_double(v);
    os << '\n';
  }
  return os.str();
}

inline std::string mu_csv(const FilterTrace& trace) {
  std::vector<std::vector<double>> mu;
  for (const auto& p : trace.mu) mu.emplace_back(p.values().begin(), p.values().end());
  return mu_csv(trace.times, mu);
}

/// Oracle moments alongside the filter's: mode mass, mean and variance.
inline std::string oracle_moments_csv(const FilterTrace& trace) {
  require(trace.oracle.has_value(), "trace has no oracle data");
  const auto& o = *trace.oracle;
  const std::size_t M = o.mu.front().size();
  std::ostringstream os;
  os << 't';
  for (const char* name : {"mu_grid", "mean_grid", "var_grid", "mu_filter", "mean_filter", "var_filter"})
    for (std::size_t m = 0; m < M; ++m) os << ',' << name << '_' << m + 1;
  os << '\n';
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    os << text::format_double(trace.times[k]);
    for (const auto* series : {&o.mu[k], &o.mode_mean[k], &o.mode_variance[k]})
      for (double v : *series) os << ',' << text::format_double(v);
    for (std::size_t m = 0; m < M; ++m) os << ',' << text::format_double(trace.mu[k][m]);
    for (const auto* series : {&trace.mode_mean[k], &trace.mode_variance[k]})
      for (double v : *series) os << ',' << text::format_double(v);
    os << '\n';
  }
  return os.str();
}

inline std::string density_csv(const GridDensity& density) {
  std::ostringstream os;
  write_density_csv(os, density);
  return os.str();
}

}  // namespace immfpf::io

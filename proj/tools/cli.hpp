#pragma once

#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace subdiff::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_solver = 3,
  exit_check_failed = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sectioned key/value configuration (INI grammar). Reads record defaults so
/// that `to_ini` reproduces the effective configuration of a run.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  /// Applies `section.key=value`.
  void set(const std::string& assignment);
  bool has(const std::string& key) const;

  /// Rejects sections and keys outside the documented set.
  void check_known_keys() const;

  std::string require_string(const std::string& key);
  double require_double(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long get_int(const std::string& key, long fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback);
  std::optional<std::string> find_string(const std::string& key) const;

  std::string to_ini() const;

 private:
  std::string raw(const std::string& key) const;
  boost::property_tree::ptree tree_;
};

struct Invocation {
  std::string command;  ///< forward | invert | gradcheck | bench | verify
  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;  ///< section.key=value
  std::optional<std::filesystem::path> output_dir;
  bool verbose = false;
};

/// Resolves the configuration of an invocation and dispatches to the subcommand.
int run(const Invocation& invocation, std::ostream& out, std::ostream& err);

int cmd_forward(Config& config, std::ostream& out, std::ostream& err);
int cmd_invert(Config& config, std::ostream& out, std::ostream& err);
int cmd_gradcheck(Config& config, std::ostream& out, std::ostream& err);
int cmd_bench(Config& config, std::ostream& out, std::ostream& err);
int cmd_verify(Config& config, std::ostream& out, std::ostream& err);

/// `<output_dir>/<run_id>` from run.output_dir, else $SUBDIFF_OUTPUT_DIR, else ./runs.
std::filesystem::path run_directory(Config& config, const std::string& command);

}  // namespace subdiff::cli

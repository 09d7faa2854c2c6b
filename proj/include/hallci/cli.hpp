#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hallci::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value file; '#' starts a comment. Throws "config not found" when
// the file cannot be opened.
std::map<std::string, std::string> read_config(const std::string& path);

struct RunConfig {
  std::string subcommand;
  std::map<std::string, std::string> values;  // defaults < config file < flags
  std::string output_dir;

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;  // comma separated
  std::string resolved_text() const;                     // key=value lines
};

struct Check {
  std::string name;
  std::string relation;  // "<=", ">=", "==" or "true"
  double tolerance = 0.0;
  double value = 0.0;
  bool pass = false;
};

Check check_le(const std::string& name, double value, double tol);
Check check_ge(const std::string& name, double value, double tol);
Check check_true(const std::string& name, bool ok);

// Parses argv, runs one subcommand and returns the exit status: 0 when every
// check passed, 1 when a check failed, 2 on usage or configuration errors.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hallci::cli

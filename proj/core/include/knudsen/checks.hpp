#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kn {

struct CheckItem {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::string suite;
  std::vector<CheckItem> items;
  // pass when value <= tol
  void at_most(const std::string& name, double value, double tol);
  // pass when value > bound
  void above(const std::string& name, double value, double bound);
  bool passed() const;
  std::string format() const;  // one line per item
};

struct CheckOptions {
  std::uint64_t seed = 1;
  bool full = false;  // include the 24^3 collision annihilation test
};

const std::vector<std::string>& check_suites();  // collision, layer, boundary, euler
// Throws std::invalid_argument for an unknown suite.
CheckReport run_check_suite(const std::string& suite, const CheckOptions& opt = {});

}  // namespace kn

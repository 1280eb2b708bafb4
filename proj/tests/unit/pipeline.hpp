#pragma once

#include "knudsen/harness.hpp"

#include <filesystem>

// Smoke-sized pipeline (8^3 velocities) shared by the assembler, slab and
// harness tests.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("kn_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline kn::RunConfig smoke_config(const std::string& name) {
  kn::RunConfig c = kn::preset("smoke");
  c.out_dir = scratch_dir(name).string();
  return c;
}

inline const kn::Pipeline& smoke_pipeline() {
  static const auto p = kn::prepare_pipeline(smoke_config("pipeline"));
  return *p;
}

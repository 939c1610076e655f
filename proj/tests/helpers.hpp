#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "odebn/expr.hpp"

namespace testutil {

inline std::string models_dir() { return ODEBN_MODELS_DIR; }

inline std::string model_path(const std::string& file) {
  return (std::filesystem::path(ODEBN_MODELS_DIR) / file).string();
}

/// Scratch directory under the build tree, cleaned per test tag.
inline std::string work_dir(const std::string& tag) {
  std::filesystem::path p = std::filesystem::path(ODEBN_WORK_DIR) / tag;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

inline bool exprs_equal(const odebn::Expr& a, const odebn::Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case odebn::Expr::Kind::Constant:
      return a.value == b.value;
    case odebn::Expr::Kind::Symbol:
      return a.name == b.name;
    default:
      break;
  }
  if ((a.lhs == nullptr) != (b.lhs == nullptr)) return false;
  if ((a.rhs == nullptr) != (b.rhs == nullptr)) return false;
  if (a.lhs && !exprs_equal(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !exprs_equal(*a.rhs, *b.rhs)) return false;
  return true;
}

}  // namespace testutil

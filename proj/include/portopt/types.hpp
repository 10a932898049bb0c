#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "portopt/errors.hpp"

namespace portopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// The three Markowitz programs.
enum class Variant { MinVola, MaxRet, MultiObj };

inline const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::MinVola: return "minvola";
    case Variant::MaxRet: return "maxret";
    case Variant::MultiObj: return "multiobj";
  }
  return "minvola";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "minvola" || s == "MinVola") return Variant::MinVola;
  if (s == "maxret" || s == "MaxRet") return Variant::MaxRet;
  if (s == "multiobj" || s == "MultiObj") return Variant::MultiObj;
  throw Error(ErrorCode::ParseError, "unknown variant '" + std::string(s) + "'");
}

}  // namespace portopt

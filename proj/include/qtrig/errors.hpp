#pragma once

#include <stdexcept>
#include <string>

namespace qtrig {

/// Raised when an input file does not match the expected on-disk format.
/// The message always names the offending file.
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when the robust value range p_beta - p_gamma collapses below the
/// degeneracy floor (constant or near-constant field). Trigger logic treats
/// such steps as "no data" rather than as a threshold crossing.
class degenerate_range_error : public std::runtime_error {
 public:
  explicit degenerate_range_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace qtrig

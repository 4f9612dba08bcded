#pragma once

#include <stdexcept>
#include <string>

namespace smalign {

// Projection of a (near) zero-mean Gaussian onto the sphere has no preferred
// direction; callers must keep camera positions away from component means.
class DegenerateProjectionError : public std::domain_error {
 public:
  explicit DegenerateProjectionError(const std::string& what)
      : std::domain_error(what) {}
};

// Pose violates the minimum camera-to-point standoff.
class InfeasiblePoseError : public std::domain_error {
 public:
  explicit InfeasiblePoseError(const std::string& what)
      : std::domain_error(what) {}
};

// Malformed input file; message carries the line number where known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace smalign

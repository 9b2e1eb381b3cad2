#pragma once

#include <stdexcept>
#include <string>

namespace pentrack {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes (see ExitCode in pipeline.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry
class PointAtInfinity : public Error {
 public:
  PointAtInfinity() : Error("point maps to infinity under homography") {}
};

class SingularHomography : public Error {
 public:
  explicit SingularHomography(const std::string& what = "homography is singular")
      : Error(what) {}
};

class DegenerateConfiguration : public Error {
 public:
  explicit DegenerateConfiguration(const std::string& what)
      : Error("degenerate configuration: " + what) {}
};

class TooFewPoints : public Error {
 public:
  explicit TooFewPoints(std::size_t n)
      : Error("at least 4 correspondences required, got " + std::to_string(n)) {}
};

class NoConsensus : public Error {
 public:
  explicit NoConsensus(const std::string& what) : Error("no consensus: " + what) {}
};

// Polygons
class TooFewVertices : public Error {
 public:
  explicit TooFewVertices(std::size_t n)
      : Error("polygon needs at least 3 vertices, got " + std::to_string(n)) {}
};

class InvalidBox : public Error {
 public:
  explicit InvalidBox(const std::string& what) : Error("invalid box: " + what) {}
};

// Tracking
class NonPositiveBox : public Error {
 public:
  NonPositiveBox() : Error("measurement box has non-positive width or height") {}
};

class OutOfOrderFrame : public Error {
 public:
  OutOfOrderFrame(long previous, long current)
      : Error("frame " + std::to_string(current) + " follows frame " +
              std::to_string(previous)) {}
};

// Metrics
class EmptyGroundTruth : public Error {
 public:
  EmptyGroundTruth() : Error("ground truth contains no boxes") {}
};

class NoMatches : public Error {
 public:
  NoMatches() : Error("no matched ground-truth/prediction pairs") {}
};

class NoGroundTruthPairs : public Error {
 public:
  NoGroundTruthPairs() : Error("ground truth contains no cross-view pairs") {}
};

// Simulator / configuration
class BehindCamera : public Error {
 public:
  BehindCamera() : Error("world point is behind the camera") {}
};

class DegenerateCamera : public Error {
 public:
  explicit DegenerateCamera(const std::string& what) : Error("degenerate camera: " + what) {}
};

class ConfigInvalid : public Error {
 public:
  ConfigInvalid(const std::string& field, const std::string& why)
      : Error("invalid config field '" + field + "': " + why), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed input files.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& why)
      : Error(source + ":" + std::to_string(line) + ": " + why) {}
};

}  // namespace pentrack

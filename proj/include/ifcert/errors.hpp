#pragma once

#include <stdexcept>
#include <string>

namespace ifcert {

struct Singular : std::runtime_error {
  explicit Singular(const std::string& what) : std::runtime_error(what) {}
};

struct NotHurwitz : std::runtime_error {
  explicit NotHurwitz(const std::string& what) : std::runtime_error(what) {}
};

struct NoStabilizingSolution : std::runtime_error {
  explicit NoStabilizingSolution(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveM : std::runtime_error {
  explicit NonPositiveM(const std::string& what) : std::runtime_error(what) {}
};

struct NonFinite : std::runtime_error {
  explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};

struct NoFeasibleRegion : std::runtime_error {
  explicit NoFeasibleRegion(const std::string& what) : std::runtime_error(what) {}
};

struct SingularJacobian : std::runtime_error {
  explicit SingularJacobian(const std::string& what) : std::runtime_error(what) {}
};

struct SingularJacobianY : std::runtime_error {
  explicit SingularJacobianY(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct OutsidePolyhedron : std::runtime_error {
  explicit OutsidePolyhedron(const std::string& what) : std::runtime_error(what) {}
};

struct BallNotInPolyhedron : std::runtime_error {
  explicit BallNotInPolyhedron(const std::string& what) : std::runtime_error(what) {}
};

struct EpsTooLarge : std::runtime_error {
  explicit EpsTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  int line;
  std::string reason;
  ParseError(int line_, const std::string& reason_)
      : std::runtime_error("parse error at line " + std::to_string(line_) + ": " + reason_),
        line(line_), reason(reason_) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroImpedanceBranch : std::runtime_error {
  explicit ZeroImpedanceBranch(const std::string& what) : std::runtime_error(what) {}
};

struct VanishesOnBoundary : std::runtime_error {
  explicit VanishesOnBoundary(const std::string& what) : std::runtime_error(what) {}
};

struct Unsupported : std::runtime_error {
  explicit Unsupported(const std::string& what) : std::runtime_error(what) {}
};

struct DivisionByZeroB : std::runtime_error {
  explicit DivisionByZeroB(const std::string& what) : std::runtime_error(what) {}
};

struct Inconclusive : std::runtime_error {
  explicit Inconclusive(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ifcert

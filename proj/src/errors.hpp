#pragma once

#include <stdexcept>
#include <string>

namespace sdb {

// Stable error codes; the C boundary maps these 1:1 onto sdb_status values.
enum class Err {
    Ok = 0,
    Io,
    Parse,
    OpenBoundaryChain,
    NonConvexArc,
    OverlappingComponents,
    BadTable,
    CornerPoint,
    TransparentWall,
    OutsideDomain,
    SingularBase,
    SingularEncounter,
    ImmediateSingularity,
    BadArgument,
    NoWitness,
    Internal,
};

class SdbError : public std::runtime_error {
  public:
    SdbError(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Err code() const { return code_; }

  private:
    Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw SdbError(code, what); }

}  // namespace sdb

#pragma once

#include <stdexcept>
#include <string>

namespace vpem {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define VPEM_DEFINE_ERROR(Name)       \
  struct Name : Error {               \
    using Error::Error;               \
  }

VPEM_DEFINE_ERROR(NotPositiveDefinite);
VPEM_DEFINE_ERROR(DimensionMismatch);
VPEM_DEFINE_ERROR(NumericalFailure);
VPEM_DEFINE_ERROR(EmptyComponent);
VPEM_DEFINE_ERROR(DegenerateData);
VPEM_DEFINE_ERROR(NotConnected);
VPEM_DEFINE_ERROR(AlphaOutOfRange);
VPEM_DEFINE_ERROR(ConvergenceFailure);
VPEM_DEFINE_ERROR(InvalidParameter);
VPEM_DEFINE_ERROR(PartitionMismatch);
VPEM_DEFINE_ERROR(InvalidBatch);
VPEM_DEFINE_ERROR(ParseError);
VPEM_DEFINE_ERROR(RaggedRows);
VPEM_DEFINE_ERROR(ZeroVariance);
VPEM_DEFINE_ERROR(InvalidAssignment);
VPEM_DEFINE_ERROR(SeparationInfeasible);
VPEM_DEFINE_ERROR(IncompatibleTraces);
VPEM_DEFINE_ERROR(IoError);

#undef VPEM_DEFINE_ERROR

}  // namespace vpem

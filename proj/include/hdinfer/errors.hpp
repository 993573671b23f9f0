// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hdinfer {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HDINFER_DEFINE_ERROR(Name)       \
  class Name : public ::hdinfer::Error { \
   public:                               \
    using Error::Error;                  \
  }

// linalg
HDINFER_DEFINE_ERROR(NotPositiveDefinite);
HDINFER_DEFINE_ERROR(NotSymmetric);
HDINFER_DEFINE_ERROR(NoConvergence);
HDINFER_DEFINE_ERROR(OutOfDomain);

// approx_inverse
HDINFER_DEFINE_ERROR(SingularGram);
HDINFER_DEFINE_ERROR(DegenerateColumn);
HDINFER_DEFINE_ERROR(SingularSketch);
HDINFER_DEFINE_ERROR(NonPositiveGamma);
HDINFER_DEFINE_ERROR(InvalidConstant);

// lasso
HDINFER_DEFINE_ERROR(ZeroColumn);
HDINFER_DEFINE_ERROR(DegreesOfFreedomExhausted);

// inference
HDINFER_DEFINE_ERROR(DimensionMismatch);
HDINFER_DEFINE_ERROR(InvalidAlpha);
HDINFER_DEFINE_ERROR(RankDeficientControls);

// simulation
HDINFER_DEFINE_ERROR(TooManyNonzeros);
HDINFER_DEFINE_ERROR(TooManyRedraws);

// app / data ingestion
HDINFER_DEFINE_ERROR(ParseError);
HDINFER_DEFINE_ERROR(RaggedRows);
HDINFER_DEFINE_ERROR(LeadingMissing);
HDINFER_DEFINE_ERROR(ConstantColumn);
HDINFER_DEFINE_ERROR(InsufficientRows);
HDINFER_DEFINE_ERROR(ConfigError);

#undef HDINFER_DEFINE_ERROR

}  // namespace hdinfer

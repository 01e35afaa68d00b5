// Copyright 2026 The mielearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace mie {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

#define MIE_DEFINE_ERROR(Name)                   \
    class Name : public Error {                  \
       public:                                   \
        using Error::Error;                      \
    };

MIE_DEFINE_ERROR(ZeroProbabilityOutcome)
MIE_DEFINE_ERROR(SystemTooLarge)
MIE_DEFINE_ERROR(InvalidCircuit)
MIE_DEFINE_ERROR(UnknownSymbol)
MIE_DEFINE_ERROR(NumericalFailure)
MIE_DEFINE_ERROR(ShapeMismatch)
MIE_DEFINE_ERROR(EmptyBatch)
MIE_DEFINE_ERROR(NotPSD)
MIE_DEFINE_ERROR(SingularEstimator)
MIE_DEFINE_ERROR(InvariantViolation)
MIE_DEFINE_ERROR(ConfigError)
MIE_DEFINE_ERROR(FormatError)
MIE_DEFINE_ERROR(IncompatibleInputs)

#undef MIE_DEFINE_ERROR

}  // namespace mie

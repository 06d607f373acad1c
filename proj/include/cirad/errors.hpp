// SPDX-License-Identifier: Apache-2.0
//
// cirad: compressive illumination radar simulation and sparse recovery
// Copyright (C) 2026 The cirad authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CIRAD_ERRORS_HPP
#define CIRAD_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace cirad
{

/// Base of every domain error raised by the library. `name()` is the stable
/// identifier printed by the command-line tool.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
    virtual std::string_view name() const noexcept { return "Error"; }
};

#define CIRAD_DEFINE_ERROR(Name)                                              \
    class Name : public Error                                                 \
    {                                                                         \
    public:                                                                   \
        using Error::Error;                                                   \
        std::string_view name() const noexcept override { return #Name; }     \
    }

CIRAD_DEFINE_ERROR(RangeError);
CIRAD_DEFINE_ERROR(ConsistencyError);
CIRAD_DEFINE_ERROR(ProbabilityError);
CIRAD_DEFINE_ERROR(IndexError);
CIRAD_DEFINE_ERROR(AllocError);
CIRAD_DEFINE_ERROR(DomainError);
CIRAD_DEFINE_ERROR(ShapeError);
CIRAD_DEFINE_ERROR(CardinalityError);
CIRAD_DEFINE_ERROR(PackingError);
CIRAD_DEFINE_ERROR(ZeroColumnError);
CIRAD_DEFINE_ERROR(ConvergenceError);
CIRAD_DEFINE_ERROR(CombinatoricsError);
CIRAD_DEFINE_ERROR(DivergenceError);
CIRAD_DEFINE_ERROR(RankError);
CIRAD_DEFINE_ERROR(DegenerateResidualError);
CIRAD_DEFINE_ERROR(EmptyTruthError);
CIRAD_DEFINE_ERROR(MissingCellError);
CIRAD_DEFINE_ERROR(SpecError);
CIRAD_DEFINE_ERROR(FormatError);
CIRAD_DEFINE_ERROR(ReplayMismatchError);

#undef CIRAD_DEFINE_ERROR

} // namespace cirad

#endif // CIRAD_ERRORS_HPP

/*
 *   Copyright 2026 The gmmdc Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace gmmdc {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    RankDeficient,
    Unbalanced,
    SingularWeight,
    SingularNormalMatrix,
    IllConditionedCorrection,
    DegenerateStandardError,
    JNotDefined,
    TooFewUnits,
    AllResamplesFailed,
    AllReplicationsFailed,
};

const char* to_string(ErrorCode code) noexcept;

/// Numerical failures are signalled with the offending matrix's condition
/// number when one is available (0 otherwise).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, double condition = 0.0)
        : std::runtime_error(what), code_(code), condition_(condition) {}

    ErrorCode code() const noexcept { return code_; }
    double condition() const noexcept { return condition_; }

    /// True for failures caused by the data's numerics rather than the caller.
    bool numerical() const noexcept {
        switch (code_) {
        case ErrorCode::SingularWeight:
        case ErrorCode::SingularNormalMatrix:
        case ErrorCode::IllConditionedCorrection:
        case ErrorCode::DegenerateStandardError:
        case ErrorCode::AllResamplesFailed:
        case ErrorCode::AllReplicationsFailed:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorCode code_;
    double condition_;
};

}  // namespace gmmdc

// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace varexp
{
    /// Raised when an operation's precondition does not hold.
    class invalid_input : public std::invalid_argument
    {
      public:
        using std::invalid_argument::invalid_argument;
    };

    /// Raised when an iterative procedure fails to reach its tolerance.
    class convergence_error : public std::runtime_error
    {
      public:
        convergence_error(const std::string& what, double final_residual)
            : std::runtime_error(what + " (final residual " + std::to_string(final_residual) + ")")
            , residual_(final_residual)
        {
        }

        double residual() const noexcept
        {
            return residual_;
        }

      private:
        double residual_;
    };

    inline void require(bool condition, const std::string& message)
    {
        if (!condition)
        {
            throw invalid_input(message);
        }
    }
}

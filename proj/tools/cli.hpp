#pragma once

#include <iosfwd>

namespace dengue::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kPrecondition = 3;
inline constexpr int kDiverged = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dengue::cli

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace crossbid {

/// Thrown for contract violations and unrecoverable runtime faults.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
template <typename... Args>
[[noreturn]] inline void raise(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    throw Error(os.str());
}
} // namespace detail

} // namespace crossbid

#define CB_REQUIRE(cond, ...)                         \
    do {                                              \
        if (!(cond))                                  \
            ::crossbid::detail::raise(__VA_ARGS__);   \
    } while (0)

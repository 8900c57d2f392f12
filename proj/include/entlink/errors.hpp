#pragma once

#include <stdexcept>
#include <string>

namespace entlink {

/// Raised when an input or configuration violates a documented precondition.
/// The CLI maps this to exit status 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace entlink

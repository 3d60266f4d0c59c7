#pragma once

#include <stdexcept>
#include <string>

namespace topk {

// Argument outside the domain of a reward family or operation.
class InvalidParameter : public std::invalid_argument {
public:
    explicit InvalidParameter(const std::string& what) : std::invalid_argument(what) {}
};

// Problem instance that violates its invariants (e.g. non-unique top-k set).
class InvalidInstance : public std::invalid_argument {
public:
    explicit InvalidInstance(const std::string& what) : std::invalid_argument(what) {}
};

// Query on a state that cannot answer it yet (unsampled arm, improper posterior).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace topk

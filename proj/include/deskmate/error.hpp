#pragma once

#include <stdexcept>
#include <string>

namespace deskmate {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deskmate

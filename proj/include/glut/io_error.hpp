#pragma once

#include <stdexcept>
#include <string>

namespace glut {

/// A file could not be opened, read or written (as opposed to malformed content).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace glut

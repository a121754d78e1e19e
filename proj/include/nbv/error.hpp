#pragma once

#include <stdexcept>
#include <string>

namespace nbv {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

class IndexOutOfRange : public Error {
public:
  using Error::Error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

class RadiiMismatch : public Error {
public:
  using Error::Error;
};

class NoCorrespondences : public Error {
public:
  using Error::Error;
};

class MissingCacheEntry : public Error {
public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
public:
  using Error::Error;
};

}  // namespace nbv

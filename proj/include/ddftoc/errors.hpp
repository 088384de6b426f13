#pragma once

#include <stdexcept>
#include <string>

namespace ddftoc {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidResolution : public Error
{
public:
  using Error::Error;
};

class ShapeError : public Error
{
public:
  using Error::Error;
};

class ExtrapolationError : public Error
{
public:
  using Error::Error;
};

class InvalidParameter : public Error
{
public:
  using Error::Error;
};

class NumericalBlowup : public Error
{
public:
  using Error::Error;
};

/// Integrator failure; carries the time at which the step could not be taken.
class DivergedSolve : public Error
{
public:
  DivergedSolve( const std::string& what, double time )
      : Error( what + " (t = " + std::to_string( time ) + ")" )
      , reason_( what )
      , time_( time )
  {}

  const std::string& reason() const noexcept { return reason_; }

  double time() const noexcept { return time_; }

private:
  std::string reason_;
  double time_;
};

class InvalidManufactured : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

inline void require_size( long actual, long expected, const char* what )
{
  if( actual != expected )
    throw ShapeError( std::string( what ) + ": expected length " + std::to_string( expected ) + ", got "
                      + std::to_string( actual ) );
}

} // namespace ddftoc

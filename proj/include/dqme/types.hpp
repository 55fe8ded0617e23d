#ifndef DQME_TYPES_HPP
#define DQME_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dqme
{

using Real    = double;
using Complex = std::complex<Real>;
using Index   = Eigen::Index;

using Matrix     = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using Vector     = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

inline constexpr Complex I{0.0, 1.0};

///
/// Base of all library errors. The three subclasses map onto the CLI exit
/// codes: bad input (2), numerical failure (3), inconclusive convergence (4).
///
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error
{
public:
    using Error::Error;
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

class ConvergenceError : public Error
{
public:
    using Error::Error;
};

} // namespace dqme

#endif

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace pat {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

enum class ErrorKind { Config, Numerical, IO };

// Every failure raised by the library carries a category (mapped to CLI exit
// codes) and a short machine-readable code such as "NoConvergence".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), kind_(kind), code_(std::move(code)) {}
    ErrorKind kind() const { return kind_; }
    const std::string& code() const { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

[[noreturn]] inline void config_error(const std::string& code, const std::string& msg)
{
    throw Error(ErrorKind::Config, code, msg);
}

[[noreturn]] inline void numerical_error(const std::string& code, const std::string& msg)
{
    throw Error(ErrorKind::Numerical, code, msg);
}

// Worker count used by parallel loops. Outputs are partitioned disjointly, so
// results do not depend on the count.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n) across threads(). fn must only write to
// locations owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Pairwise summation keeps reductions independent of thread layout.
double pairwise_sum(const double* x, std::size_t n);

}  // namespace pat

#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spinmachine {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IndexList = std::vector<int>;

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

// Largest chain handled by dense full-space routines.
inline constexpr int kDenseSiteCap = 12;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, double gap_estimate)
        : Error(what), residual(residual), gap_estimate(gap_estimate) {}
    double residual;
    double gap_estimate;
};

class InconsistencyError : public Error {
public:
    using Error::Error;
};

inline int popcount(unsigned x) { return __builtin_popcount(x); }

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Trace norm of a Hermitian matrix.
inline double trace_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Mat h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

}  // namespace spinmachine

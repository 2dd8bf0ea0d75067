#pragma once

// Reference computations used by the tests. They avoid the library's own
// code paths: plain loops, long double and SVD-based solves.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

inline double sobolev(double x, double y) { return 1.0 + std::min(x, y); }

// Normalized Sobolev Gram matrix by direct loops.
inline Mat sobolev_gram(const std::vector<double>& rows, const std::vector<double>& cols) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows.size() * cols.size()));
    Mat k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scale * sobolev(rows[i], cols[j]);
    return k;
}

inline std::vector<double> to_vector(const Mat& x) {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = x(i, 0);
    return out;
}

inline Mat column(const std::vector<double>& v) {
    Mat x(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = v[i];
    return x;
}

// Random symmetric PSD matrix of the given rank with eigenvalues in [lo, hi].
inline Mat random_psd(Eigen::Index dim, Eigen::Index rank, std::mt19937_64& gen, double lo = 0.05,
                      double hi = 5.0) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(lo, hi);
    Mat g(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = normal(gen);
    const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
    Vec d = Vec::Zero(dim);
    for (Eigen::Index i = 0; i < rank; ++i) d(i) = unif(gen);
    Mat m = q * d.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

inline Vec random_vector(Eigen::Index dim, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(gen);
    return v;
}

// Moore-Penrose pseudo-inverse via SVD with a relative cut.
inline Mat pinv(const Mat& m, double rel = 1e-10) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = s.size() ? rel * s(0) : 0.0;
    Vec inv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Dense orthonormal Walsh-Hadamard matrix built by Kronecker doubling.
inline Mat dense_hadamard(Eigen::Index n) {
    Mat h = Mat::Ones(1, 1);
    while (h.rows() < n) {
        const Eigen::Index k = h.rows();
        Mat next(2 * k, 2 * k);
        next << h, h, h, -h;
        h = next;
    }
    return h / std::sqrt(static_cast<double>(n));
}

// Symmetric PSD square root.
inline LMat psd_sqrt(const LMat& a) {
    Eigen::SelfAdjointEigenSolver<LMat> eig(a);
    LVec d = eig.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) > 0 ? std::sqrt(d(i)) : 0.0L;
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

struct KrylovReference {
    Vec a;
    double residual = 0.0;
};

// argmin over span{b, Ab, ..., A^{t-1} b} of |A a - b| (or the A-weighted norm),
// in long double, using a Gram-Schmidt basis of the raw powers and an SVD solve.
inline KrylovReference krylov_reference(const Mat& a_in, const Vec& b_in, int t, bool weighted) {
    const LMat a = a_in.cast<long double>();
    const LVec b = b_in.cast<long double>();
    const Eigen::Index n = a.rows();
    std::vector<LVec> basis;
    LVec p = b;
    for (int j = 0; j < t; ++j) {
        LVec v = p;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) v -= q.dot(v) * q;
        const long double len = v.norm();
        if (len > 1e-13L * p.norm() && len > 0) basis.push_back(v / len);
        p = a * p;
        if (p.norm() > 0) p /= p.norm();
    }
    KrylovReference out;
    if (basis.empty()) {
        out.a = Vec::Zero(n);
        out.residual = b_in.norm();
        return out;
    }
    LMat v(n, static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = basis[j];
    LMat lhs = a * v;
    LVec rhs = b;
    if (weighted) {
        const LMat root = psd_sqrt(0.5L * (a + a.transpose()));
        lhs = root * lhs;
        rhs = root * rhs;
    }
    Eigen::JacobiSVD<LMat> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-14L);
    const LVec y = svd.solve(rhs);
    const LVec sol = v * y;
    const LVec r = a * sol - b;
    out.a = sol.cast<double>();
    out.residual = static_cast<double>(weighted ? std::sqrt(std::max(0.0L, r.dot(a * r))) : r.norm());
    return out;
}

}  // namespace oracle

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "widebnn/numkit.hpp"

namespace widebnn {
namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    DenseMatrix m(rows, cols);
    for (double& v : m.entries()) {
        v = normal(gen);
    }
    return m;
}

// Q·diag(eigs)·Qᵀ with Q from a QR of a Gaussian matrix.
DenseMatrix spd_with_spectrum(const Vector& eigs, std::mt19937_64& gen) {
    const std::size_t n = eigs.size();
    const DenseMatrix g = random_matrix(n, n, gen);
    const Eigen::MatrixXd gm = g.map();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gm);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = eigs[i];
    }
    return symmetrize(DenseMatrix::from_eigen(q * d * q.transpose()));
}

DenseMatrix random_spd(std::size_t n, std::mt19937_64& gen) {
    const DenseMatrix g = random_matrix(n, n, gen);
    DenseMatrix a = matmul_transposed(g, g);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) += 0.5;
    }
    return symmetrize(a);
}

TEST(DenseMatrix, RejectsNonFiniteAndWrongLength) {
    EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), DimensionMismatch);
    EXPECT_THROW(DenseMatrix(1, 2, std::vector<double>{1, NAN}), NonFiniteEntry);
    EXPECT_THROW(DenseMatrix(1, 1, std::vector<double>{INFINITY}), NonFiniteEntry);
    EXPECT_THROW((DenseMatrix{{1, 2}, {3}}), DimensionMismatch);
}

TEST(DenseMatrix, MatmulAgreesWithLoops) {
    std::mt19937_64 gen(3);
    const DenseMatrix a = random_matrix(4, 7, gen);
    const DenseMatrix b = random_matrix(7, 3, gen);
    const DenseMatrix c = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 7; ++k) {
                s += a(i, k) * b(k, j);
            }
            EXPECT_NEAR(c(i, j), s, 1e-12);
        }
    }
    EXPECT_THROW(matmul(a, a), DimensionMismatch);
    EXPECT_LE(frobenius_norm(matmul_transposed(a, transpose(b)) - c), 1e-12 * frobenius_norm(c));
}

TEST(Cholesky, Identity) { EXPECT_EQ(cholesky(DenseMatrix::identity(3)), DenseMatrix::identity(3)); }

TEST(Cholesky, TwoByTwoByHand) {
    const DenseMatrix l = cholesky(DenseMatrix{{4, 2}, {2, 3}});
    EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(l(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
    EXPECT_NEAR(l(1, 1), std::sqrt(2.0), 1e-15);
}

TEST(Cholesky, IndefiniteThrows) {
    // eigenvalues 3 and −1
    EXPECT_THROW(cholesky(DenseMatrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
    EXPECT_THROW(cholesky(DenseMatrix(2, 2)), NotPositiveDefinite);
}

TEST(Cholesky, AsymmetricOrNonSquareRejected) {
    EXPECT_THROW(cholesky(DenseMatrix{{1, 0.5}, {0.4, 1}}), NotSymmetric);
    EXPECT_THROW(cholesky(DenseMatrix(2, 3)), DimensionMismatch);
}

TEST(Cholesky, JitterRescuesNumericallySemidefinite) {
    // Rank-one matrix of duplicates: exactly singular, accepted after jitter.
    const DenseMatrix a{{1, 1}, {1, 1}};
    const DenseMatrix l = cholesky(a);
    EXPECT_LT(frobenius_norm(matmul_transposed(l, l) - a) / frobenius_norm(a), 1e-9);
}

TEST(Cholesky, ReconstructsRandomSpd) {
    std::mt19937_64 gen(11);
    for (std::size_t n : {1u, 2u, 5u, 17u, 60u}) {
        const DenseMatrix a = random_spd(n, gen);
        const DenseMatrix l = cholesky(a);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                EXPECT_EQ(l(i, j), 0.0);
            }
        }
        EXPECT_LE(frobenius_norm(matmul_transposed(l, l) - a) / frobenius_norm(a), 1e-10) << "n=" << n;
    }
}

TEST(SolveSpd, IdentityAndDiagonal) {
    const DenseMatrix b{{1, -2}, {3, 4}, {5, 6}};
    EXPECT_EQ(solve_spd(DenseMatrix::identity(3), b), b);
    const DenseMatrix x = solve_spd(DenseMatrix{{2, 0}, {0, 4}}, DenseMatrix{{2}, {4}});
    EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(x(1, 0), 1.0);
    EXPECT_THROW(solve_spd(DenseMatrix::identity(2), b), DimensionMismatch);
}

TEST(SolveSpd, ResidualOnRandomSystems) {
    std::mt19937_64 gen(5);
    for (int rep = 0; rep < 20; ++rep) {
        const DenseMatrix a = random_spd(8, gen);
        const DenseMatrix b = random_matrix(8, 3, gen);
        const DenseMatrix x = solve_spd(a, b);
        EXPECT_LE(frobenius_norm(matmul(a, x) - b) / frobenius_norm(b), 1e-8);
    }
}

TEST(SolveSpd, RecoversSolutionUpToConditionMillion) {
    std::mt19937_64 gen(17);
    for (double cond : {1.0, 1e2, 1e4, 1e6}) {
        Vector eigs(12);
        for (std::size_t i = 0; i < eigs.size(); ++i) {
            eigs[i] = std::pow(cond, static_cast<double>(i) / 11.0);
        }
        const DenseMatrix a = spd_with_spectrum(eigs, gen);
        const DenseMatrix x0 = random_matrix(12, 2, gen);
        const DenseMatrix x = solve_spd(a, matmul(a, x0));
        EXPECT_LE(frobenius_norm(x - x0) / frobenius_norm(x0), 1e-7) << "cond=" << cond;
    }
}

TEST(SymSqrt, IdentityAndDiagonal) {
    EXPECT_LE(frobenius_norm(sym_sqrt(DenseMatrix::identity(4)) - DenseMatrix::identity(4)), 1e-14);
    const DenseMatrix s = sym_sqrt(DenseMatrix{{4, 0}, {0, 9}});
    EXPECT_NEAR(s(0, 0), 2.0, 1e-14);
    EXPECT_NEAR(s(1, 1), 3.0, 1e-14);
    EXPECT_NEAR(s(0, 1), 0.0, 1e-14);
}

TEST(SymSqrt, NegativeEigenvalueRejected) {
    EXPECT_THROW(sym_sqrt(DenseMatrix{{1, 2}, {2, 1}}), NotPSD);
}

TEST(SymSqrt, ReconstructionSymmetryAndCommutation) {
    std::mt19937_64 gen(23);
    for (int rep = 0; rep < 10; ++rep) {
        // Rank-deficient PSD: G·Gᵀ with G 9x4.
        const DenseMatrix g = random_matrix(9, 4 + rep % 6, gen);
        const DenseMatrix a = symmetrize(matmul_transposed(g, g));
        const DenseMatrix s = sym_sqrt(a);
        EXPECT_LE(frobenius_norm(matmul(s, s) - a) / frobenius_norm(a), 1e-8);
        EXPECT_EQ(relative_asymmetry(s), 0.0);
        EXPECT_LE(frobenius_norm(matmul(s, a) - matmul(a, s)) / frobenius_norm(a), 1e-8);
        for (double v : sym_eigen(s).values) {
            EXPECT_GE(v, -1e-10);
        }
    }
}

TEST(GaussianStream, DeterministicAndContinuing) {
    GaussianStream a(42, 7);
    GaussianStream b(42, 7);
    const Vector first = gaussian_draw(a, 1001);
    EXPECT_EQ(first, gaussian_draw(b, 1001));
    // Consecutive calls continue the sequence rather than restarting it.
    GaussianStream c(42, 7);
    const Vector part1 = gaussian_draw(c, 500);
    const Vector part2 = gaussian_draw(c, 501);
    Vector joined = part1;
    joined.insert(joined.end(), part2.begin(), part2.end());
    EXPECT_EQ(joined, first);
    EXPECT_NE(gaussian_draw(a, 10), first);
}

TEST(GaussianStream, StandardNormalMoments) {
    GaussianStream s(2024, 0);
    const std::size_t n = 1000000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = s.next();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum2 / static_cast<double>(n) - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_LT(std::abs(var - 1.0), 0.01);
}

TEST(GaussianStream, SubstreamsAreUncorrelated) {
    const std::size_t n = 100000;
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        GaussianStream s0(seed, 0);
        GaussianStream s1(seed, 1);
        GaussianStream child = s0.substream(0);
        const Vector a = gaussian_draw(s0, n);
        const Vector b = gaussian_draw(s1, n);
        const Vector c = gaussian_draw(child, n);
        auto corr = [&](const Vector& x, const Vector& y) {
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mx += x[i];
                my += y[i];
            }
            mx /= n;
            my /= n;
            double sxy = 0, sxx = 0, syy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                sxy += (x[i] - mx) * (y[i] - my);
                sxx += (x[i] - mx) * (x[i] - mx);
                syy += (y[i] - my) * (y[i] - my);
            }
            return sxy / std::sqrt(sxx * syy);
        };
        EXPECT_LT(std::abs(corr(a, b)), 0.02);
        EXPECT_LT(std::abs(corr(a, c)), 0.02);
    }
}

TEST(GaussianStream, UniformFromNormalCdf) {
    GaussianStream s(5, 5);
    const std::size_t n = 200000;
    std::size_t below_quarter = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform_from(s);
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        below_quarter += u < 0.25 ? 1 : 0;
    }
    const double frac = static_cast<double>(below_quarter) / n;
    EXPECT_NEAR(frac, 0.25, 4.0 * std::sqrt(0.25 * 0.75 / n));
}

}  // namespace
}  // namespace widebnn

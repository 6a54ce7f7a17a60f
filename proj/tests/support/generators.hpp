#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qfs::testing {

/// Seeded source of small random test inputs.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    /// Uniform integer in [lo, hi].
    int integer(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

    /// Uniform real in [lo, hi).
    double real(double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }

    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = real(-scale, scale);
        return m;
    }

    std::vector<double> probabilities(std::size_t n) {
        std::vector<double> p(n);
        for (auto& v : p) v = real(0.001, 0.999);
        return p;
    }

    std::vector<bool> flags(std::size_t n, double p = 0.5) {
        std::vector<bool> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = coin(p);
        return f;
    }

    /// Tokens drawn from {w0 .. w(alphabet-1)}.
    std::vector<std::string> words(std::size_t n, int alphabet) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(integer(0, alphabet - 1)));
        return out;
    }

    std::vector<int> ids(std::size_t n, int lo, int hi) {
        std::vector<int> out(n);
        for (auto& v : out) v = integer(lo, hi);
        return out;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace qfs::testing

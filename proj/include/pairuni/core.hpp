#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairuni {

// Task side of a sample, feature vector, or trajectory.
enum class Side { Understanding, Generation };

inline const char* to_string(Side s) {
    return s == Side::Understanding ? "und" : "gen";
}

// Base for all library errors so callers can map them to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ZeroVectorError : public Error { using Error::Error; };
class DimMismatchError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class DuplicateIdError : public Error { using Error::Error; };
class TooFewPointsError : public Error { using Error::Error; };
class ModelMismatchError : public Error { using Error::Error; };
class MissingQuadrupleError : public Error { using Error::Error; };
class ClientUnavailableError : public Error { using Error::Error; };
class MalformedCompletionError : public Error { using Error::Error; };
class UnknownScorerError : public Error { using Error::Error; };
class PolicyMismatchError : public Error { using Error::Error; };
class IndexOutOfRangeError : public Error { using Error::Error; };
class ShapeMismatchError : public Error { using Error::Error; };
class NonFiniteGradientError : public Error { using Error::Error; };
class MalformedLogError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

inline Side side_from_string(const std::string& s) {
    if (s == "und") return Side::Understanding;
    if (s == "gen") return Side::Generation;
    throw SchemaError("unknown side '" + s + "' (expected 'und' or 'gen')");
}

// Dense row-major array shaped like the policy parameters (prompts x vocab).
struct ParamArray {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    ParamArray() = default;
    ParamArray(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const ParamArray& o) const { return rows == o.rows && cols == o.cols; }

    void add_scaled(const ParamArray& o, double a) {
        if (!same_shape(o)) throw ShapeMismatchError("ParamArray::add_scaled: shape mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += a * o.data[i];
    }

    double dot(const ParamArray& o) const {
        if (!same_shape(o)) throw ShapeMismatchError("ParamArray::dot: shape mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) s += data[i] * o.data[i];
        return s;
    }

    double norm() const { return std::sqrt(dot(*this)); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline ParamArray operator+(const ParamArray& a, const ParamArray& b) {
    ParamArray r = a;
    r.add_scaled(b, 1.0);
    return r;
}

inline double clamp_unit_interval(double x, double lo, double hi) {
    return std::min(hi, std::max(lo, x));
}

// Median of an unsorted sequence; even length averages the two middle values.
inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty sequence");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace pairuni

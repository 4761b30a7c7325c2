#ifndef CONTSEG_TYPES_HPP
#define CONTSEG_TYPES_HPP

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace contseg
{

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Thrown for malformed input files and streams (CLI exit code 2).
class DataError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Thrown when an internal invariant of the streaming pipeline is broken (CLI exit code 3).
class InvariantError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

// Thrown for invalid configuration values.
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct Vec3f
{
    float x{0.f};
    float y{0.f};
    float z{0.f};

    friend bool operator==(const Vec3f&, const Vec3f&) = default;
};

struct Vec3d
{
    double x{0.0};
    double y{0.0};
    double z{0.0};

    friend Vec3d operator+(const Vec3d& a, const Vec3d& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3d operator-(const Vec3d& a, const Vec3d& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3d operator*(double s, const Vec3d& a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3d&, const Vec3d&) = default;

    [[nodiscard]] double dot(const Vec3d& o) const { return x * o.x + y * o.y + z * o.z; }
    [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3d to_double(const Vec3f& v)
{
    return {static_cast<double>(v.x), static_cast<double>(v.y), static_cast<double>(v.z)};
}

inline Vec3f to_float(const Vec3d& v)
{
    return {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
}

/// Position of a cell in the continuous range image. `col` is the global (ever increasing) column index.
struct CellIndex
{
    int64_t col{-1};
    int32_t row{-1};

    [[nodiscard]] bool is_set() const { return col >= 0; }

    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

inline constexpr CellIndex kNoCell{};

enum class Label : uint8_t
{
    empty,
    ego,
    ground,
    obstacle,
    skipped,
};

inline const char* to_string(Label label)
{
    switch (label)
    {
        case Label::empty:
            return "empty";
        case Label::ego:
            return "ego";
        case Label::ground:
            return "ground";
        case Label::obstacle:
            return "obstacle";
        case Label::skipped:
            return "skipped";
    }
    return "?";
}

} // namespace contseg

template <>
struct std::hash<contseg::CellIndex>
{
    size_t operator()(const contseg::CellIndex& idx) const noexcept
    {
        return std::hash<int64_t>{}(idx.col * 1024 + idx.row);
    }
};

#endif

#ifndef CONTSEG_FIRING_HPP
#define CONTSEG_FIRING_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <contseg/types.hpp>

namespace contseg
{

/// Row-major 3x3 matrix, used for the world-from-sensor rotation of a firing.
struct Mat3
{
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    static Mat3 yaw(double angle)
    {
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        return {{c, -s, 0, s, c, 0, 0, 0, 1}};
    }

    [[nodiscard]] double operator()(int r, int c) const { return m[static_cast<size_t>(r * 3 + c)]; }

    [[nodiscard]] Vec3d apply(const Vec3d& v) const
    {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    [[nodiscard]] Vec3d apply_transposed(const Vec3d& v) const
    {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }

    /// Largest absolute deviation of R * R^T from the identity.
    [[nodiscard]] double orthonormality_error() const
    {
        double worst = 0.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
            {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k)
                    dot += (*this)(r, k) * (*this)(c, k);
                worst = std::max(worst, std::abs(dot - (r == c ? 1.0 : 0.0)));
            }
        return worst;
    }

    friend bool operator==(const Mat3&, const Mat3&) = default;
};

/// Static description of the rotating sensor carried in the stream header.
struct SensorModel
{
    uint32_t rows{128};
    uint32_t firings_per_rotation{1800};
    std::vector<double> elevations;      // radians per row, row 0 = highest
    std::vector<double> azimuth_offsets; // radians per row

    [[nodiscard]] double column_width() const { return kTwoPi / static_cast<double>(firings_per_rotation); }

    void validate() const
    {
        if (rows == 0 || firings_per_rotation == 0)
            throw DataError("sensor model needs at least one row and one firing per rotation");
        if (elevations.size() != rows || azimuth_offsets.size() != rows)
            throw DataError("sensor model tables must have one entry per row");
    }
};

/// One entry of a firing. Invalid entries may still carry the beam direction (unit vector, range 0) so that the
/// firing's azimuth is known even without a return; an all-zero vector means "direction unknown".
struct FiringPoint
{
    Vec3f sensor_xyz;
    float range{0.f};
    bool valid{false};
};

/// One simultaneous shot of all lasers.
struct Firing
{
    uint64_t index{0}; // position in the stream, defines point ids
    int64_t timestamp_ns{0};
    Mat3 rotation;
    std::vector<FiringPoint> points; // exactly one per row

    void validate(uint32_t rows) const
    {
        if (points.size() != rows)
            throw DataError("firing " + std::to_string(index) + " has " + std::to_string(points.size()) +
                            " entries, expected " + std::to_string(rows));
        if (rotation.orthonormality_error() > 1e-6)
            throw DataError("firing " + std::to_string(index) + " carries a non-orthonormal rotation");
    }
};

/// Stream-wide identifier of a measurement: firing index times row count plus row.
inline uint64_t point_id(uint64_t firing_index, uint32_t rows, uint32_t row)
{
    return firing_index * rows + row;
}

} // namespace contseg

#endif

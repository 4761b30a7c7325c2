#ifndef CONTSEG_TESTS_BUILDERS_HPP
#define CONTSEG_TESTS_BUILDERS_HPP

#include <contseg/firing.hpp>
#include <contseg/range_image.hpp>
#include <contseg/synth.hpp>

namespace contseg::testing
{

inline SensorModel small_sensor(uint32_t rows = 4, uint32_t firings = 1800)
{
    SensorModel m;
    m.rows = rows;
    m.firings_per_rotation = firings;
    m.elevations.assign(rows, 0.0);
    m.azimuth_offsets.assign(rows, 0.0);
    return m;
}

/// Point at horizontal radius `r`, raw azimuth `phi` and height `z`.
inline Vec3f polar(double r, double phi, double z)
{
    const Vec3d d = beam_direction(phi, 0.0);
    return to_float(Vec3d{r * d.x, r * d.y, z});
}

/// Firing with the given entries; missing rows carry only a direction at `phi`.
inline Firing make_firing(uint64_t index, uint32_t rows, double phi, const std::vector<std::pair<uint32_t, Vec3f>>& pts)
{
    Firing f;
    f.index = index;
    f.timestamp_ns = static_cast<int64_t>(index) * 1000;
    f.points.resize(rows);
    for (uint32_t r = 0; r < rows; ++r)
        f.points[r].sensor_xyz = to_float(beam_direction(phi, 0.0));
    for (const auto& [row, p] : pts)
    {
        f.points[row].sensor_xyz = p;
        f.points[row].range = static_cast<float>(to_double(p).norm());
        f.points[row].valid = true;
    }
    return f;
}

struct PlacedPoint
{
    uint32_t row{0};
    Vec3f xyz;
};

/// Inserts each point as its own firing in azimuth order, marks every stored point obstacle and finishes all
/// columns. Returns the finished columns.
inline std::vector<int64_t> fill_image(RangeImage& image, std::vector<PlacedPoint> points)
{
    std::sort(points.begin(), points.end(), [](const PlacedPoint& a, const PlacedPoint& b) {
        return *raw_azimuth(a.xyz.x, a.xyz.y) < *raw_azimuth(b.xyz.x, b.xyz.y);
    });
    std::vector<int64_t> finished;
    uint64_t index = 0;
    for (const PlacedPoint& p : points)
    {
        const double phi = *raw_azimuth(p.xyz.x, p.xyz.y);
        auto f = make_firing(index++, static_cast<uint32_t>(image.rows()), phi, {{p.row, p.xyz}});
        for (int64_t c : image.insert_firing(f))
            finished.push_back(c);
    }
    for (int64_t c : image.finish_all())
        finished.push_back(c);
    for (int64_t c : finished)
        for (Cell& cell : image.column(c))
            if (cell.occupied)
                cell.label = Label::obstacle;
    return finished;
}

} // namespace contseg::testing

#endif

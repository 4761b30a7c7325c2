#ifndef CONTSEG_CFS1_HPP
#define CONTSEG_CFS1_HPP

#include <bit>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>

#include <contseg/firing.hpp>

namespace contseg
{

static_assert(std::endian::native == std::endian::little, "CFS1 I/O assumes a little-endian host");

// CFS1 firing stream, little endian:
//   header: "CFS1", u32 rows, u32 firings_per_rotation, rows x f64 elevation, rows x f64 azimuth offset
//   firing: u64 timestamp_ns, 9 x f64 rotation (row major), rows x (f32 x, f32 y, f32 z, f32 range, u8 valid)
namespace cfs1
{

inline constexpr char kMagic[4] = {'C', 'F', 'S', '1'};
inline constexpr size_t kPointRecordBytes = 4 * sizeof(float) + 1;

namespace detail
{
template <typename T>
void put(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value)
{
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return static_cast<size_t>(in.gcount()) == sizeof(T);
}
} // namespace detail

class Writer
{
  public:
    Writer(std::ostream& out, SensorModel sensor) : out_(out), sensor_(std::move(sensor))
    {
        sensor_.validate();
        out_.write(kMagic, 4);
        detail::put(out_, sensor_.rows);
        detail::put(out_, sensor_.firings_per_rotation);
        for (double e : sensor_.elevations)
            detail::put(out_, e);
        for (double o : sensor_.azimuth_offsets)
            detail::put(out_, o);
    }

    void write(const Firing& firing)
    {
        firing.validate(sensor_.rows);
        detail::put(out_, static_cast<uint64_t>(firing.timestamp_ns));
        for (double v : firing.rotation.m)
            detail::put(out_, v);
        for (const FiringPoint& p : firing.points)
        {
            detail::put(out_, p.sensor_xyz.x);
            detail::put(out_, p.sensor_xyz.y);
            detail::put(out_, p.sensor_xyz.z);
            detail::put(out_, p.range);
            detail::put(out_, static_cast<uint8_t>(p.valid ? 1 : 0));
        }
        if (!out_)
            throw DataError("failed writing CFS1 firing");
        ++written_;
    }

    [[nodiscard]] uint64_t firings_written() const { return written_; }
    [[nodiscard]] const SensorModel& sensor() const { return sensor_; }

  private:
    std::ostream& out_;
    SensorModel sensor_;
    uint64_t written_{0};
};

class Reader
{
  public:
    explicit Reader(std::istream& in) : in_(in)
    {
        char magic[4];
        in_.read(magic, 4);
        if (in_.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
            throw DataError("not a CFS1 stream (bad magic)");
        if (!detail::get(in_, sensor_.rows) || !detail::get(in_, sensor_.firings_per_rotation))
            throw DataError("truncated CFS1 header");
        if (sensor_.rows == 0 || sensor_.rows > 4096 || sensor_.firings_per_rotation == 0)
            throw DataError("implausible CFS1 header values");
        sensor_.elevations.resize(sensor_.rows);
        sensor_.azimuth_offsets.resize(sensor_.rows);
        for (double& e : sensor_.elevations)
            if (!detail::get(in_, e))
                throw DataError("truncated CFS1 header");
        for (double& o : sensor_.azimuth_offsets)
            if (!detail::get(in_, o))
                throw DataError("truncated CFS1 header");
    }

    [[nodiscard]] const SensorModel& sensor() const { return sensor_; }

    /// Next firing, or nullopt at a clean end of stream. A partial record is a DataError.
    std::optional<Firing> next()
    {
        uint64_t stamp = 0;
        in_.read(reinterpret_cast<char*>(&stamp), sizeof(stamp));
        if (in_.gcount() == 0)
            return std::nullopt;
        if (in_.gcount() != sizeof(stamp))
            throw DataError("truncated CFS1 firing record");

        Firing firing;
        firing.index = read_++;
        firing.timestamp_ns = static_cast<int64_t>(stamp);
        for (double& v : firing.rotation.m)
            if (!detail::get(in_, v))
                throw DataError("truncated CFS1 firing record");
        firing.points.resize(sensor_.rows);
        for (FiringPoint& p : firing.points)
        {
            uint8_t valid = 0;
            if (!detail::get(in_, p.sensor_xyz.x) || !detail::get(in_, p.sensor_xyz.y) ||
                !detail::get(in_, p.sensor_xyz.z) || !detail::get(in_, p.range) || !detail::get(in_, valid))
                throw DataError("truncated CFS1 firing record");
            p.valid = valid != 0;
        }
        if (firing.rotation.orthonormality_error() > 1e-6)
            throw DataError("firing " + std::to_string(firing.index) + " carries a non-orthonormal rotation");
        return firing;
    }

  private:
    std::istream& in_;
    SensorModel sensor_;
    uint64_t read_{0};
};

} // namespace cfs1
} // namespace contseg

#endif

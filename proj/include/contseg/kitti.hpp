#ifndef CONTSEG_KITTI_HPP
#define CONTSEG_KITTI_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <contseg/cfs1.hpp>
#include <contseg/labels.hpp>
#include <contseg/range_image.hpp>

namespace contseg::kitti
{

struct ScanPoint
{
    float x{0.f};
    float y{0.f};
    float z{0.f};
    float intensity{0.f};
};

struct DecodedLabel
{
    uint32_t instance{0};
    uint32_t semantic{0};
};

inline DecodedLabel decode_label(uint32_t raw) { return {raw >> 16, raw & 0xFFFFu}; }

/// Ground truth id used for evaluation: the full label for instance points, 0 otherwise.
inline uint32_t gt_instance(uint32_t raw) { return decode_label(raw).instance != 0 ? raw : 0u; }

/// 64-laser model of the recording sensor: an upper block from +2 deg down in steps of 1/3 deg and a lower block
/// from -8.83 deg down in steps of 0.5 deg. Row 0 is the highest laser.
inline SensorModel hdl64_model(uint32_t firings_per_rotation = 1800)
{
    SensorModel m;
    m.rows = 64;
    m.firings_per_rotation = firings_per_rotation;
    const double deg = std::numbers::pi / 180.0;
    for (int i = 0; i < 32; ++i)
        m.elevations.push_back((2.0 - i / 3.0) * deg);
    for (int i = 0; i < 32; ++i)
        m.elevations.push_back((-8.83 - 0.5 * i) * deg);
    m.azimuth_offsets.assign(64, 0.0);
    return m;
}

/// Row whose elevation is nearest, or nullopt when the residual exceeds `max_residual`.
inline std::optional<uint32_t> elevation_row(const SensorModel& model, double elevation, double max_residual)
{
    std::optional<uint32_t> best;
    double best_residual = std::numeric_limits<double>::infinity();
    for (uint32_t r = 0; r < model.rows; ++r)
    {
        const double residual = std::abs(model.elevations[r] - elevation);
        if (residual < best_residual)
        {
            best_residual = residual;
            best = r;
        }
    }
    if (!best || best_residual > max_residual)
        return std::nullopt;
    return best;
}

inline std::vector<ScanPoint> read_scan(const std::string& path)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in)
        throw DataError("cannot open scan '" + path + "'");
    const auto bytes = static_cast<size_t>(in.tellg());
    if (bytes % sizeof(ScanPoint) != 0)
        throw DataError("scan '" + path + "' is not a whole number of (x, y, z, intensity) records");
    std::vector<ScanPoint> points(bytes / sizeof(ScanPoint));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(points.data()), static_cast<std::streamsize>(bytes));
    return points;
}

inline std::vector<uint32_t> read_label_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in)
        throw DataError("cannot open label file '" + path + "'");
    const auto bytes = static_cast<size_t>(in.tellg());
    if (bytes % sizeof(uint32_t) != 0)
        throw DataError("label file '" + path + "' is not a whole number of 32-bit records");
    std::vector<uint32_t> labels(bytes / sizeof(uint32_t));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(bytes));
    return labels;
}

struct ImportStats
{
    uint64_t scans{0};
    uint64_t rejected_scans{0};
    uint64_t points_in{0};
    uint64_t points_kept{0};
    uint64_t dropped_elevation{0};
    uint64_t dropped_origin{0};
    uint64_t collisions{0};
};

struct ImportOptions
{
    uint32_t firings_per_rotation{1800};
    double max_residual_deg{0.5};
    double scan_period_s{0.1};
};

/// Converts scans into pseudo-firings. Each scan is sorted by azimuth and sliced into `firings_per_rotation`
/// azimuth bins; each bin becomes one firing with identity rotation. Rows without a point carry the beam direction
/// of the bin center. Within a slot the nearer point is kept.
class StreamBuilder
{
  public:
    explicit StreamBuilder(ImportOptions options = {})
        : options_(options), model_(hdl64_model(options.firings_per_rotation))
    {
    }

    [[nodiscard]] const SensorModel& sensor() const { return model_; }
    [[nodiscard]] const ImportStats& stats() const { return stats_; }

    /// Appends one scan. A point count mismatch rejects the pair and returns false.
    template <typename OnFiring>
    bool add_scan(const std::vector<ScanPoint>& scan,
                  const std::vector<uint32_t>& raw_labels,
                  std::vector<LabelRecord>& labels_out,
                  OnFiring&& on_firing)
    {
        if (scan.size() != raw_labels.size())
        {
            ++stats_.rejected_scans;
            return false;
        }
        const uint32_t n = options_.firings_per_rotation;
        const uint32_t rows = model_.rows;
        const double column = model_.column_width();
        const double max_residual = options_.max_residual_deg * std::numbers::pi / 180.0;

        struct Slot
        {
            bool used{false};
            float range{0.f};
            size_t index{0};
        };
        std::vector<Slot> slots(static_cast<size_t>(n) * rows);
        stats_.points_in += scan.size();
        for (size_t i = 0; i < scan.size(); ++i)
        {
            const ScanPoint& p = scan[i];
            const auto phi = raw_azimuth(p.x, p.y);
            if (!phi)
            {
                ++stats_.dropped_origin;
                continue;
            }
            const double xy = std::hypot(static_cast<double>(p.x), static_cast<double>(p.y));
            const auto row = elevation_row(model_, std::atan2(static_cast<double>(p.z), xy), max_residual);
            if (!row)
            {
                ++stats_.dropped_elevation;
                continue;
            }
            const auto bin = std::min<uint32_t>(n - 1, static_cast<uint32_t>(*phi / column));
            Slot& slot = slots[static_cast<size_t>(bin) * rows + *row];
            const float range = static_cast<float>(std::sqrt(xy * xy + static_cast<double>(p.z) * p.z));
            if (slot.used)
            {
                ++stats_.collisions;
                if (!(range < slot.range))
                    continue;
            }
            slot = {true, range, i};
        }

        const auto period_ns = static_cast<int64_t>(std::llround(options_.scan_period_s * 1e9));
        for (uint32_t b = 0; b < n; ++b)
        {
            Firing f;
            f.index = next_firing_;
            f.timestamp_ns = static_cast<int64_t>(stats_.scans) * period_ns + static_cast<int64_t>(b) * period_ns / n;
            f.points.resize(rows);
            const double center = (b + 0.5) * column;
            for (uint32_t r = 0; r < rows; ++r)
            {
                const Slot& slot = slots[static_cast<size_t>(b) * rows + r];
                FiringPoint& fp = f.points[r];
                if (!slot.used)
                {
                    const double ce = std::cos(model_.elevations[r]);
                    fp.sensor_xyz = to_float(Vec3d{-std::cos(center) * ce, std::sin(center) * ce,
                                                   std::sin(model_.elevations[r])});
                    continue;
                }
                const ScanPoint& p = scan[slot.index];
                fp.sensor_xyz = {p.x, p.y, p.z};
                fp.range = slot.range;
                fp.valid = true;
                labels_out.push_back({point_id(f.index, rows, r), gt_instance(raw_labels[slot.index])});
                ++stats_.points_kept;
            }
            ++next_firing_;
            on_firing(std::move(f));
        }
        ++stats_.scans;
        return true;
    }

  private:
    ImportOptions options_;
    SensorModel model_;
    ImportStats stats_;
    uint64_t next_firing_{0};
};

struct ScanPair
{
    std::filesystem::path scan;
    std::filesystem::path labels;
};

/// Pairs `<velodyne>/NNNNNN.bin` with `<labels>/NNNNNN.label` by file stem, in stem order.
inline std::vector<ScanPair> find_scan_pairs(const std::filesystem::path& velodyne, const std::filesystem::path& labels)
{
    if (!std::filesystem::is_directory(velodyne))
        throw DataError("scan directory '" + velodyne.string() + "' does not exist");
    if (!std::filesystem::is_directory(labels))
        throw DataError("label directory '" + labels.string() + "' does not exist");
    std::map<std::string, std::filesystem::path> scans;
    for (const auto& e : std::filesystem::directory_iterator(velodyne))
        if (e.is_regular_file() && e.path().extension() == ".bin")
            scans[e.path().stem().string()] = e.path();
    std::vector<ScanPair> pairs;
    for (const auto& [stem, path] : scans)
    {
        const auto label = labels / (stem + ".label");
        if (std::filesystem::exists(label))
            pairs.push_back({path, label});
    }
    return pairs;
}

/// Imports scan pairs into a CFS1 stream and a label table. Returns the statistics.
inline ImportStats import_directory(const std::filesystem::path& velodyne,
                                   const std::filesystem::path& labels,
                                   std::ostream& stream_out,
                                   std::vector<LabelRecord>& labels_out,
                                   ImportOptions options = {},
                                   size_t max_scans = 0)
{
    StreamBuilder builder(options);
    cfs1::Writer writer(stream_out, builder.sensor());
    size_t done = 0;
    for (const ScanPair& pair : find_scan_pairs(velodyne, labels))
    {
        if (max_scans != 0 && done >= max_scans)
            break;
        builder.add_scan(read_scan(pair.scan.string()), read_label_file(pair.labels.string()), labels_out,
                         [&](Firing&& f) { writer.write(f); });
        ++done;
    }
    return builder.stats();
}

} // namespace contseg::kitti

#endif

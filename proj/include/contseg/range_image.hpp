#ifndef CONTSEG_RANGE_IMAGE_HPP
#define CONTSEG_RANGE_IMAGE_HPP

#include <algorithm>
#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <contseg/firing.hpp>
#include <contseg/types.hpp>

namespace contseg
{

/// Completion record of a point tree, owned by the tree's root cell.
struct TreeMeta
{
    double phi_finished{-std::numeric_limits<double>::infinity()};
    std::vector<CellIndex> edges; // roots of linked trees, kept symmetric
    int64_t point_count{0};
    bool published{false};

    bool add_edge(const CellIndex& other)
    {
        if (std::find(edges.begin(), edges.end(), other) != edges.end())
            return false;
        edges.push_back(other);
        return true;
    }
};

/// One slot of the continuous range image.
struct Cell
{
    // geometry, written only by the range image
    bool occupied{false};
    Vec3f world_xyz;
    Vec3f sensor_xyz;
    double range{0.0};     // 3D distance to the sensor origin
    double radius_xy{0.0}; // horizontal distance to the sensor origin, sizes the neighbor search
    double phi_cont{0.0};
    int64_t global_col{-1};
    int32_t row{-1};
    int64_t timestamp_ns{0};
    uint64_t point_id{0};

    // ground classification
    Label label{Label::empty};

    // point trees
    CellIndex root;
    CellIndex parent;
    std::vector<CellIndex> children;
    std::unique_ptr<TreeMeta> tree_meta; // set only at roots

    // cluster generation
    int64_t visited_stamp{-1};
    bool published{false};

    [[nodiscard]] CellIndex index() const { return {global_col, row}; }
    [[nodiscard]] bool is_root() const { return tree_meta != nullptr; }
};

enum class CoordinateFrame
{
    world,  // world_xyz = R_t * sensor_xyz
    sensor, // world_xyz = sensor_xyz
};

/// Clockwise-increasing azimuth in [0, 2*pi): zero on the negative x-axis.
inline std::optional<double> raw_azimuth(double x, double y)
{
    if (x == 0.0 && y == 0.0)
        return std::nullopt;
    double phi = -std::atan2(y == 0.0 ? 0.0 : y, x) + std::numbers::pi;
    if (phi >= kTwoPi)
        phi -= kTwoPi;
    return phi;
}

/// Unwrapped azimuth of a point: (-atan2(y, x) + pi) + 2*pi*rotation_index. Empty for a zero-length xy projection.
inline std::optional<double> continuous_azimuth(double x, double y, int64_t rotation_index)
{
    const auto raw = raw_azimuth(x, y);
    if (!raw)
        return std::nullopt;
    return *raw + kTwoPi * static_cast<double>(rotation_index);
}

/// Rotation index of a point given the rotation index of its firing's rearmost laser. Points of a firing that
/// straddles the negative x-axis and already passed it belong to the next rotation.
inline int64_t rotation_index_for_point(double /*phi_raw*/,
                                        int64_t rearmost_rotation_index,
                                        bool firing_crosses_negative_x,
                                        bool point_past_negative_x)
{
    if (firing_crosses_negative_x && point_past_negative_x)
        return rearmost_rotation_index + 1;
    return rearmost_rotation_index;
}

/// floor(phi_cont / column_width). A negative azimuth means broken rotation bookkeeping.
inline int64_t column_index(double phi_cont, double column_width)
{
    if (!(phi_cont >= 0.0))
        throw InvariantError("negative continuous azimuth " + std::to_string(phi_cont) +
                             ": rotation index bookkeeping is broken");
    return static_cast<int64_t>(std::floor(phi_cont / column_width));
}

enum class WriteOutcome
{
    stored,   // slot was empty
    replaced, // slot held a farther point, which is dropped
    rejected, // incoming point is the farther one and is dropped
};

/// Same-slot collisions keep the nearer return.
inline WriteOutcome cell_write_policy(Cell& slot, Cell&& incoming)
{
    if (!slot.occupied)
    {
        slot = std::move(incoming);
        return WriteOutcome::stored;
    }
    if (incoming.range < slot.range)
    {
        slot = std::move(incoming);
        return WriteOutcome::replaced;
    }
    return WriteOutcome::rejected;
}

struct RangeImageCounters
{
    uint64_t points_inserted{0};
    uint64_t invalid_points{0};
    uint64_t collisions{0};
    uint64_t late_points{0};
    uint64_t overflow_points{0};
};

/// Horizontally continuous range image stored in a cyclic buffer of `width` columns.
class RangeImage
{
  public:
    RangeImage(SensorModel sensor, int64_t width, CoordinateFrame frame = CoordinateFrame::world)
        : sensor_(std::move(sensor)), width_(width), frame_(frame), column_width_(sensor_.column_width()),
          cells_(static_cast<size_t>(width) * sensor_.rows), last_phi_(sensor_.rows, kNaN)
    {
        sensor_.validate();
        if (width_ < 2)
            throw ConfigError("range image width must be at least 2 columns");
    }

    [[nodiscard]] int rows() const { return static_cast<int>(sensor_.rows); }
    [[nodiscard]] int64_t width() const { return width_; }
    [[nodiscard]] double column_width() const { return column_width_; }
    [[nodiscard]] const SensorModel& sensor() const { return sensor_; }
    [[nodiscard]] const RangeImageCounters& counters() const { return counters_; }

    [[nodiscard]] int64_t first_live_column() const { return first_live_.load(std::memory_order_acquire); }
    /// First column not yet reported finished; -1 before the first firing.
    [[nodiscard]] int64_t next_unfinished_column() const { return next_unfinished_.load(std::memory_order_acquire); }
    [[nodiscard]] int64_t newest_column() const { return newest_col_; }
    [[nodiscard]] double rearmost_azimuth() const { return rear_phi_; }

    [[nodiscard]] bool contains(int64_t global_col) const
    {
        const int64_t first = first_live_column();
        return first >= 0 && global_col >= first && global_col < first + width_;
    }

    [[nodiscard]] Cell& at(int row, int64_t global_col)
    {
        check_access(row, global_col);
        return cells_[slot(row, global_col)];
    }
    [[nodiscard]] const Cell& at(int row, int64_t global_col) const
    {
        check_access(row, global_col);
        return cells_[slot(row, global_col)];
    }
    [[nodiscard]] Cell& at(const CellIndex& idx) { return at(idx.row, idx.col); }

    /// All rows of a live column, top row first.
    [[nodiscard]] std::span<Cell> column(int64_t global_col)
    {
        check_access(0, global_col);
        return {cells_.data() + slot(0, global_col), sensor_.rows};
    }
    [[nodiscard]] const Cell& at(const CellIndex& idx) const { return at(idx.row, idx.col); }

    /// Continuous azimuth assigned to each row by the most recent firing (NaN where the row had no direction).
    [[nodiscard]] const std::vector<double>& last_firing_azimuths() const { return last_phi_; }

    /// Inserts all valid points of a firing and returns the newly finished global columns in increasing order.
    std::vector<int64_t> insert_firing(const Firing& firing)
    {
        const Placement placement = place(firing);
        std::fill(last_phi_.begin(), last_phi_.end(), kNaN);
        if (!placement.any_direction)
        {
            // no direction at all: nothing can be placed and nothing is finished
            counters_.invalid_points += firing.points.size();
            return {};
        }

        const bool first_firing = rear_phi_ < 0.0;
        const int64_t previous_next_unfinished = next_unfinished_column();
        if (first_firing)
        {
            const int64_t start = column_index(placement.rear_phi, column_width_);
            next_unfinished_.store(start, std::memory_order_release);
            first_live_.store(start, std::memory_order_release);
        }
        const int64_t late_before = first_firing ? next_unfinished_column() : previous_next_unfinished;

        for (int r = 0; r < rows(); ++r)
        {
            const FiringPoint& p = firing.points[static_cast<size_t>(r)];
            const PlacedEntry& e = placement.entries[static_cast<size_t>(r)];
            if (!p.valid || !e.has_direction)
                ++counters_.invalid_points;
            if (!e.has_direction)
                continue;
            last_phi_[static_cast<size_t>(r)] = e.phi;
            if (!p.valid)
                continue;
            if (e.col < late_before)
            {
                ++counters_.late_points;
                continue;
            }
            if (e.col >= first_live_column() + width_)
            {
                ++counters_.overflow_points;
                continue;
            }

            Cell incoming;
            incoming.occupied = true;
            incoming.world_xyz = to_float(e.world);
            incoming.sensor_xyz = p.sensor_xyz;
            const Vec3d stored = to_double(incoming.world_xyz);
            incoming.range = stored.norm();
            incoming.radius_xy = std::hypot(stored.x, stored.y);
            incoming.phi_cont = e.phi;
            incoming.global_col = e.col;
            incoming.row = r;
            incoming.timestamp_ns = firing.timestamp_ns;
            incoming.point_id = point_id(firing.index, sensor_.rows, static_cast<uint32_t>(r));

            const WriteOutcome outcome = cell_write_policy(cells_[slot(r, e.col)], std::move(incoming));
            if (outcome == WriteOutcome::stored)
                ++counters_.points_inserted;
            else
                ++counters_.collisions;
            newest_col_ = std::max(newest_col_, e.col);
        }

        rear_phi_ = std::max(rear_phi_, placement.rear_phi);
        const int64_t rear_col = column_index(rear_phi_, column_width_);
        std::vector<int64_t> finished;
        const int64_t from = next_unfinished_column();
        for (int64_t c = from; c < rear_col; ++c)
            finished.push_back(c);
        next_unfinished_.store(std::max(from, rear_col), std::memory_order_release);
        newest_col_ = std::max(newest_col_, next_unfinished_column() - 1);
        return finished;
    }

    /// Largest column any laser of `firing` reaches (valid or not), computed without modifying the image.
    [[nodiscard]] std::optional<int64_t> max_column_reached(const Firing& firing) const
    {
        const Placement placement = place(firing);
        std::optional<int64_t> result;
        for (const PlacedEntry& e : placement.entries)
            if (e.has_direction)
                result = std::max(result.value_or(e.col), e.col);
        return result;
    }

    /// End of stream: every column up to the newest written one becomes finished.
    std::vector<int64_t> finish_all()
    {
        std::vector<int64_t> finished;
        const int64_t from = next_unfinished_column();
        if (from < 0)
            return finished;
        for (int64_t c = from; c <= newest_col_; ++c)
            finished.push_back(c);
        next_unfinished_.store(std::max(from, newest_col_ + 1), std::memory_order_release);
        return finished;
    }

    /// Marks every column up to `global_col` finished without inserting anything.
    void finish_through(int64_t global_col)
    {
        if (global_col >= first_live_column() + width_)
            throw InvariantError("cannot finish column " + std::to_string(global_col) + " outside the buffer");
        if (global_col + 1 > next_unfinished_column())
            next_unfinished_.store(global_col + 1, std::memory_order_release);
        newest_col_ = std::max(newest_col_, global_col);
    }

    /// Clears the columns before `new_first_live` and makes their slots available. Returns the number cleared.
    int64_t reclaim_before(int64_t new_first_live)
    {
        const int64_t first = first_live_column();
        if (first < 0 || new_first_live <= first)
            return 0;
        if (new_first_live > next_unfinished_column())
            throw InvariantError("reclaiming column " + std::to_string(new_first_live - 1) +
                                 ", which is not finished yet");
        for (int64_t c = first; c < new_first_live; ++c)
            for (int r = 0; r < rows(); ++r)
                cells_[slot(r, c)] = Cell{};
        first_live_.store(new_first_live, std::memory_order_release);
        return new_first_live - first;
    }

    [[nodiscard]] size_t local_column(int64_t global_col) const
    {
        return static_cast<size_t>(((global_col % width_) + width_) % width_);
    }

  private:
    static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    struct PlacedEntry
    {
        Vec3d world;
        double phi{0.0};
        int64_t col{0};
        bool has_direction{false};
    };

    struct Placement
    {
        std::vector<PlacedEntry> entries;
        double rear_phi{0.0};
        bool any_direction{false};
    };

    // Continuous azimuth and column of every entry. The rearmost laser is the entry with the smallest unwrapped
    // azimuth; raw azimuths are unwrapped within half a rotation of the previous rearmost laser.
    [[nodiscard]] Placement place(const Firing& firing) const
    {
        firing.validate(sensor_.rows);
        Placement out;
        out.entries.resize(sensor_.rows);
        std::vector<double> raw(sensor_.rows, 0.0);
        std::vector<double> unwrapped(sensor_.rows, 0.0);

        std::optional<double> reference;
        if (rear_phi_ >= 0.0)
            reference = rear_phi_;
        double firing_rear = std::numeric_limits<double>::infinity();
        for (size_t r = 0; r < out.entries.size(); ++r)
        {
            PlacedEntry& e = out.entries[r];
            const Vec3d local = to_double(firing.points[r].sensor_xyz);
            e.world = frame_ == CoordinateFrame::world ? firing.rotation.apply(local) : local;
            const auto a = raw_azimuth(e.world.x, e.world.y);
            if (!a)
                continue;
            e.has_direction = true;
            raw[r] = *a;
            if (!reference)
                reference = *a;
            unwrapped[r] = unwrap_near(*a, *reference);
            firing_rear = std::min(firing_rear, unwrapped[r]);
        }
        if (!std::isfinite(firing_rear))
            return out;
        out.any_direction = true;

        // the very first firing may start right behind the negative x-axis
        if (rear_phi_ < 0.0 && firing_rear < 0.0)
        {
            firing_rear += kTwoPi;
            for (double& u : unwrapped)
                u += kTwoPi;
        }
        out.rear_phi = firing_rear;

        const auto rear_rotation = static_cast<int64_t>(std::floor(firing_rear / kTwoPi));
        bool crosses = false;
        for (size_t r = 0; r < out.entries.size(); ++r)
            if (out.entries[r].has_direction && std::floor(unwrapped[r] / kTwoPi) > static_cast<double>(rear_rotation))
                crosses = true;
        for (size_t r = 0; r < out.entries.size(); ++r)
        {
            PlacedEntry& e = out.entries[r];
            if (!e.has_direction)
                continue;
            const bool past = std::floor(unwrapped[r] / kTwoPi) > static_cast<double>(rear_rotation);
            const int64_t rotation = rotation_index_for_point(raw[r], rear_rotation, crosses, past);
            e.phi = *continuous_azimuth(e.world.x, e.world.y, rotation);
            e.col = column_index(e.phi, column_width_);
        }
        return out;
    }

    // unwrapped value of `raw` within half a rotation of `reference`
    static double unwrap_near(double raw, double reference)
    {
        double phi = raw + kTwoPi * std::floor(reference / kTwoPi);
        if (phi < reference - std::numbers::pi)
            phi += kTwoPi;
        else if (phi >= reference + std::numbers::pi)
            phi -= kTwoPi;
        return phi;
    }

    [[nodiscard]] size_t slot(int row, int64_t global_col) const
    {
        return local_column(global_col) * sensor_.rows + static_cast<size_t>(row);
    }

    void check_access(int row, int64_t global_col) const
    {
        if (row < 0 || row >= rows() || !contains(global_col))
            throw std::out_of_range("range image access outside live window: row " + std::to_string(row) +
                                    ", column " + std::to_string(global_col));
    }

    SensorModel sensor_;
    int64_t width_;
    CoordinateFrame frame_;
    double column_width_;
    std::vector<Cell> cells_; // column major
    std::vector<double> last_phi_;
    RangeImageCounters counters_;

    std::atomic<int64_t> first_live_{-1};
    std::atomic<int64_t> next_unfinished_{-1};
    int64_t newest_col_{-1};
    double rear_phi_{-1.0};
};

} // namespace contseg

#endif

#ifndef CONTSEG_GROUND_SEG_HPP
#define CONTSEG_GROUND_SEG_HPP

#include <span>
#include <unordered_map>
#include <vector>

#include <contseg/range_image.hpp>

namespace contseg
{

/// Ego vehicle box in sensor coordinates plus the height of its ground contact.
struct EgoBounds
{
    Vec3d min{-2.5, -1.2, -2.0};
    Vec3d max{2.5, 1.2, 0.3};
    double min_z{-1.8};

    [[nodiscard]] bool contains(const Vec3f& p) const
    {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
    }

    void validate() const
    {
        if (!(min.x < max.x && min.y < max.y && min.z < max.z))
            throw ConfigError("ego box needs min < max on every axis");
    }
};

enum class GroundMode
{
    segment, // two-pass classification
    none,    // every valid non-ego point is an obstacle
};

struct GroundParams
{
    GroundMode mode{GroundMode::segment};
    double slope_deg{10.0};
    double z_match_tol{0.3};
    double z_ground_tol{0.2};
    double cell_size{1.0};
    double weight_cap{100.0};
    double window_size{200.0};
    int max_gap_rows{2};
    EgoBounds ego;

    void validate() const
    {
        if (!(slope_deg > 0.0 && slope_deg < 90.0))
            throw ConfigError("ground.slope_deg must be in (0, 90)");
        if (!(z_match_tol >= 0.0) || !(z_ground_tol >= 0.0))
            throw ConfigError("ground tolerances must be non-negative");
        if (!(cell_size > 0.0) || !(weight_cap >= 1.0) || !(window_size >= cell_size))
            throw ConfigError("invalid terrain grid parameters");
        ego.validate();
    }
};

/// World-fixed running-mean terrain height grid, limited to a square window around the sensor.
class TerrainGrid
{
  public:
    struct Sample
    {
        double height{0.0};
        double weight{0.0};
    };

    TerrainGrid(double cell_size = 1.0, double weight_cap = 100.0, double window_size = 200.0)
        : cell_size_(cell_size), weight_cap_(weight_cap),
          half_cells_(static_cast<int64_t>(std::ceil(window_size / (2.0 * cell_size))))
    {
    }

    [[nodiscard]] double cell_size() const { return cell_size_; }
    [[nodiscard]] double weight_cap() const { return weight_cap_; }

    void update(double x, double y, double z)
    {
        const auto key = key_of(x, y);
        if (!key)
            return;
        Sample& s = samples_[*key];
        s.height = (s.weight * s.height + z) / (s.weight + 1.0);
        s.weight = std::min(s.weight + 1.0, weight_cap_);
    }

    [[nodiscard]] std::optional<Sample> sample(double x, double y) const
    {
        const auto key = key_of(x, y);
        if (!key)
            return std::nullopt;
        const auto it = samples_.find(*key);
        if (it == samples_.end() || it->second.weight <= 0.0)
            return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::optional<double> height(double x, double y) const
    {
        const auto s = sample(x, y);
        return s ? std::optional<double>(s->height) : std::nullopt;
    }

    /// Moves the window center; cells that leave the window are forgotten.
    void recenter(double x, double y)
    {
        center_x_ = cell_coord(x);
        center_y_ = cell_coord(y);
        std::erase_if(samples_, [&](const auto& kv) {
            const auto [cx, cy] = decode(kv.first);
            return std::abs(cx - center_x_) > half_cells_ || std::abs(cy - center_y_) > half_cells_;
        });
    }

    [[nodiscard]] size_t size() const { return samples_.size(); }

  private:
    [[nodiscard]] int64_t cell_coord(double v) const { return static_cast<int64_t>(std::floor(v / cell_size_)); }

    [[nodiscard]] std::optional<int64_t> key_of(double x, double y) const
    {
        const int64_t cx = cell_coord(x);
        const int64_t cy = cell_coord(y);
        if (std::abs(cx - center_x_) > half_cells_ || std::abs(cy - center_y_) > half_cells_)
            return std::nullopt;
        return (cx << 32) ^ (cy & 0xffffffffLL);
    }

    static std::pair<int64_t, int64_t> decode(int64_t key)
    {
        return {key >> 32, static_cast<int64_t>(static_cast<int32_t>(key & 0xffffffffLL))};
    }

    double cell_size_;
    double weight_cap_;
    int64_t half_cells_;
    int64_t center_x_{0};
    int64_t center_y_{0};
    std::unordered_map<int64_t, Sample> samples_;
};

/// First pass, bottom to top: ego points, then a ground chain that starts at the ego ground height and continues
/// while the slope to the previous ground point stays below the threshold and the radius does not shrink. Gaps of up to `max_gap_rows` missing
/// returns do not break the chain; a longer gap restarts it.
inline std::vector<Label> classify_column_pass1(std::span<const Cell> column,
                                                const EgoBounds& ego,
                                                double slope_threshold_rad,
                                                double z_match_tol,
                                                int max_gap_rows = 2)
{
    enum class Chain
    {
        waiting,
        active,
        broken
    };

    std::vector<Label> labels(column.size(), Label::empty);
    const double max_slope = std::tan(slope_threshold_rad);
    Chain chain = Chain::waiting;
    const Cell* previous = nullptr;
    int gap = 0;

    for (size_t i = column.size(); i-- > 0;)
    {
        const Cell& cell = column[i];
        if (!cell.occupied)
        {
            if (chain == Chain::active && ++gap > max_gap_rows)
            {
                chain = Chain::waiting;
                previous = nullptr;
            }
            continue;
        }
        if (ego.contains(cell.sensor_xyz))
        {
            labels[i] = Label::ego;
            continue;
        }

        const double z = cell.world_xyz.z;
        bool ground = false;
        if (chain == Chain::waiting)
        {
            ground = std::abs(z - ego.min_z) <= z_match_tol;
        }
        else if (chain == Chain::active)
        {
            const double dz = std::abs(z - static_cast<double>(previous->world_xyz.z));
            const double dxy = std::hypot(static_cast<double>(cell.world_xyz.x) - previous->world_xyz.x,
                                          static_cast<double>(cell.world_xyz.y) - previous->world_xyz.y);
            // a point nearer than the previous ground point occludes it rather than continuing the surface
            const bool outward = cell.radius_xy >= previous->radius_xy;
            ground = outward && (dz == 0.0 || (dxy > 0.0 && dz / dxy <= max_slope));
        }

        if (ground)
        {
            labels[i] = Label::ground;
            chain = Chain::active;
            previous = &cell;
            gap = 0;
        }
        else
        {
            labels[i] = Label::obstacle;
            chain = Chain::broken;
        }
    }
    return labels;
}

/// Blends the certain first-pass ground points of a column into the terrain grid. The topmost point of each chain
/// is left out: it is the one most likely to be the foot of an obstacle.
inline void update_terrain(TerrainGrid& grid, std::span<const Cell> column, std::span<const Label> pass1)
{
    bool above_is_ground = false;
    for (size_t i = 0; i < column.size(); ++i)
    {
        if (!column[i].occupied)
            continue;
        const bool ground = pass1[i] == Label::ground;
        if (ground && above_is_ground)
            grid.update(column[i].world_xyz.x, column[i].world_xyz.y, column[i].world_xyz.z);
        above_is_ground = ground;
    }
}

/// Second pass: obstacle points close to the estimated terrain become ground. Never turns ground into obstacle.
inline std::vector<Label> classify_column_pass2(std::span<const Cell> column,
                                                std::span<const Label> pass1,
                                                const TerrainGrid& grid,
                                                double z_ground_tol)
{
    std::vector<Label> labels(pass1.begin(), pass1.end());
    for (size_t i = 0; i < column.size(); ++i)
    {
        if (labels[i] != Label::obstacle)
            continue;
        const Cell& cell = column[i];
        const auto h = grid.height(cell.world_xyz.x, cell.world_xyz.y);
        if (h && std::abs(static_cast<double>(cell.world_xyz.z) - *h) <= z_ground_tol)
            labels[i] = Label::ground;
    }
    return labels;
}

/// Labels finished columns in order. Owns the terrain grid, which only ever sees strictly earlier columns when a
/// column is classified.
class GroundSegmenter
{
  public:
    explicit GroundSegmenter(GroundParams params)
        : params_(params), grid_(params.cell_size, params.weight_cap, params.window_size)
    {
        params_.validate();
    }

    [[nodiscard]] const GroundParams& params() const { return params_; }
    [[nodiscard]] const TerrainGrid& terrain() const { return grid_; }

    void process(std::span<Cell> column)
    {
        if (params_.mode == GroundMode::none)
        {
            for (Cell& c : column)
                if (c.occupied)
                    c.label = params_.ego.contains(c.sensor_xyz) ? Label::ego : Label::obstacle;
            return;
        }

        const std::span<const Cell> view(column.data(), column.size());
        const auto pass1 = classify_column_pass1(
            view, params_.ego, params_.slope_deg * std::numbers::pi / 180.0, params_.z_match_tol, params_.max_gap_rows);
        const auto labels = classify_column_pass2(view, pass1, grid_, params_.z_ground_tol);
        update_terrain(grid_, view, pass1);
        for (size_t i = 0; i < column.size(); ++i)
            column[i].label = labels[i];
    }

  private:
    GroundParams params_;
    TerrainGrid grid_;
};

} // namespace contseg

#endif

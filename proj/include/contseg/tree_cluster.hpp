#ifndef CONTSEG_TREE_CLUSTER_HPP
#define CONTSEG_TREE_CLUSTER_HPP

#include <vector>

#include <contseg/range_image.hpp>

namespace contseg
{

enum class SearchMode
{
    exact,
    heuristic_a,
};

struct ClusterParams
{
    double distance_threshold{0.7};
    SearchMode mode{SearchMode::exact};
    int inner_width{2};
    bool checkerboard{false};
    bool vertical_prune{false};

    void validate() const
    {
        if (!(distance_threshold >= 0.0))
            throw ConfigError("cluster.d_T must be non-negative");
        if (inner_width < 0)
            throw ConfigError("cluster.inner_width must be non-negative");
    }
};

/// Largest azimuth difference at which a point at horizontal radius `radius` can still have a neighbor closer than
/// `distance_threshold`, capped at pi/2.
inline double fov_half_angle(double radius, double distance_threshold)
{
    if (!(radius > 0.0) || !(distance_threshold > 0.0))
        throw ConfigError("field of view needs a positive radius and distance threshold");
    return std::asin(std::min(1.0, distance_threshold / radius));
}

struct FovSpec
{
    double half_angle{0.0};
    int64_t col_span{1};
    int64_t inner_width{2};
};

inline FovSpec make_fov(double radius, double distance_threshold, double column_width, int64_t inner_width)
{
    FovSpec spec;
    spec.half_angle = fov_half_angle(radius, distance_threshold);
    spec.col_span = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(spec.half_angle / column_width)));
    spec.inner_width = std::min(inner_width, spec.col_span);
    return spec;
}

/// Visits the search window of `center` in its fixed order: the current column upward from the cell and then
/// downward, followed by the columns to the left (nearest first), each from top to bottom. `visit(idx, offset)`
/// receives the column offset (0, -1, ...) and returns false to stop.
template <typename Visit>
void for_each_fov_cell(const CellIndex& center, const FovSpec& spec, int rows, Visit&& visit)
{
    for (int r = center.row - 1; r >= 0; --r)
        if (!visit(CellIndex{center.col, r}, int64_t{0}))
            return;
    for (int r = center.row + 1; r < rows; ++r)
        if (!visit(CellIndex{center.col, r}, int64_t{0}))
            return;
    for (int64_t offset = 1; offset <= spec.col_span; ++offset)
        for (int r = 0; r < rows; ++r)
            if (!visit(CellIndex{center.col - offset, r}, -offset))
                return;
}

inline std::vector<CellIndex> traverse_fov_exact(const CellIndex& center, const FovSpec& spec, int rows)
{
    std::vector<CellIndex> order;
    for_each_fov_cell(center, spec, rows, [&](const CellIndex& idx, int64_t) {
        order.push_back(idx);
        return true;
    });
    return order;
}

/// Heuristic A order: identical to the exact order, but outer cells (offset beyond the inner width) are only
/// visited while `associated()` is false.
template <typename Associated>
std::vector<CellIndex>
traverse_fov_heuristic_a(const CellIndex& center, const FovSpec& spec, int rows, Associated&& associated)
{
    std::vector<CellIndex> order;
    for_each_fov_cell(center, spec, rows, [&](const CellIndex& idx, int64_t offset) {
        if (-offset > spec.inner_width && associated())
            return false;
        order.push_back(idx);
        return true;
    });
    return order;
}

/// Heuristic B: keep cells on the even squares of a checkerboard.
inline bool checkerboard_filter(int64_t row, int64_t global_col)
{
    return ((row + global_col) % 2 + 2) % 2 == 0;
}

struct TreeCounters
{
    uint64_t points_associated{0};
    uint64_t trees_created{0};
    uint64_t edges_created{0};
    uint64_t cells_visited{0};
    uint64_t truncated_columns{0};
    uint64_t skipped_points{0};
};

/// Builds point trees and the graph of trees column by column.
class TreeClusterer
{
  public:
    explicit TreeClusterer(ClusterParams params) : params_(params) { params_.validate(); }

    [[nodiscard]] const ClusterParams& params() const { return params_; }
    [[nodiscard]] const TreeCounters& counters() const { return counters_; }

    /// Associates every obstacle point of a finished column, top row first. Returns the roots of new trees.
    std::vector<CellIndex> associate_column(RangeImage& image, int64_t global_col)
    {
        std::vector<CellIndex> new_roots;
        auto column = image.column(global_col);
        for (Cell& cell : column)
        {
            if (!cell.occupied || cell.label != Label::obstacle)
                continue;
            if (params_.checkerboard && !checkerboard_filter(cell.row, cell.global_col))
            {
                cell.label = Label::skipped;
                ++counters_.skipped_points;
                continue;
            }
            if (associate_point(image, cell))
                new_roots.push_back(cell.index());
        }
        return new_roots;
    }

    /// Returns true when the point became the root of a new tree.
    bool associate_point(RangeImage& image, Cell& cell)
    {
        const CellIndex self = cell.index();
        const double threshold = params_.distance_threshold;
        const double threshold_sq = threshold * threshold;
        const int64_t first_live = image.first_live_column();
        const Vec3d p = to_double(cell.world_xyz);

        FovSpec spec{0.0, 0, 0};
        if (threshold > 0.0)
            spec = make_fov(cell.radius_xy, threshold, image.column_width(), params_.inner_width);

        int64_t truncated_at = std::numeric_limits<int64_t>::max();
        if (threshold > 0.0)
            for_each_fov_cell(self, spec, image.rows(), [&](const CellIndex& idx, int64_t offset) {
                if (params_.mode == SearchMode::heuristic_a && -offset > spec.inner_width && cell.root.is_set())
                    return false;
                if (idx.col < first_live)
                {
                    if (truncated_at != idx.col)
                    {
                        ++counters_.truncated_columns;
                        truncated_at = idx.col;
                    }
                    return true;
                }
                ++counters_.cells_visited;
                Cell& other = image.at(idx);
                if (!other.occupied || other.label != Label::obstacle || !other.root.is_set() || other.published)
                    return true;
                if (cell.root.is_set() && other.root == cell.root)
                    return true;
                const Vec3d q = to_double(other.world_xyz);
                if (params_.vertical_prune && std::abs(p.z - q.z) > threshold)
                    return true;
                const double dx = p.x - q.x;
                const double dy = p.y - q.y;
                const double dz = p.z - q.z;
                if (dx * dx + dy * dy + dz * dz >= threshold_sq)
                    return true;

                if (!cell.root.is_set())
                {
                    cell.root = other.root;
                    cell.parent = idx;
                    other.children.push_back(self);
                }
                else
                {
                    TreeMeta& mine = meta_of(image, cell.root);
                    TreeMeta& theirs = meta_of(image, other.root);
                    const bool added = mine.add_edge(other.root);
                    theirs.add_edge(cell.root);
                    if (added)
                        ++counters_.edges_created;
                }
                return true;
            });

        bool created = false;
        if (!cell.root.is_set())
        {
            cell.root = self;
            cell.tree_meta = std::make_unique<TreeMeta>();
            ++counters_.trees_created;
            created = true;
        }
        TreeMeta& meta = meta_of(image, cell.root);
        meta.point_count += 1;
        meta.phi_finished = std::max(meta.phi_finished, cell.phi_cont + spec.half_angle);
        ++counters_.points_associated;
        return created;
    }

    static TreeMeta& meta_of(RangeImage& image, const CellIndex& root)
    {
        Cell& root_cell = image.at(root);
        if (!root_cell.tree_meta)
            throw InvariantError("cell (" + std::to_string(root.row) + ", " + std::to_string(root.col) +
                                 ") is referenced as a root but carries no tree record");
        return *root_cell.tree_meta;
    }

  private:
    ClusterParams params_;
    TreeCounters counters_;
};

} // namespace contseg

#endif

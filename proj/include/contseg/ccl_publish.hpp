#ifndef CONTSEG_CCL_PUBLISH_HPP
#define CONTSEG_CCL_PUBLISH_HPP

#include <deque>
#include <span>
#include <unordered_set>
#include <vector>

#include <contseg/range_image.hpp>

namespace contseg
{

struct ClusterPoint
{
    Vec3f xyz;
    int32_t row{0};
    int64_t col{0};
    int64_t timestamp_ns{0};
    uint64_t point_id{0};

    friend bool operator==(const ClusterPoint&, const ClusterPoint&) = default;
};

/// A published instance. `publish_col` is the rearmost-laser column at publish time.
struct ClusterMessage
{
    uint64_t id{0};
    bool force_finished{false};
    int64_t publish_col{0};
    int64_t reference_timestamp_ns{0};
    int64_t latency_ns{0};
    std::vector<ClusterPoint> points;

    friend bool operator==(const ClusterMessage&, const ClusterMessage&) = default;
};

struct PublishParams
{
    int ccl_every{1};
    int64_t forced_margin{64};
    size_t min_cluster_size{1};

    void validate() const
    {
        if (ccl_every < 1)
            throw ConfigError("ccl.every must be at least 1");
        if (forced_margin < 1)
            throw ConfigError("ccl.forced_margin must be at least 1");
        if (min_cluster_size < 1)
            throw ConfigError("ccl.min_cluster_size must be at least 1");
    }
};

struct PublishCounters
{
    uint64_t ccl_runs{0};
    uint64_t clusters_published{0};
    uint64_t clusters_forced{0};
    uint64_t clusters_filtered{0};
    uint64_t points_published{0};
    uint64_t columns_reclaimed{0};
};

/// Keeps the set of unpublished tree roots, finds complete components of the tree graph and publishes them.
class ClusterPublisher
{
  public:
    explicit ClusterPublisher(PublishParams params = {}) : params_(params) { params_.validate(); }

    [[nodiscard]] const PublishParams& params() const { return params_; }
    [[nodiscard]] const PublishCounters& counters() const { return counters_; }
    [[nodiscard]] const std::vector<CellIndex>& unpublished_roots() const { return roots_; }

    void add_roots(std::span<const CellIndex> roots) { roots_.insert(roots_.end(), roots.begin(), roots.end()); }

    /// Connected component labeling over the unpublished trees after column `latest_col` was clustered. A component
    /// is published iff every tree satisfies rear_azimuth > phi_finished. Incomplete components are still traversed
    /// so that all their trees carry the current stamp.
    std::vector<ClusterMessage>
    ccl_run(RangeImage& image, double rear_azimuth, int64_t latest_col, int64_t publish_time_ns)
    {
        ++counters_.ccl_runs;
        std::vector<ClusterMessage> out;
        bool any_published = false;
        std::deque<CellIndex> queue;
        std::vector<CellIndex> component;

        for (const CellIndex& start : roots_)
        {
            Cell& start_cell = image.at(start);
            if (start_cell.visited_stamp == latest_col)
                continue;
            start_cell.visited_stamp = latest_col;
            queue.assign(1, start);
            component.clear();
            bool complete = true;
            while (!queue.empty())
            {
                const CellIndex v = queue.front();
                queue.pop_front();
                TreeMeta& meta = live_meta(image, v);
                component.push_back(v);
                if (!(rear_azimuth > meta.phi_finished))
                    complete = false;
                for (const CellIndex& w : meta.edges)
                {
                    Cell& other = linked_root(image, v, w);
                    if (other.visited_stamp != latest_col)
                    {
                        other.visited_stamp = latest_col;
                        queue.push_back(w);
                    }
                }
            }
            if (complete)
            {
                publish(image, component, latest_col + 1, publish_time_ns, false, out);
                any_published = true;
            }
        }
        if (any_published)
            drop_published_roots(image);
        return out;
    }

    /// Publishes, regardless of completion, every component holding a root that is about to fall out of the buffer.
    std::vector<ClusterMessage> forced_finish(RangeImage& image, int64_t latest_col, int64_t publish_time_ns)
    {
        std::vector<ClusterMessage> out;
        const int64_t limit = image.width() - params_.forced_margin;
        bool any = false;
        for (const CellIndex& root : roots_)
        {
            if (latest_col - root.col < limit)
                break; // roots are kept in column order
            if (image.at(root).tree_meta->published)
                continue;
            std::vector<CellIndex> component = collect_component(image, root);
            publish(image, component, latest_col + 1, publish_time_ns, true, out);
            any = true;
        }
        if (any)
            drop_published_roots(image);
        return out;
    }

    /// Clears every column older than the oldest unpublished root (or older than `latest_col` if none remain).
    int64_t reclaim_columns(RangeImage& image, int64_t latest_col)
    {
        int64_t keep_from = latest_col;
        for (const CellIndex& root : roots_)
            keep_from = std::min(keep_from, root.col);
        keep_from = std::max(keep_from, image.first_live_column());
        counters_.columns_reclaimed += static_cast<uint64_t>(image.reclaim_before(keep_from));
        return image.first_live_column();
    }

  private:
    static TreeMeta& live_meta(RangeImage& image, const CellIndex& root)
    {
        Cell& cell = image.at(root);
        if (!cell.tree_meta)
            throw InvariantError("unpublished root (" + std::to_string(root.row) + ", " + std::to_string(root.col) +
                                 ") has no tree record");
        if (cell.tree_meta->published)
            throw InvariantError("root (" + std::to_string(root.row) + ", " + std::to_string(root.col) +
                                 ") is listed as unpublished but was already published");
        return *cell.tree_meta;
    }

    static Cell& linked_root(RangeImage& image, const CellIndex& from, const CellIndex& to)
    {
        if (!image.contains(to.col) || !image.at(to).tree_meta || image.at(to).tree_meta->published)
            throw InvariantError("dangling edge from tree (" + std::to_string(from.row) + ", " +
                                 std::to_string(from.col) + ") to published or cleared tree (" +
                                 std::to_string(to.row) + ", " + std::to_string(to.col) + ")");
        return image.at(to);
    }

    static std::vector<CellIndex> collect_component(RangeImage& image, const CellIndex& start)
    {
        std::vector<CellIndex> component{start};
        std::unordered_set<CellIndex> seen{start};
        for (size_t i = 0; i < component.size(); ++i)
        {
            const CellIndex v = component[i];
            for (const CellIndex& w : live_meta(image, v).edges)
            {
                linked_root(image, v, w);
                if (seen.insert(w).second)
                    component.push_back(w);
            }
        }
        return component;
    }

    void publish(RangeImage& image,
                 std::span<const CellIndex> component,
                 int64_t publish_col,
                 int64_t publish_time_ns,
                 bool forced,
                 std::vector<ClusterMessage>& out)
    {
        ClusterMessage msg;
        msg.force_finished = forced;
        msg.publish_col = publish_col;
        msg.reference_timestamp_ns = std::numeric_limits<int64_t>::min();

        std::vector<CellIndex> stack;
        for (const CellIndex& root : component)
        {
            TreeMeta& meta = *image.at(root).tree_meta;
            const size_t before = msg.points.size();
            stack.assign(1, root);
            while (!stack.empty())
            {
                const CellIndex idx = stack.back();
                stack.pop_back();
                Cell& cell = image.at(idx);
                if (cell.published)
                    throw InvariantError("point (" + std::to_string(idx.row) + ", " + std::to_string(idx.col) +
                                         ") reached twice while collecting a cluster");
                cell.published = true;
                msg.points.push_back({cell.world_xyz, cell.row, cell.global_col, cell.timestamp_ns, cell.point_id});
                msg.reference_timestamp_ns = std::max(msg.reference_timestamp_ns, cell.timestamp_ns);
                for (auto it = cell.children.rbegin(); it != cell.children.rend(); ++it)
                    stack.push_back(*it);
            }
            if (static_cast<int64_t>(msg.points.size() - before) != meta.point_count)
                throw InvariantError("tree at (" + std::to_string(root.row) + ", " + std::to_string(root.col) +
                                     ") holds " + std::to_string(msg.points.size() - before) +
                                     " points but counted " + std::to_string(meta.point_count));
            meta.published = true;
        }

        msg.latency_ns = publish_time_ns - msg.reference_timestamp_ns;
        counters_.points_published += msg.points.size();
        if (forced)
            ++counters_.clusters_forced;
        if (msg.points.size() < params_.min_cluster_size)
        {
            ++counters_.clusters_filtered;
            return;
        }
        msg.id = next_id_++;
        ++counters_.clusters_published;
        out.push_back(std::move(msg));
    }

    void drop_published_roots(RangeImage& image)
    {
        std::erase_if(roots_, [&](const CellIndex& r) { return image.at(r).tree_meta->published; });
    }

    PublishParams params_;
    PublishCounters counters_;
    std::vector<CellIndex> roots_;
    uint64_t next_id_{1};
};

} // namespace contseg

#endif

#ifndef CONTSEG_RUN_HPP
#define CONTSEG_RUN_HPP

#include <unordered_map>
#include <vector>

#include <contseg/metrics.hpp>
#include <contseg/oracle.hpp>
#include <contseg/pipeline.hpp>

namespace contseg
{

/// Final state of one cell as seen right after its column was clustered.
struct ObservedPoint
{
    uint64_t point_id{0};
    Vec3f xyz;
    double phi_cont{0.0};
    double radius_xy{0.0};
    int64_t col{0};
    int32_t row{0};
    Label label{Label::empty};
    CellIndex root;
    CellIndex parent;
};

struct RunResult
{
    std::vector<ClusterMessage> clusters;
    std::vector<ObservedPoint> points; // every stored point, in processing order
    PipelineStats stats;

    [[nodiscard]] std::vector<LabelRecord> predicted_labels() const
    {
        std::unordered_map<uint64_t, uint32_t> cluster_of;
        for (const ClusterMessage& c : clusters)
            for (const ClusterPoint& p : c.points)
                cluster_of[p.point_id] = static_cast<uint32_t>(c.id);
        std::vector<LabelRecord> out;
        out.reserve(points.size());
        for (const ObservedPoint& p : points)
        {
            const auto it = cluster_of.find(p.point_id);
            out.push_back({p.point_id, it == cluster_of.end() ? 0u : it->second});
        }
        return out;
    }
};

/// Runs a whole stream through a pipeline. `next()` returns firings until nullopt.
template <typename Next>
RunResult run_stream(const SensorModel& sensor,
                     const PipelineConfig& config,
                     Next&& next,
                     Execution execution = Execution::reference,
                     const typename Pipeline::Sink& extra_sink = {})
{
    RunResult result;
    Pipeline pipeline(
        sensor,
        config,
        [&](ClusterMessage&& c) {
            if (extra_sink)
                extra_sink(ClusterMessage(c));
            result.clusters.push_back(std::move(c));
        },
        execution);
    pipeline.set_column_observer([&](std::span<const Cell> column) {
        for (const Cell& c : column)
            if (c.occupied)
                result.points.push_back(
                    {c.point_id, c.world_xyz, c.phi_cont, c.radius_xy, c.global_col, c.row, c.label, c.root, c.parent});
    });
    while (auto firing = next())
        pipeline.push(*firing);
    pipeline.finish();
    result.stats = pipeline.stats();
    return result;
}

inline RunResult run_firings(const SensorModel& sensor,
                             const PipelineConfig& config,
                             const std::vector<Firing>& firings,
                             Execution execution = Execution::reference)
{
    size_t i = 0;
    return run_stream(
        sensor,
        config,
        [&]() -> std::optional<Firing> {
            if (i == firings.size())
                return std::nullopt;
            return firings[i++];
        },
        execution);
}

struct DeliveryReport
{
    uint64_t obstacle_points{0};
    uint64_t missing{0};    // obstacle points in no cluster
    uint64_t duplicated{0}; // point ids published more than once
    uint64_t foreign{0};    // published ids that are not obstacle points

    [[nodiscard]] bool exactly_once() const { return missing == 0 && duplicated == 0 && foreign == 0; }
};

inline DeliveryReport check_delivery(const RunResult& run)
{
    DeliveryReport r;
    std::unordered_map<uint64_t, int> count;
    for (const ObservedPoint& p : run.points)
        if (p.label == Label::obstacle)
        {
            count.emplace(p.point_id, 0);
            ++r.obstacle_points;
        }
    for (const ClusterMessage& c : run.clusters)
        for (const ClusterPoint& p : c.points)
        {
            const auto it = count.find(p.point_id);
            if (it == count.end())
                ++r.foreign;
            else if (++it->second == 2)
                ++r.duplicated;
        }
    for (const auto& [id, n] : count)
        if (n == 0)
            ++r.missing;
    return r;
}

struct OracleReport
{
    uint64_t points{0};
    uint64_t clusters{0};
    uint64_t components{0};
    double agreement{1.0};
    DeliveryReport delivery;
};

/// Compares the published clusters with the batch single-linkage partition of the same obstacle points.
inline OracleReport compare_with_oracle(const RunResult& run,
                                        double distance_threshold,
                                        std::optional<double> max_azimuth_gap = std::nullopt)
{
    OracleReport report;
    report.delivery = check_delivery(run);
    std::unordered_map<uint64_t, uint32_t> cluster_of;
    for (const ClusterMessage& c : run.clusters)
        for (const ClusterPoint& p : c.points)
            cluster_of[p.point_id] = static_cast<uint32_t>(c.id);

    std::vector<OraclePoint> points;
    std::vector<uint32_t> predicted;
    for (const ObservedPoint& p : run.points)
    {
        if (p.label != Label::obstacle)
            continue;
        points.push_back({p.xyz, p.phi_cont});
        const auto it = cluster_of.find(p.point_id);
        predicted.push_back(it == cluster_of.end() ? 0u : it->second);
    }
    const auto oracle = oracle_single_linkage(points, distance_threshold, max_azimuth_gap);
    report.points = points.size();
    report.clusters = run.clusters.size();
    report.components = oracle.empty() ? 0 : *std::max_element(oracle.begin(), oracle.end());
    report.agreement = partition_agreement(predicted, oracle);
    return report;
}

} // namespace contseg

#endif

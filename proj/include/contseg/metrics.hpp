#ifndef CONTSEG_METRICS_HPP
#define CONTSEG_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include <contseg/ccl_publish.hpp>
#include <contseg/labels.hpp>
#include <contseg/oracle.hpp>

namespace contseg
{

struct UseOse
{
    double use{0.0};
    double ose{0.0};
};

namespace detail
{
// Sum over groups of the entropy of `member` labels inside each `group`, natural log.
inline double grouped_entropy(std::span<const uint32_t> group, std::span<const uint32_t> member)
{
    std::unordered_map<uint32_t, std::unordered_map<uint32_t, uint64_t>> counts;
    for (size_t i = 0; i < group.size(); ++i)
        ++counts[group[i]][member[i]];
    double total = 0.0;
    for (const auto& [g, inner] : counts)
    {
        uint64_t n = 0;
        for (const auto& kv : inner)
            n += kv.second;
        double h = 0.0;
        for (const auto& kv : inner)
        {
            const double p = static_cast<double>(kv.second) / static_cast<double>(n);
            h -= p * std::log(p);
        }
        total += h;
    }
    return total;
}
} // namespace detail

/// Under- and over-segmentation entropy of aligned label arrays. USE sums, over predicted clusters, the entropy of
/// ground truth instances inside the cluster; OSE sums, over ground truth instances, the entropy of predicted
/// clusters inside the instance.
inline UseOse use_ose(std::span<const uint32_t> predicted, std::span<const uint32_t> ground_truth)
{
    if (predicted.size() != ground_truth.size())
        throw DataError("predicted and ground truth labelings differ in length");
    UseOse r;
    r.use = std::max(0.0, detail::grouped_entropy(predicted, ground_truth));
    r.ose = std::max(0.0, detail::grouped_entropy(ground_truth, predicted));
    return r;
}

struct MeanStd
{
    double mean{0.0};
    double std{0.0};
};

inline MeanStd mean_std(std::span<const double> values)
{
    MeanStd r;
    if (values.empty())
        return r;
    for (double v : values)
        r.mean += v;
    r.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values)
        var += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(var / static_cast<double>(values.size()));
    return r;
}

struct FrameScore
{
    uint64_t frame{0};
    uint64_t points{0};
    UseOse score;
};

struct SegmentationReport
{
    std::vector<FrameScore> frames;
    MeanStd use;
    MeanStd ose;
    uint64_t gt_points{0};
    uint64_t predicted_points{0};
    uint64_t evaluated_points{0};
    uint64_t unclustered_instance_points{0}; // gt instance points without a predicted cluster
};

/// Joins predictions to ground truth by point id and scores every frame (block of `firings_per_rotation` firings)
/// separately. Points count when both the ground truth instance and the predicted cluster are non-zero.
inline SegmentationReport evaluate_segmentation(std::span<const LabelRecord> predicted,
                                                std::span<const LabelRecord> ground_truth,
                                                uint32_t rows,
                                                uint32_t firings_per_rotation)
{
    if (rows == 0 || firings_per_rotation == 0)
        throw DataError("frame layout needs positive rows and firings per rotation");
    std::unordered_map<uint64_t, uint32_t> gt;
    gt.reserve(ground_truth.size());
    for (const LabelRecord& r : ground_truth)
        if (!gt.emplace(r.point_id, r.label).second)
            throw DataError("duplicate point id " + std::to_string(r.point_id) + " in ground truth");

    SegmentationReport report;
    report.gt_points = ground_truth.size();
    report.predicted_points = predicted.size();

    std::map<uint64_t, std::pair<std::vector<uint32_t>, std::vector<uint32_t>>> per_frame;
    std::unordered_map<uint64_t, bool> seen;
    seen.reserve(predicted.size());
    for (const LabelRecord& r : predicted)
    {
        const auto it = gt.find(r.point_id);
        if (it == gt.end())
            throw DataError("predicted point id " + std::to_string(r.point_id) + " has no ground truth record");
        if (!seen.emplace(r.point_id, true).second)
            throw DataError("duplicate point id " + std::to_string(r.point_id) + " in predictions");
        if (it->second == 0)
            continue;
        if (r.label == 0)
        {
            ++report.unclustered_instance_points;
            continue;
        }
        const uint64_t frame = r.point_id / rows / firings_per_rotation;
        auto& [pred, truth] = per_frame[frame];
        pred.push_back(r.label);
        truth.push_back(it->second);
        ++report.evaluated_points;
    }
    for (const auto& [id, label] : gt)
        if (label != 0 && !seen.contains(id))
            ++report.unclustered_instance_points;

    std::vector<double> uses;
    std::vector<double> oses;
    for (const auto& [frame, labels] : per_frame)
    {
        FrameScore f{frame, labels.first.size(), use_ose(labels.first, labels.second)};
        uses.push_back(f.score.use);
        oses.push_back(f.score.ose);
        report.frames.push_back(f);
    }
    report.use = mean_std(uses);
    report.ose = mean_std(oses);
    return report;
}

struct LatencyReport
{
    uint64_t clusters{0};
    uint64_t forced{0};
    std::vector<double> latencies_ms; // non-forced clusters
    MeanStd latency_ms;
    MeanStd forced_latency_ms;
    int64_t negative_latencies{0};
};

inline LatencyReport latency_stats(std::span<const ClusterMessage> clusters)
{
    LatencyReport r;
    std::vector<double> forced;
    for (const ClusterMessage& c : clusters)
    {
        ++r.clusters;
        const double ms = static_cast<double>(c.latency_ns) * 1e-6;
        if (c.latency_ns < 0)
            ++r.negative_latencies;
        if (c.force_finished)
        {
            ++r.forced;
            forced.push_back(ms);
        }
        else
            r.latencies_ms.push_back(ms);
    }
    r.latency_ms = mean_std(r.latencies_ms);
    r.forced_latency_ms = mean_std(forced);
    return r;
}

namespace detail
{
// Minimum cost assignment of every row to a distinct column, rows <= cols. Returns the column of each row.
inline std::vector<size_t> hungarian(const std::vector<std::vector<int64_t>>& cost)
{
    const size_t n = cost.size();
    const size_t m = n == 0 ? 0 : cost[0].size();
    constexpr int64_t inf = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int64_t> u(n + 1, 0), v(m + 1, 0);
    std::vector<size_t> p(m + 1, 0), way(m + 1, 0);
    for (size_t i = 1; i <= n; ++i)
    {
        p[0] = i;
        size_t j0 = 0;
        std::vector<int64_t> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do
        {
            used[j0] = true;
            const size_t i0 = p[j0];
            int64_t delta = inf;
            size_t j1 = 0;
            for (size_t j = 1; j <= m; ++j)
                if (!used[j])
                {
                    const int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if (cur < minv[j])
                    {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta)
                    {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (size_t j = 0; j <= m; ++j)
                if (used[j])
                {
                    u[p[j]] += delta;
                    v[j] -= delta;
                }
                else
                    minv[j] -= delta;
            j0 = j1;
        } while (p[j0] != 0);
        do
        {
            const size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<size_t> assignment(n, 0);
    for (size_t j = 1; j <= m; ++j)
        if (p[j] != 0)
            assignment[p[j] - 1] = j - 1;
    return assignment;
}
} // namespace detail

/// Fraction of points whose labels agree under the best one-to-one matching of labels `a` to labels `b`.
inline double partition_agreement(std::span<const uint32_t> a, std::span<const uint32_t> b)
{
    if (a.size() != b.size())
        throw DataError("partitions differ in length");
    if (a.empty())
        return 1.0;

    std::map<std::pair<uint32_t, uint32_t>, int64_t> overlap;
    for (size_t i = 0; i < a.size(); ++i)
        ++overlap[{a[i], b[i]}];

    // bipartite components of the contingency graph are matched independently
    std::unordered_map<uint32_t, size_t> a_node, b_node;
    for (const auto& [key, n] : overlap)
    {
        a_node.emplace(key.first, a_node.size());
        b_node.emplace(key.second, b_node.size());
    }
    UnionFind uf(a_node.size() + b_node.size());
    for (const auto& [key, n] : overlap)
        uf.unite(a_node[key.first], a_node.size() + b_node[key.second]);

    struct Component
    {
        std::vector<uint32_t> as, bs;
        std::vector<std::pair<std::pair<uint32_t, uint32_t>, int64_t>> cells;
    };
    std::unordered_map<size_t, Component> components;
    for (const auto& [key, n] : overlap)
        components[uf.find(a_node[key.first])].cells.push_back({key, n});

    int64_t matched = 0;
    for (auto& [root, comp] : components)
    {
        std::map<uint32_t, size_t> ai, bi;
        for (const auto& [key, n] : comp.cells)
        {
            ai.emplace(key.first, ai.size());
            bi.emplace(key.second, bi.size());
        }
        if (comp.cells.size() == 1)
        {
            matched += comp.cells.front().second;
            continue;
        }
        const bool transpose = ai.size() > bi.size();
        const size_t rows = transpose ? bi.size() : ai.size();
        const size_t cols = transpose ? ai.size() : bi.size();
        std::vector<std::vector<int64_t>> cost(rows, std::vector<int64_t>(cols, 0));
        for (const auto& [key, n] : comp.cells)
        {
            const size_t r = transpose ? bi[key.second] : ai[key.first];
            const size_t c = transpose ? ai[key.first] : bi[key.second];
            cost[r][c] = -n;
        }
        const auto assignment = detail::hungarian(cost);
        for (size_t r = 0; r < rows; ++r)
            matched -= cost[r][assignment[r]];
    }
    return static_cast<double>(matched) / static_cast<double>(a.size());
}

} // namespace contseg

#endif

#ifndef CONTSEG_ORACLE_HPP
#define CONTSEG_ORACLE_HPP

#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <contseg/types.hpp>

namespace contseg
{

class UnionFind
{
  public:
    explicit UnionFind(size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), size_t{0}); }

    size_t find(size_t x)
    {
        while (parent_[x] != x)
        {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(size_t a, size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        if (size_[a] < size_[b])
            std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    [[nodiscard]] size_t size() const { return parent_.size(); }

  private:
    std::vector<size_t> parent_;
    std::vector<size_t> size_;
};

struct OraclePoint
{
    Vec3f xyz;
    double phi_cont{0.0};
};

/// Batch single linkage: points closer than `distance_threshold` (strictly) share a component. With
/// `max_azimuth_gap`, pairs whose continuous azimuths differ by that much or more are never linked, which mirrors
/// the streaming method on streams that revisit the same place in later rotations.
/// Returns dense component ids numbered by first appearance.
inline std::vector<uint32_t> oracle_single_linkage(std::span<const OraclePoint> points,
                                                   double distance_threshold,
                                                   std::optional<double> max_azimuth_gap = std::nullopt)
{
    const size_t n = points.size();
    UnionFind uf(n);
    const double threshold_sq = distance_threshold * distance_threshold;
    if (distance_threshold > 0.0)
        for (size_t i = 0; i < n; ++i)
        {
            const Vec3d p = to_double(points[i].xyz);
            for (size_t j = i + 1; j < n; ++j)
            {
                if (max_azimuth_gap && std::abs(points[i].phi_cont - points[j].phi_cont) >= *max_azimuth_gap)
                    continue;
                const Vec3d q = to_double(points[j].xyz);
                const double dx = p.x - q.x;
                const double dy = p.y - q.y;
                const double dz = p.z - q.z;
                if (dx * dx + dy * dy + dz * dz < threshold_sq)
                    uf.unite(i, j);
            }
        }

    std::vector<uint32_t> ids(n);
    std::vector<uint32_t> id_of_root(n, 0);
    uint32_t next = 1;
    for (size_t i = 0; i < n; ++i)
    {
        const size_t r = uf.find(i);
        if (id_of_root[r] == 0)
            id_of_root[r] = next++;
        ids[i] = id_of_root[r];
    }
    return ids;
}

inline std::vector<uint32_t> oracle_single_linkage(std::span<const Vec3f> points, double distance_threshold)
{
    std::vector<OraclePoint> wrapped(points.size());
    for (size_t i = 0; i < points.size(); ++i)
        wrapped[i].xyz = points[i];
    return oracle_single_linkage(std::span<const OraclePoint>(wrapped), distance_threshold);
}

} // namespace contseg

#endif

#ifndef CONTSEG_CLUSTER_IO_HPP
#define CONTSEG_CLUSTER_IO_HPP

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <contseg/ccl_publish.hpp>

namespace contseg
{

// Cluster stream as JSON Lines:
//   {"id", "force_finished", "publish_col", "reference_timestamp_ns", "latency_ns", "points": [[x, y, z, row, col, t_ns], ...]}
inline nlohmann::json cluster_to_json(const ClusterMessage& c)
{
    nlohmann::json points = nlohmann::json::array();
    for (const ClusterPoint& p : c.points)
        points.push_back({p.xyz.x, p.xyz.y, p.xyz.z, p.row, p.col, p.timestamp_ns});
    return {{"id", c.id},
            {"force_finished", c.force_finished},
            {"publish_col", c.publish_col},
            {"reference_timestamp_ns", c.reference_timestamp_ns},
            {"latency_ns", c.latency_ns},
            {"points", std::move(points)}};
}

inline void write_cluster_jsonl(std::ostream& out, const ClusterMessage& c) { out << cluster_to_json(c).dump() << '\n'; }

/// Parses a cluster stream. Point ids are not part of the format and stay 0.
inline std::vector<ClusterMessage> read_clusters_jsonl(std::istream& in)
{
    std::vector<ClusterMessage> clusters;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            const auto j = nlohmann::json::parse(line);
            ClusterMessage c;
            c.id = j.at("id").get<uint64_t>();
            c.force_finished = j.at("force_finished").get<bool>();
            c.publish_col = j.at("publish_col").get<int64_t>();
            c.reference_timestamp_ns = j.at("reference_timestamp_ns").get<int64_t>();
            c.latency_ns = j.at("latency_ns").get<int64_t>();
            for (const auto& p : j.at("points"))
            {
                if (p.size() != 6)
                    throw DataError("point entries need six values");
                ClusterPoint cp;
                cp.xyz = {p[0].get<float>(), p[1].get<float>(), p[2].get<float>()};
                cp.row = p[3].get<int32_t>();
                cp.col = p[4].get<int64_t>();
                cp.timestamp_ns = p[5].get<int64_t>();
                c.points.push_back(cp);
            }
            clusters.push_back(std::move(c));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw DataError("cluster stream line " + std::to_string(line_no) + ": " + e.what());
        }
        catch (const DataError& e)
        {
            throw DataError("cluster stream line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return clusters;
}

} // namespace contseg

#endif

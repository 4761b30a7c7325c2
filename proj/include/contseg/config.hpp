#ifndef CONTSEG_CONFIG_HPP
#define CONTSEG_CONFIG_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <contseg/pipeline.hpp>

namespace contseg
{

// Key-value configuration. One `key = value` per line, `#` starts a comment, and an INI style `[section]` header
// prefixes the following keys with `section.`.
//
//   range_image.width          columns in the cyclic buffer (0 = four rotations)
//   range_image.frame          world | sensor
//   ground.mode                segment | none
//   ground.slope_deg, ground.z_match_tol, ground.z_ground_tol, ground.cell_size, ground.weight_cap,
//   ground.window, ground.max_gap_rows
//   ego.box                    min_x min_y min_z max_x max_y max_z (sensor frame)
//   ego.min_z                  ground contact height of the ego vehicle (sensor frame)
//   cluster.d_T, cluster.mode (exact | heuristic_a), cluster.inner_width, cluster.checkerboard,
//   cluster.vertical_prune
//   ccl.every, ccl.forced_margin, ccl.min_cluster_size
//   latency.clock              stream | wall
namespace config
{

namespace detail
{
inline std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double to_double(const std::string& key, const std::string& value)
{
    try
    {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return v;
    }
    catch (const std::exception&)
    {
        throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
    }
}

inline int64_t to_int(const std::string& key, const std::string& value)
{
    const double v = to_double(key, value);
    if (v != std::floor(v))
        throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
    return static_cast<int64_t>(v);
}

inline bool to_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "on" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "off" || value == "no")
        return false;
    throw ConfigError("'" + key + "' expects a boolean, got '" + value + "'");
}
} // namespace detail

inline SearchMode parse_mode(const std::string& value)
{
    if (value == "exact")
        return SearchMode::exact;
    if (value == "heuristic_a" || value == "heuristic-a")
        return SearchMode::heuristic_a;
    throw ConfigError("unknown cluster mode '" + value + "' (expected exact or heuristic_a)");
}

/// Applies one key to `cfg`. Unknown keys are rejected.
inline void apply(PipelineConfig& cfg, const std::string& key, const std::string& value)
{
    using namespace detail;
    if (key == "range_image.width")
        cfg.buffer_width = to_int(key, value);
    else if (key == "range_image.frame")
    {
        if (value == "world")
            cfg.frame = CoordinateFrame::world;
        else if (value == "sensor")
            cfg.frame = CoordinateFrame::sensor;
        else
            throw ConfigError("range_image.frame must be world or sensor");
    }
    else if (key == "ground.mode")
    {
        if (value == "segment")
            cfg.ground.mode = GroundMode::segment;
        else if (value == "none")
            cfg.ground.mode = GroundMode::none;
        else
            throw ConfigError("ground.mode must be segment or none");
    }
    else if (key == "ground.slope_deg")
        cfg.ground.slope_deg = to_double(key, value);
    else if (key == "ground.z_match_tol")
        cfg.ground.z_match_tol = to_double(key, value);
    else if (key == "ground.z_ground_tol")
        cfg.ground.z_ground_tol = to_double(key, value);
    else if (key == "ground.cell_size")
        cfg.ground.cell_size = to_double(key, value);
    else if (key == "ground.weight_cap")
        cfg.ground.weight_cap = to_double(key, value);
    else if (key == "ground.window")
        cfg.ground.window_size = to_double(key, value);
    else if (key == "ground.max_gap_rows")
        cfg.ground.max_gap_rows = static_cast<int>(to_int(key, value));
    else if (key == "ego.box")
    {
        std::string normalized = value;
        std::replace(normalized.begin(), normalized.end(), ',', ' ');
        std::istringstream in(normalized);
        double v[6];
        for (double& x : v)
            if (!(in >> x))
                throw ConfigError("ego.box expects six numbers: min_x min_y min_z max_x max_y max_z");
        std::string rest;
        if (in >> rest)
            throw ConfigError("ego.box expects six numbers: min_x min_y min_z max_x max_y max_z");
        cfg.ground.ego.min = {v[0], v[1], v[2]};
        cfg.ground.ego.max = {v[3], v[4], v[5]};
    }
    else if (key == "ego.min_z")
        cfg.ground.ego.min_z = to_double(key, value);
    else if (key == "cluster.d_T" || key == "cluster.d_t")
        cfg.cluster.distance_threshold = to_double(key, value);
    else if (key == "cluster.mode")
        cfg.cluster.mode = parse_mode(value);
    else if (key == "cluster.inner_width")
        cfg.cluster.inner_width = static_cast<int>(to_int(key, value));
    else if (key == "cluster.checkerboard")
        cfg.cluster.checkerboard = to_bool(key, value);
    else if (key == "cluster.vertical_prune")
        cfg.cluster.vertical_prune = to_bool(key, value);
    else if (key == "ccl.every")
        cfg.publish.ccl_every = static_cast<int>(to_int(key, value));
    else if (key == "ccl.forced_margin")
        cfg.publish.forced_margin = to_int(key, value);
    else if (key == "ccl.min_cluster_size")
        cfg.publish.min_cluster_size = static_cast<size_t>(to_int(key, value));
    else if (key == "latency.clock")
    {
        if (value == "stream")
            cfg.clock = LatencyClock::stream;
        else if (value == "wall")
            cfg.clock = LatencyClock::wall;
        else
            throw ConfigError("latency.clock must be stream or wall");
    }
    else
        throw ConfigError("unknown configuration key '" + key + "'");
}

inline PipelineConfig parse(std::istream& in, PipelineConfig cfg = {})
{
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (!section.empty())
            key = section + "." + key;
        apply(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig load(const std::string& path, PipelineConfig cfg = {})
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, std::move(cfg));
}

} // namespace config
} // namespace contseg

#endif

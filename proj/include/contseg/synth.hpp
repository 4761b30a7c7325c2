#ifndef CONTSEG_SYNTH_HPP
#define CONTSEG_SYNTH_HPP

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <contseg/cfs1.hpp>
#include <contseg/labels.hpp>

namespace contseg
{

enum class Shape
{
    box,
    cylinder,
};

/// An object standing on the ground plane. Boxes use length (x), width (y), height and a yaw; cylinders use
/// radius and height.
struct SceneObject
{
    Shape shape{Shape::box};
    double x{0.0};
    double y{0.0};
    double yaw{0.0};
    double length{1.0};
    double width{1.0};
    double height{1.0};
    double radius{0.5};
    uint32_t instance_id{1};

    /// Radius of the vertical cylinder around (x, y) that contains the object.
    [[nodiscard]] double footprint_radius() const
    {
        return shape == Shape::box ? 0.5 * std::hypot(length, width) : radius;
    }
};

namespace detail
{

// Projection half-extent of a footprint on unit axis (ax, ay).
inline double footprint_extent(const SceneObject& o, double ax, double ay)
{
    if (o.shape != Shape::box)
        return o.radius;
    const double c = std::cos(o.yaw);
    const double s = std::sin(o.yaw);
    return 0.5 * o.length * std::abs(c * ax + s * ay) + 0.5 * o.width * std::abs(-s * ax + c * ay);
}

} // namespace detail

/// Footprints (xy) intersect. Separating axis test over the box edge normals and the center line.
inline bool footprints_overlap(const SceneObject& a, const SceneObject& b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (std::hypot(dx, dy) >= a.footprint_radius() + b.footprint_radius())
        return false;
    std::vector<std::pair<double, double>> axes;
    for (const SceneObject* o : {&a, &b})
        if (o->shape == Shape::box)
        {
            axes.emplace_back(std::cos(o->yaw), std::sin(o->yaw));
            axes.emplace_back(-std::sin(o->yaw), std::cos(o->yaw));
        }
    if (a.shape != Shape::box || b.shape != Shape::box)
    {
        // a disc against a box is separated along the line to the box's nearest point
        const SceneObject& disc = a.shape != Shape::box ? a : b;
        const SceneObject& other = a.shape != Shape::box ? b : a;
        double px = disc.x - other.x;
        double py = disc.y - other.y;
        if (other.shape == Shape::box)
        {
            const double c = std::cos(other.yaw);
            const double s = std::sin(other.yaw);
            const double u = std::clamp(c * px + s * py, -0.5 * other.length, 0.5 * other.length);
            const double v = std::clamp(-s * px + c * py, -0.5 * other.width, 0.5 * other.width);
            px -= c * u - s * v;
            py -= s * u + c * v;
        }
        const double n = std::hypot(px, py);
        if (n > 0.0)
            axes.emplace_back(px / n, py / n);
    }
    for (const auto& [ax, ay] : axes)
        if (std::abs(dx * ax + dy * ay) >= detail::footprint_extent(a, ax, ay) + detail::footprint_extent(b, ax, ay))
            return false;
    return true;
}

struct SyntheticSensor
{
    double height{1.8};
    uint32_t rows{128};
    double elevation_min_deg{-25.0};
    double elevation_max_deg{15.0};
    double offset_span_columns{4.0}; // azimuth offset of the last row relative to the first, in columns
    uint32_t firings_per_rotation{1800};
    double rotations{1.0};
    double rotation_hz{10.0};
    double start_azimuth{0.0};  // raw azimuth of the first firing
    double yaw_rate{0.0};       // platform yaw rate in rad/s
    double max_range{120.0};
    double range_noise_std{0.0};
    uint64_t seed{0};

    [[nodiscard]] SensorModel model() const
    {
        SensorModel m;
        m.rows = rows;
        m.firings_per_rotation = firings_per_rotation;
        m.elevations.resize(rows);
        m.azimuth_offsets.resize(rows);
        const double deg = std::numbers::pi / 180.0;
        const double column = kTwoPi / firings_per_rotation;
        for (uint32_t r = 0; r < rows; ++r)
        {
            const double t = rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.0;
            m.elevations[r] = (elevation_max_deg + t * (elevation_min_deg - elevation_max_deg)) * deg;
            m.azimuth_offsets[r] = t * offset_span_columns * column;
        }
        return m;
    }

    [[nodiscard]] uint64_t firing_count() const
    {
        return static_cast<uint64_t>(std::llround(rotations * firings_per_rotation));
    }
};

struct SyntheticScene
{
    SyntheticSensor sensor;
    std::vector<SceneObject> objects;

    void validate() const
    {
        if (sensor.rows == 0 || sensor.firings_per_rotation == 0 || !(sensor.rotation_hz > 0.0) ||
            !(sensor.height > 0.0) || !(sensor.max_range > 0.0) || !(sensor.rotations > 0.0))
            throw DataError("invalid synthetic sensor parameters");
        std::vector<uint32_t> ids;
        for (const SceneObject& o : objects)
        {
            if (o.instance_id == 0)
                throw DataError("object instance ids must be positive");
            if (std::find(ids.begin(), ids.end(), o.instance_id) != ids.end())
                throw DataError("duplicate object instance id " + std::to_string(o.instance_id));
            ids.push_back(o.instance_id);
            const bool box_ok = o.length > 0.0 && o.width > 0.0;
            if (!(o.height > 0.0) || (o.shape == Shape::box ? !box_ok : !(o.radius > 0.0)))
                throw DataError("object " + std::to_string(o.instance_id) + " has non-positive dimensions");
        }
        for (size_t i = 0; i < objects.size(); ++i)
            for (size_t j = i + 1; j < objects.size(); ++j)
                if (footprints_overlap(objects[i], objects[j]))
                    throw DataError("objects " + std::to_string(objects[i].instance_id) + " and " +
                                    std::to_string(objects[j].instance_id) + " may intersect");
    }
};

inline void to_json(nlohmann::json& j, const SceneObject& o)
{
    j = {{"shape", o.shape == Shape::box ? "box" : "cylinder"}, {"x", o.x}, {"y", o.y}, {"height", o.height},
         {"instance_id", o.instance_id}};
    if (o.shape == Shape::box)
    {
        j["yaw"] = o.yaw;
        j["length"] = o.length;
        j["width"] = o.width;
    }
    else
        j["radius"] = o.radius;
}

inline void from_json(const nlohmann::json& j, SceneObject& o)
{
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "box")
        o.shape = Shape::box;
    else if (shape == "cylinder")
        o.shape = Shape::cylinder;
    else
        throw DataError("unknown object shape '" + shape + "'");
    o.x = j.at("x").get<double>();
    o.y = j.at("y").get<double>();
    o.height = j.at("height").get<double>();
    o.instance_id = j.at("instance_id").get<uint32_t>();
    o.yaw = j.value("yaw", 0.0);
    o.length = j.value("length", 1.0);
    o.width = j.value("width", 1.0);
    o.radius = j.value("radius", 0.5);
}

inline void to_json(nlohmann::json& j, const SyntheticSensor& s)
{
    j = {{"height", s.height},
         {"rows", s.rows},
         {"elevation_min_deg", s.elevation_min_deg},
         {"elevation_max_deg", s.elevation_max_deg},
         {"offset_span_columns", s.offset_span_columns},
         {"firings_per_rotation", s.firings_per_rotation},
         {"rotations", s.rotations},
         {"rotation_hz", s.rotation_hz},
         {"start_azimuth", s.start_azimuth},
         {"yaw_rate", s.yaw_rate},
         {"max_range", s.max_range},
         {"range_noise_std", s.range_noise_std},
         {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticSensor& s)
{
    const SyntheticSensor d;
    s.height = j.value("height", d.height);
    s.rows = j.value("rows", d.rows);
    s.elevation_min_deg = j.value("elevation_min_deg", d.elevation_min_deg);
    s.elevation_max_deg = j.value("elevation_max_deg", d.elevation_max_deg);
    s.offset_span_columns = j.value("offset_span_columns", d.offset_span_columns);
    s.firings_per_rotation = j.value("firings_per_rotation", d.firings_per_rotation);
    s.rotations = j.value("rotations", d.rotations);
    s.rotation_hz = j.value("rotation_hz", d.rotation_hz);
    s.start_azimuth = j.value("start_azimuth", d.start_azimuth);
    s.yaw_rate = j.value("yaw_rate", d.yaw_rate);
    s.max_range = j.value("max_range", d.max_range);
    s.range_noise_std = j.value("range_noise_std", d.range_noise_std);
    s.seed = j.value("seed", d.seed);
}

inline nlohmann::json scene_to_json(const SyntheticScene& scene)
{
    return {{"sensor", scene.sensor}, {"objects", scene.objects}};
}

inline SyntheticScene scene_from_json(const nlohmann::json& j)
{
    try
    {
        SyntheticScene scene;
        if (j.contains("sensor"))
            scene.sensor = j.at("sensor").get<SyntheticSensor>();
        if (j.contains("objects"))
            scene.objects = j.at("objects").get<std::vector<SceneObject>>();
        scene.validate();
        return scene;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError(std::string("invalid scene description: ") + e.what());
    }
}

inline SyntheticScene load_scene(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open scene file '" + path + "'");
    try
    {
        return scene_from_json(nlohmann::json::parse(in));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError("scene file '" + path + "': " + e.what());
    }
}

struct RayHit
{
    double t{std::numeric_limits<double>::infinity()};
    uint32_t instance{0};
};

namespace raycast
{

/// Ray from `origin` along unit `dir` against the plane z = plane_z; only hits in front of the origin count.
inline std::optional<double> plane(const Vec3d& origin, const Vec3d& dir, double plane_z)
{
    if (!(dir.z < 0.0) || origin.z <= plane_z)
        return std::nullopt;
    return (plane_z - origin.z) / dir.z;
}

/// Slab test against an axis-aligned box given in the ray's frame.
inline std::optional<double> aabb(const Vec3d& origin, const Vec3d& dir, const Vec3d& lo, const Vec3d& hi)
{
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double l[3] = {lo.x, lo.y, lo.z};
    const double h[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a)
    {
        if (d[a] == 0.0)
        {
            if (o[a] < l[a] || o[a] > h[a])
                return std::nullopt;
            continue;
        }
        double t0 = (l[a] - o[a]) / d[a];
        double t1 = (h[a] - o[a]) / d[a];
        if (t0 > t1)
            std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
        if (t_near > t_far)
            return std::nullopt;
    }
    if (t_near > 0.0)
        return t_near;
    return std::nullopt;
}

/// Box of `o` standing on z = ground_z.
inline std::optional<double> box(const Vec3d& origin, const Vec3d& dir, const SceneObject& o, double ground_z)
{
    const double c = std::cos(o.yaw);
    const double s = std::sin(o.yaw);
    const Vec3d rel{origin.x - o.x, origin.y - o.y, origin.z};
    const Vec3d lo_origin{c * rel.x + s * rel.y, -s * rel.x + c * rel.y, rel.z};
    const Vec3d lo_dir{c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z};
    return aabb(lo_origin,
                lo_dir,
                {-0.5 * o.length, -0.5 * o.width, ground_z},
                {0.5 * o.length, 0.5 * o.width, ground_z + o.height});
}

/// Vertical solid cylinder of `o` standing on z = ground_z, including its top cap.
inline std::optional<double> cylinder(const Vec3d& origin, const Vec3d& dir, const SceneObject& o, double ground_z)
{
    const double top = ground_z + o.height;
    const double ox = origin.x - o.x;
    const double oy = origin.y - o.y;
    std::optional<double> best;
    const double a = dir.x * dir.x + dir.y * dir.y;
    if (a > 0.0)
    {
        const double b = 2.0 * (ox * dir.x + oy * dir.y);
        const double cc = ox * ox + oy * oy - o.radius * o.radius;
        const double disc = b * b - 4.0 * a * cc;
        if (disc >= 0.0)
        {
            const double t = (-b - std::sqrt(disc)) / (2.0 * a);
            const double z = origin.z + t * dir.z;
            if (t > 0.0 && z >= ground_z && z <= top)
                best = t;
        }
    }
    if (dir.z != 0.0)
    {
        const double t = (top - origin.z) / dir.z;
        const double px = ox + t * dir.x;
        const double py = oy + t * dir.y;
        if (t > 0.0 && px * px + py * py <= o.radius * o.radius && (!best || t < *best))
            best = t;
    }
    return best;
}

} // namespace raycast

/// Unit beam direction for clockwise-increasing raw azimuth `phi` and elevation `elevation`.
inline Vec3d beam_direction(double phi, double elevation)
{
    const double ce = std::cos(elevation);
    return {-std::cos(phi) * ce, std::sin(phi) * ce, std::sin(elevation)};
}

/// Nearest intersection of a ray from the sensor origin with the scene. The sensor sits at the origin, so the
/// ground plane lies at z = -height.
inline RayHit cast_ray(const SyntheticScene& scene, const Vec3d& dir)
{
    const Vec3d origin{0.0, 0.0, 0.0};
    const double ground_z = -scene.sensor.height;
    RayHit hit;
    if (const auto t = raycast::plane(origin, dir, ground_z))
        hit.t = *t;
    for (const SceneObject& o : scene.objects)
    {
        const auto t = o.shape == Shape::box ? raycast::box(origin, dir, o, ground_z)
                                             : raycast::cylinder(origin, dir, o, ground_z);
        if (t && *t < hit.t)
        {
            hit.t = *t;
            hit.instance = o.instance_id;
        }
    }
    if (hit.t > scene.sensor.max_range)
        return {};
    return hit;
}

struct SyntheticStream
{
    SensorModel sensor;
    std::vector<Firing> firings;
    std::vector<LabelRecord> labels; // one per valid point
};

/// Casts every ray of every firing. Deterministic for a given scene (including its seed).
template <typename OnFiring>
void raycast_stream(const SyntheticScene& scene, OnFiring&& on_firing, std::vector<LabelRecord>* labels = nullptr)
{
    scene.validate();
    const SyntheticSensor& s = scene.sensor;
    const SensorModel model = s.model();
    const double column = model.column_width();
    const int64_t period_ns = static_cast<int64_t>(std::llround(1e9 / s.rotation_hz));
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> noise(0.0, s.range_noise_std > 0.0 ? s.range_noise_std : 1.0);

    const uint64_t count = s.firing_count();
    for (uint64_t f = 0; f < count; ++f)
    {
        Firing firing;
        firing.index = f;
        firing.timestamp_ns = static_cast<int64_t>(f) * period_ns / static_cast<int64_t>(s.firings_per_rotation);
        const double t_sec = static_cast<double>(firing.timestamp_ns) * 1e-9;
        const double yaw = s.yaw_rate * t_sec;
        firing.rotation = Mat3::yaw(yaw);
        firing.points.resize(s.rows);
        const double sensor_phi = s.start_azimuth + static_cast<double>(f) * column;
        for (uint32_t r = 0; r < s.rows; ++r)
        {
            const Vec3d local_dir = beam_direction(sensor_phi + model.azimuth_offsets[r], model.elevations[r]);
            const Vec3d world_dir = firing.rotation.apply(local_dir);
            const RayHit hit = cast_ray(scene, world_dir);
            FiringPoint& p = firing.points[r];
            if (!std::isfinite(hit.t))
            {
                p.sensor_xyz = to_float(local_dir);
                p.range = 0.f;
                p.valid = false;
                continue;
            }
            double range = hit.t;
            if (s.range_noise_std > 0.0)
                range = std::max(0.05, range + s.range_noise_std * noise(rng));
            p.sensor_xyz = to_float(range * local_dir);
            p.range = static_cast<float>(range);
            p.valid = true;
            if (labels)
                labels->push_back({point_id(f, s.rows, r), hit.instance});
        }
        on_firing(std::move(firing));
    }
}

inline SyntheticStream raycast_stream(const SyntheticScene& scene)
{
    SyntheticStream out;
    out.sensor = scene.sensor.model();
    raycast_stream(scene, [&](Firing&& f) { out.firings.push_back(std::move(f)); }, &out.labels);
    return out;
}

/// Writes a scene as a CFS1 stream plus its ground truth label table. Returns the number of firings.
inline uint64_t write_synthetic(const SyntheticScene& scene, std::ostream& stream_out, std::ostream& labels_out)
{
    cfs1::Writer writer(stream_out, scene.sensor.model());
    std::vector<LabelRecord> labels;
    raycast_stream(scene, [&](Firing&& f) { writer.write(f); }, &labels);
    write_labels(labels_out, labels);
    return writer.firings_written();
}

struct RandomSceneOptions
{
    int min_objects{5};
    int max_objects{40};
    double min_distance{12.0};
    double max_distance{45.0};
    double seam_clearance{0.35}; // radians kept free on either side of the negative x-axis
    double clearance{0.3};       // minimal gap between object footprints
};

/// Random non-intersecting boxes and cylinders around the sensor, clear of the negative x-axis.
inline SyntheticScene random_scene(uint64_t seed, int object_count, RandomSceneOptions opt = {})
{
    SyntheticScene scene;
    scene.sensor.seed = seed;
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    int attempts = 0;
    while (static_cast<int>(scene.objects.size()) < object_count && attempts++ < 20000)
    {
        SceneObject o;
        o.shape = uniform(0.0, 1.0) < 0.6 ? Shape::box : Shape::cylinder;
        if (o.shape == Shape::box)
        {
            o.length = uniform(0.4, 3.0);
            o.width = uniform(0.4, 1.8);
            o.yaw = uniform(0.0, std::numbers::pi);
        }
        else
            o.radius = uniform(0.1, 0.5);
        o.height = uniform(0.4, 2.2);
        const double r = uniform(opt.min_distance, opt.max_distance);
        const double phi = uniform(0.0, kTwoPi);
        const double half_extent = std::asin(std::min(1.0, (o.footprint_radius() + 0.7) / r));
        if (phi - half_extent < opt.seam_clearance || phi + half_extent > kTwoPi - opt.seam_clearance)
            continue;
        const Vec3d c = r * beam_direction(phi, 0.0);
        o.x = c.x;
        o.y = c.y;
        bool free = true;
        for (const SceneObject& other : scene.objects)
            if (std::hypot(o.x - other.x, o.y - other.y) <
                o.footprint_radius() + other.footprint_radius() + opt.clearance)
                free = false;
        if (!free)
            continue;
        o.instance_id = static_cast<uint32_t>(scene.objects.size() + 1);
        scene.objects.push_back(o);
    }
    scene.validate();
    return scene;
}

} // namespace contseg

#endif

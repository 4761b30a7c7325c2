#ifndef CONTSEG_TESTS_SCENES_HPP
#define CONTSEG_TESTS_SCENES_HPP

#include <contseg/run.hpp>
#include <contseg/synth.hpp>

namespace contseg::testing
{

struct OracleScene
{
    SyntheticScene scene;
    SyntheticStream stream;
    RunResult exact;
    uint64_t obstacle_points{0};
};

inline uint64_t count_obstacles(const RunResult& run)
{
    return static_cast<uint64_t>(std::count_if(
        run.points.begin(), run.points.end(), [](const ObservedPoint& p) { return p.label == Label::obstacle; }));
}

/// Seeded scene with 5 to 40 objects whose exact run holds at most `max_points` obstacle points. Objects are
/// removed from the end until the budget holds, never below five.
inline OracleScene oracle_scene(uint64_t seed, const PipelineConfig& config, uint64_t max_points = 5000)
{
    const int wanted = 5 + static_cast<int>((seed * 7) % 36);
    OracleScene s;
    s.scene = random_scene(seed, wanted);
    while (true)
    {
        s.stream = raycast_stream(s.scene);
        s.exact = run_firings(s.stream.sensor, config, s.stream.firings);
        s.obstacle_points = count_obstacles(s.exact);
        if (s.obstacle_points <= max_points || s.scene.objects.size() <= 5)
            return s;
        const size_t drop = std::max<size_t>(1, (s.scene.objects.size() * (s.obstacle_points - max_points)) /
                                                    s.obstacle_points + 1);
        s.scene.objects.resize(std::max<size_t>(5, s.scene.objects.size() - drop));
    }
}

} // namespace contseg::testing

#endif

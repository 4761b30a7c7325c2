#include <gtest/gtest.h>

#include <contseg/cluster_io.hpp>
#include <contseg/run.hpp>
#include <contseg/synth.hpp>

#include <sstream>

using namespace contseg;

namespace
{

SyntheticScene wall_scene()
{
    SyntheticScene scene;
    scene.sensor.rows = 32;
    scene.sensor.start_azimuth = 0.2;
    scene.sensor.rotations = 0.9;
    // a long wall parallel to the x-axis spans a wide azimuth range
    scene.objects.push_back({Shape::box, 0.0, 6.0, 0.0, 40.0, 0.4, 2.5, 0.5, 1});
    scene.objects.push_back({Shape::cylinder, 0.0, -10.0, 0.0, 1.0, 1.0, 1.5, 0.4, 2});
    return scene;
}

std::string serialize(const std::vector<ClusterMessage>& clusters)
{
    std::ostringstream out;
    for (const ClusterMessage& c : clusters)
        write_cluster_jsonl(out, c);
    return out.str();
}

} // namespace

TEST(Pipeline, StagedOutputIsByteIdenticalToReference)
{
    SyntheticScene scene = random_scene(7, 25);
    scene.sensor.rotations = 2.3;
    scene.sensor.yaw_rate = 0.2;
    const SyntheticStream stream = raycast_stream(scene);
    PipelineConfig cfg;
    const RunResult reference = run_firings(stream.sensor, cfg, stream.firings, Execution::reference);
    const RunResult staged = run_firings(stream.sensor, cfg, stream.firings, Execution::staged);
    ASSERT_FALSE(reference.clusters.empty());
    EXPECT_EQ(serialize(staged.clusters), serialize(reference.clusters));
    EXPECT_EQ(staged.clusters, reference.clusters);
}

TEST(Pipeline, StagedMatchesReferenceWithTightBuffer)
{
    const SyntheticScene scene = wall_scene();
    const SyntheticStream stream = raycast_stream(scene);
    PipelineConfig cfg;
    cfg.buffer_width = 200;
    const RunResult reference = run_firings(stream.sensor, cfg, stream.firings, Execution::reference);
    const RunResult staged = run_firings(stream.sensor, cfg, stream.firings, Execution::staged);
    EXPECT_EQ(staged.clusters, reference.clusters);
    EXPECT_EQ(staged.stats.image.overflow_points, reference.stats.image.overflow_points);
}

TEST(Pipeline, LongWallIsForceFinished)
{
    const SyntheticScene scene = wall_scene();
    const SyntheticStream stream = raycast_stream(scene);
    PipelineConfig cfg;
    cfg.buffer_width = 200;
    const RunResult run = run_firings(stream.sensor, cfg, stream.firings);
    EXPECT_GT(run.stats.publish.clusters_forced, 0u);
    EXPECT_TRUE(check_delivery(run).exactly_once());
    EXPECT_EQ(run.stats.image.overflow_points, 0u);
}

TEST(Pipeline, WideBufferNeedsNoForcedFinish)
{
    const SyntheticScene scene = wall_scene();
    const SyntheticStream stream = raycast_stream(scene);
    const RunResult run = run_firings(stream.sensor, PipelineConfig{}, stream.firings);
    EXPECT_EQ(run.stats.publish.clusters_forced, 0u);
    EXPECT_TRUE(check_delivery(run).exactly_once());
}

TEST(Pipeline, EveryObstaclePointPublishedOnceOverSeveralRotations)
{
    SyntheticScene scene = random_scene(11, 30);
    scene.sensor.rotations = 3.5;
    scene.sensor.range_noise_std = 0.02;
    const SyntheticStream stream = raycast_stream(scene);
    const RunResult run = run_firings(stream.sensor, PipelineConfig{}, stream.firings);
    const DeliveryReport d = check_delivery(run);
    EXPECT_GT(d.obstacle_points, 0u);
    EXPECT_TRUE(d.exactly_once()) << d.missing << " missing, " << d.duplicated << " duplicated";
}

TEST(Pipeline, EndOfStreamClustersRespectCompletionRule)
{
    SyntheticScene scene = random_scene(5, 20);
    scene.sensor.rotations = 0.97; // ends inside the last objects
    const SyntheticStream stream = raycast_stream(scene);
    const RunResult run = run_firings(stream.sensor, PipelineConfig{}, stream.firings);
    EXPECT_TRUE(check_delivery(run).exactly_once());
    for (const ClusterMessage& c : run.clusters)
        EXPECT_FALSE(c.force_finished);
}

TEST(Pipeline, ThrottledCclStillDeliversEverything)
{
    const SyntheticScene scene = random_scene(3, 15);
    const SyntheticStream stream = raycast_stream(scene);
    PipelineConfig cfg;
    cfg.publish.ccl_every = 16;
    const RunResult every = run_firings(stream.sensor, PipelineConfig{}, stream.firings);
    const RunResult throttled = run_firings(stream.sensor, cfg, stream.firings);
    EXPECT_TRUE(check_delivery(throttled).exactly_once());
    EXPECT_EQ(throttled.clusters.size(), every.clusters.size());
    EXPECT_LT(throttled.stats.publish.ccl_runs, every.stats.publish.ccl_runs);
}

TEST(Pipeline, SensorFrameIgnoresRotation)
{
    SyntheticScene scene = random_scene(2, 10);
    scene.sensor.rotations = 0.3;
    scene.sensor.yaw_rate = 0.5;
    const SyntheticStream stream = raycast_stream(scene);
    PipelineConfig cfg;
    cfg.frame = CoordinateFrame::sensor;
    const RunResult run = run_firings(stream.sensor, cfg, stream.firings);
    for (const ClusterMessage& c : run.clusters)
        for (const ClusterPoint& p : c.points)
        {
            const Firing& f = stream.firings[p.point_id / stream.sensor.rows];
            EXPECT_EQ(p.xyz, f.points[p.point_id % stream.sensor.rows].sensor_xyz);
        }
}

TEST(Pipeline, PushAfterFinishIsRejected)
{
    const SyntheticScene scene = random_scene(2, 5);
    SyntheticScene short_scene = scene;
    short_scene.sensor.rotations = 0.01;
    const SyntheticStream stream = raycast_stream(short_scene);
    Pipeline pipeline(stream.sensor, PipelineConfig{}, [](ClusterMessage&&) {});
    pipeline.push(stream.firings.front());
    pipeline.finish();
    EXPECT_THROW(pipeline.push(stream.firings.back()), std::logic_error);
}

TEST(Pipeline, InvalidConfigIsRejected)
{
    PipelineConfig cfg;
    cfg.cluster.distance_threshold = -1.0;
    EXPECT_THROW(Pipeline(SyntheticSensor{}.model(), cfg, [](ClusterMessage&&) {}), ConfigError);
}

TEST(ClusterIo, JsonLinesRoundTrip)
{
    ClusterMessage c;
    c.id = 4;
    c.force_finished = true;
    c.publish_col = 1234;
    c.reference_timestamp_ns = 99;
    c.latency_ns = 7;
    c.points.push_back({{1.25f, -3.1f, 0.3333333f}, 5, 1200, 98, 0});
    std::stringstream buf;
    write_cluster_jsonl(buf, c);
    const auto back = read_clusters_jsonl(buf);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], c);
}

TEST(ClusterIo, MalformedLineIsDataError)
{
    std::stringstream buf("{\"id\": 1}\n");
    EXPECT_THROW(read_clusters_jsonl(buf), DataError);
}

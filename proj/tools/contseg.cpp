#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <contseg/cfs1.hpp>
#include <contseg/cluster_io.hpp>
#include <contseg/config.hpp>
#include <contseg/kitti.hpp>
#include <contseg/run.hpp>
#include <contseg/synth.hpp>

using namespace contseg;
using nlohmann::json;

namespace
{

enum ExitCode
{
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kInvariant = 3,
};

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    return out;
}

PipelineConfig make_config(const std::string& config_path, const std::string& mode, double d_t)
{
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : config::load(config_path);
    if (!mode.empty())
        cfg.cluster.mode = config::parse_mode(mode);
    if (d_t >= 0.0)
        cfg.cluster.distance_threshold = d_t;
    cfg.validate();
    return cfg;
}

RunResult run_file(const std::string& stream_path,
                   const PipelineConfig& cfg,
                   Execution execution,
                   const Pipeline::Sink& sink = {})
{
    auto in = open_in(stream_path);
    cfs1::Reader reader(in);
    return run_stream(reader.sensor(), cfg, [&] { return reader.next(); }, execution, sink);
}

json stats_json(const PipelineStats& s)
{
    return {{"firings", s.firings},
            {"columns", s.columns_processed},
            {"points_inserted", s.image.points_inserted},
            {"invalid_points", s.image.invalid_points},
            {"collisions", s.image.collisions},
            {"late_points", s.image.late_points},
            {"overflow_points", s.image.overflow_points},
            {"trees", s.trees.trees_created},
            {"edges", s.trees.edges_created},
            {"skipped_points", s.trees.skipped_points},
            {"truncated_columns", s.trees.truncated_columns},
            {"clusters", s.publish.clusters_published},
            {"forced", s.publish.clusters_forced},
            {"filtered", s.publish.clusters_filtered}};
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Streaming LiDAR instance segmentation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Raycast a synthetic scene into a firing stream");
    std::string scene_path, synth_out, synth_labels, scene_out;
    int64_t random_seed = -1;
    int objects = 20;
    double rotations = 0.0;
    auto* scene_opt = synth->add_option("--scene", scene_path, "Scene description (JSON)");
    auto* random_opt = synth->add_option("--random", random_seed, "Generate a random scene from this seed");
    scene_opt->excludes(random_opt);
    synth->add_option("--objects", objects, "Object count for --random")->check(CLI::Range(0, 1000));
    synth->add_option("--rotations", rotations, "Override the number of rotations");
    synth->add_option("--out", synth_out, "Output CFS1 stream")->required();
    synth->add_option("--labels", synth_labels, "Output ground truth label table")->required();
    synth->add_option("--write-scene", scene_out, "Also write the scene description");

    // import-kitti
    auto* import = app.add_subcommand("import-kitti", "Convert SemanticKITTI scans and labels");
    std::string velodyne_dir, labels_dir, import_out, import_labels;
    size_t max_scans = 0;
    uint32_t import_firings = 1800;
    import->add_option("--velodyne", velodyne_dir, "Directory of .bin scans")->required();
    import->add_option("--labels", labels_dir, "Directory of .label files")->required();
    import->add_option("--out", import_out, "Output CFS1 stream")->required();
    import->add_option("--labels-out", import_labels, "Output ground truth label table")->required();
    import->add_option("--max-scans", max_scans, "Import at most this many scans (0 = all)");
    import->add_option("--firings", import_firings, "Pseudo-firings per scan")->check(CLI::PositiveNumber);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "Run the pipeline on a stream");
    std::string cluster_stream, cluster_config, cluster_mode, cluster_out, export_labels;
    bool reference = false;
    double cluster_dt = -1.0;
    cluster->add_option("--stream", cluster_stream, "Input CFS1 stream")->required();
    cluster->add_option("--config", cluster_config, "Configuration file");
    cluster->add_option("--mode", cluster_mode, "exact | heuristic_a");
    cluster->add_option("--d-t", cluster_dt, "Distance threshold in meters");
    cluster->add_option("--out", cluster_out, "Cluster stream (JSON Lines); stdout when omitted");
    cluster->add_option("--export-labels", export_labels, "Per-point predicted label table");
    cluster->add_flag("--reference", reference, "Run every stage on one thread");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "USE/OSE of predicted labels against ground truth");
    std::string pred_path, gt_path, eval_stream;
    uint32_t eval_rows = 128, eval_firings = 1800;
    evaluate->add_option("--pred", pred_path, "Predicted label table")->required();
    evaluate->add_option("--gt", gt_path, "Ground truth label table")->required();
    evaluate->add_option("--stream", eval_stream, "Stream whose header defines the frame layout");
    evaluate->add_option("--rows", eval_rows, "Rows per firing")->check(CLI::PositiveNumber);
    evaluate->add_option("--firings-per-rotation", eval_firings, "Firings per frame")->check(CLI::PositiveNumber);

    // oracle-check
    auto* oracle = app.add_subcommand("oracle-check", "Compare the streaming partition with batch single linkage");
    std::string oracle_stream, oracle_config, oracle_mode;
    double oracle_dt = -1.0;
    double azimuth_gate = 0.0;
    size_t max_points = 20000;
    oracle->add_option("--stream", oracle_stream, "Input CFS1 stream")->required();
    oracle->add_option("--config", oracle_config, "Configuration file");
    oracle->add_option("--mode", oracle_mode, "exact | heuristic_a");
    oracle->add_option("--d-t", oracle_dt, "Distance threshold in meters");
    oracle->add_option("--azimuth-gate", azimuth_gate,
                       "Never link points whose continuous azimuths differ by this much (radians, 0 = off)");
    oracle->add_option("--max-points", max_points, "Refuse streams with more obstacle points");

    // latency
    auto* latency = app.add_subcommand("latency", "Latency statistics of a cluster stream");
    std::string latency_in;
    latency->add_option("--clusters", latency_in, "Cluster stream (JSON Lines)")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try
    {
        if (*synth)
        {
            if (scene_path.empty() && random_seed < 0)
                throw CLI::ValidationError("synth", "either --scene or --random is required");
            SyntheticScene scene = scene_path.empty() ? random_scene(static_cast<uint64_t>(random_seed), objects)
                                                      : load_scene(scene_path);
            if (rotations > 0.0)
                scene.sensor.rotations = rotations;
            if (!scene_out.empty())
                open_out(scene_out) << scene_to_json(scene).dump(2) << '\n';
            auto out = open_out(synth_out);
            auto labels = open_out(synth_labels);
            const uint64_t firings = write_synthetic(scene, out, labels);
            std::cout << json{{"firings", firings}, {"objects", scene.objects.size()}}.dump() << '\n';
        }
        else if (*import)
        {
            auto out = open_out(import_out);
            std::vector<LabelRecord> labels;
            kitti::ImportOptions options;
            options.firings_per_rotation = import_firings;
            const auto stats = kitti::import_directory(velodyne_dir, labels_dir, out, labels, options, max_scans);
            save_labels(import_labels, labels);
            std::cout << json{{"scans", stats.scans},
                              {"rejected_scans", stats.rejected_scans},
                              {"points_in", stats.points_in},
                              {"points_kept", stats.points_kept},
                              {"dropped_elevation", stats.dropped_elevation},
                              {"dropped_origin", stats.dropped_origin},
                              {"collisions", stats.collisions}}
                             .dump()
                      << '\n';
        }
        else if (*cluster)
        {
            const PipelineConfig cfg = make_config(cluster_config, cluster_mode, cluster_dt);
            std::ofstream file;
            if (!cluster_out.empty())
                file = open_out(cluster_out);
            std::ostream& out = cluster_out.empty() ? std::cout : file;
            const RunResult run = run_file(cluster_stream,
                                           cfg,
                                           reference ? Execution::reference : Execution::staged,
                                           [&](ClusterMessage&& c) { write_cluster_jsonl(out, c); });
            if (!export_labels.empty())
                save_labels(export_labels, run.predicted_labels());
            std::cerr << stats_json(run.stats).dump() << '\n';
        }
        else if (*evaluate)
        {
            if (!eval_stream.empty())
            {
                auto in = open_in(eval_stream);
                cfs1::Reader reader(in);
                eval_rows = reader.sensor().rows;
                eval_firings = reader.sensor().firings_per_rotation;
            }
            const auto pred = load_labels(pred_path);
            const auto gt = load_labels(gt_path);
            const auto report = evaluate_segmentation(pred, gt, eval_rows, eval_firings);
            json frames = json::array();
            for (const FrameScore& f : report.frames)
                frames.push_back({{"frame", f.frame}, {"points", f.points}, {"use", f.score.use}, {"ose", f.score.ose}});
            std::cout << json{{"use", mean_std_json(report.use)},
                              {"ose", mean_std_json(report.ose)},
                              {"gt_points", report.gt_points},
                              {"predicted_points", report.predicted_points},
                              {"evaluated_points", report.evaluated_points},
                              {"unclustered_instance_points", report.unclustered_instance_points},
                              {"frames", frames}}
                             .dump(2)
                      << '\n';
        }
        else if (*oracle)
        {
            const PipelineConfig cfg = make_config(oracle_config, oracle_mode, oracle_dt);
            if (cfg.cluster.checkerboard)
                throw ConfigError("oracle-check needs cluster.checkerboard = false");
            const RunResult run = run_file(oracle_stream, cfg, Execution::reference);
            if (run.stats.publish.clusters_filtered != 0)
                throw ConfigError("oracle-check needs ccl.min_cluster_size = 1");
            const auto obstacles = static_cast<size_t>(
                std::count_if(run.points.begin(), run.points.end(), [](const ObservedPoint& p) {
                    return p.label == Label::obstacle;
                }));
            if (obstacles > max_points)
                throw DataError("stream holds " + std::to_string(obstacles) +
                                " obstacle points, above --max-points " + std::to_string(max_points));
            const auto report = compare_with_oracle(run,
                                                    cfg.cluster.distance_threshold,
                                                    azimuth_gate > 0.0 ? std::optional<double>(azimuth_gate)
                                                                       : std::nullopt);
            std::cout << json{{"mode", cfg.cluster.mode == SearchMode::exact ? "exact" : "heuristic_a"},
                              {"d_T", cfg.cluster.distance_threshold},
                              {"points", report.points},
                              {"clusters", report.clusters},
                              {"oracle_components", report.components},
                              {"agreement", report.agreement},
                              {"forced", run.stats.publish.clusters_forced},
                              {"missing", report.delivery.missing},
                              {"duplicated", report.delivery.duplicated}}
                             .dump(2)
                      << '\n';
            if (!report.delivery.exactly_once())
                return kInvariant;
            if (cfg.cluster.mode == SearchMode::exact && run.stats.publish.clusters_forced == 0 &&
                report.agreement != 1.0)
                return kInvariant;
        }
        else if (*latency)
        {
            auto in = open_in(latency_in);
            const auto clusters = read_clusters_jsonl(in);
            const auto report = latency_stats(clusters);
            std::cout << json{{"clusters", report.clusters},
                              {"non_forced", report.latencies_ms.size()},
                              {"forced", report.forced},
                              {"latency_ms", mean_std_json(report.latency_ms)},
                              {"forced_latency_ms", mean_std_json(report.forced_latency_ms)},
                              {"negative_latencies", report.negative_latencies}}
                             .dump(2)
                      << '\n';
        }
        return kOk;
    }
    catch (const CLI::ParseError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    catch (const ConfigError& e)
    {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kUsage;
    }
    catch (const DataError& e)
    {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    }
    catch (const InvariantError& e)
    {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kInvariant;
    }
    catch (const std::out_of_range& e)
    {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kInvariant;
    }
}

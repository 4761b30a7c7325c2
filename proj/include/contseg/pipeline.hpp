#ifndef CONTSEG_PIPELINE_HPP
#define CONTSEG_PIPELINE_HPP

#include <chrono>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>

#include <contseg/ccl_publish.hpp>
#include <contseg/ground_seg.hpp>
#include <contseg/range_image.hpp>
#include <contseg/tree_cluster.hpp>

namespace contseg
{

enum class LatencyClock
{
    stream, // publish time = timestamp of the firing that finished the publishing column
    wall,   // stream time plus measured processing delay; not reproducible between runs
};

struct PipelineConfig
{
    int64_t buffer_width{0}; // 0 selects four rotations
    CoordinateFrame frame{CoordinateFrame::world};
    GroundParams ground;
    ClusterParams cluster;
    PublishParams publish;
    LatencyClock clock{LatencyClock::stream};

    [[nodiscard]] int64_t resolved_width(const SensorModel& sensor) const
    {
        return buffer_width > 0 ? buffer_width : 4 * static_cast<int64_t>(sensor.firings_per_rotation);
    }

    void validate() const
    {
        if (buffer_width < 0)
            throw ConfigError("range_image.width must be non-negative");
        ground.validate();
        cluster.validate();
        publish.validate();
    }
};

enum class Execution
{
    reference, // every stage runs on the calling thread
    staged,    // insertion, ground classification and clustering run on separate threads
};

struct PipelineStats
{
    RangeImageCounters image;
    TreeCounters trees;
    PublishCounters publish;
    uint64_t columns_processed{0};
    uint64_t firings{0};
};

namespace detail
{

/// Unbounded multi-producer queue with close semantics.
template <typename T>
class Channel
{
  public:
    void push(T value)
    {
        {
            std::lock_guard lock(mutex_);
            items_.push(std::move(value));
        }
        cv_.notify_one();
    }

    void close()
    {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    /// Blocks until an item arrives; nullopt once closed and drained.
    std::optional<T> pop()
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty())
            return std::nullopt;
        T value = std::move(items_.front());
        items_.pop();
        return value;
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::queue<T> items_;
    bool closed_{false};
};

inline int64_t steady_now_ns()
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace detail

/// The continuous clustering pipeline: firings in, clusters out.
///
/// Finished columns pass through ground classification, tree association and cluster generation in increasing
/// column order. The staged execution produces exactly the same clusters as the reference execution: every stage
/// decision depends only on the column index being processed, and insertion waits for the downstream stages
/// whenever a firing would otherwise reach past the buffer.
class Pipeline
{
  public:
    using Sink = std::function<void(ClusterMessage&&)>;
    using ColumnObserver = std::function<void(std::span<const Cell>)>;

    Pipeline(const SensorModel& sensor, PipelineConfig config, Sink sink, Execution execution = Execution::reference)
        : config_(validated(std::move(config), sensor)),
          image_(sensor, config_.resolved_width(sensor), config_.frame),
          ground_(config_.ground), trees_(config_.cluster), publisher_(config_.publish), sink_(std::move(sink)),
          execution_(execution)
    {
        if (execution_ == Execution::staged)
        {
            ground_thread_ = std::thread([this] { ground_worker(); });
            cluster_thread_ = std::thread([this] { cluster_worker(); });
        }
    }

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    ~Pipeline()
    {
        if (execution_ == Execution::staged && !finished_)
        {
            ground_queue_.close();
            join();
        }
    }

    /// Called with every column after it was clustered (final labels). Runs on the clustering thread.
    void set_column_observer(ColumnObserver observer) { observer_ = std::move(observer); }

    [[nodiscard]] const RangeImage& image() const { return image_; }
    [[nodiscard]] const PipelineConfig& config() const { return config_; }

    void push(const Firing& firing)
    {
        rethrow_worker_error();
        if (finished_)
            throw std::logic_error("pipeline already finished");
        ++firings_;
        if (execution_ == Execution::staged)
            wait_for_capacity(firing);
        const auto finished = image_.insert_firing(firing);
        hand_off(finished, firing.timestamp_ns);
        last_stamp_ = firing.timestamp_ns;
    }

    /// End of stream: processes every remaining column and publishes every remaining tree.
    void finish()
    {
        if (finished_)
            return;
        rethrow_worker_error();
        hand_off(image_.finish_all(), last_stamp_);
        if (execution_ == Execution::staged)
        {
            ground_queue_.push(ColumnJob{kFlush, last_stamp_, 0});
            ground_queue_.close();
            join();
        }
        else
        {
            drain_trees(last_stamp_);
        }
        finished_ = true;
        rethrow_worker_error();
    }

    [[nodiscard]] PipelineStats stats() const
    {
        return {image_.counters(), trees_.counters(), publisher_.counters(), columns_processed_, firings_};
    }

  private:
    static constexpr int64_t kFlush = std::numeric_limits<int64_t>::min();

    struct ColumnJob
    {
        int64_t col{0};
        int64_t finish_stamp_ns{0};
        int64_t finish_wall_ns{0};
    };

    static PipelineConfig validated(PipelineConfig config, const SensorModel& sensor)
    {
        config.validate();
        if (config.publish.forced_margin >= config.resolved_width(sensor))
            throw ConfigError("ccl.forced_margin must be smaller than the range image width");
        return config;
    }

    void hand_off(const std::vector<int64_t>& columns, int64_t stamp)
    {
        const int64_t wall = config_.clock == LatencyClock::wall ? detail::steady_now_ns() : 0;
        for (int64_t c : columns)
        {
            ColumnJob job{c, stamp, wall};
            if (execution_ == Execution::staged)
            {
                {
                    std::lock_guard lock(progress_mutex_);
                    ++handed_off_;
                }
                ground_queue_.push(job);
            }
            else
            {
                ground_step(job);
                cluster_step(job);
            }
        }
    }

    void ground_step(const ColumnJob& job) { ground_.process(image_.column(job.col)); }

    void cluster_step(const ColumnJob& job)
    {
        const auto new_roots = trees_.associate_column(image_, job.col);
        publisher_.add_roots(new_roots);
        if (observer_)
        {
            auto column = image_.column(job.col);
            observer_(std::span<const Cell>(column.data(), column.size()));
        }

        const int64_t publish_time = publish_time_ns(job);
        if (++ccl_counter_ % static_cast<uint64_t>(config_.publish.ccl_every) == 0)
        {
            const double rear = static_cast<double>(job.col + 1) * image_.column_width();
            emit(publisher_.ccl_run(image_, rear, job.col, publish_time));
        }
        emit(publisher_.forced_finish(image_, job.col, publish_time));
        publisher_.reclaim_columns(image_, job.col);
        ++columns_processed_;
    }

    // Runs empty columns until every tree completed, so that end-of-stream clusters follow the usual rule.
    void drain_trees(int64_t stamp)
    {
        while (!publisher_.unpublished_roots().empty())
        {
            const int64_t col = image_.next_unfinished_column();
            image_.finish_through(col);
            const ColumnJob job{col, stamp, config_.clock == LatencyClock::wall ? detail::steady_now_ns() : 0};
            ground_step(job);
            cluster_step(job);
        }
    }

    [[nodiscard]] int64_t publish_time_ns(const ColumnJob& job) const
    {
        if (config_.clock == LatencyClock::wall)
            return job.finish_stamp_ns + (detail::steady_now_ns() - job.finish_wall_ns);
        return job.finish_stamp_ns;
    }

    void emit(std::vector<ClusterMessage>&& clusters)
    {
        for (ClusterMessage& c : clusters)
            sink_(std::move(c));
    }

    // Staged mode: a firing that reaches beyond the buffer waits until all handed-off columns were processed, which
    // reproduces the buffer state of the reference execution.
    void wait_for_capacity(const Firing& firing)
    {
        const auto max_col = image_.max_column_reached(firing);
        if (!max_col || image_.first_live_column() < 0 || *max_col < image_.first_live_column() + image_.width())
            return;
        std::unique_lock lock(progress_mutex_);
        progress_cv_.wait(lock, [&] { return processed_ == handed_off_ || worker_failed_; });
    }

    void ground_worker()
    {
        while (auto job = ground_queue_.pop())
        {
            if (job->col != kFlush && !worker_failed_)
            {
                // the column becomes live once the clustering stage reclaimed enough of the buffer
                {
                    std::unique_lock lock(progress_mutex_);
                    progress_cv_.wait(lock, [&] {
                        return worker_failed_ || job->col < image_.first_live_column() + image_.width();
                    });
                }
                if (!worker_failed_)
                    run_guarded([&] { ground_step(*job); });
            }
            cluster_queue_.push(*job);
        }
        cluster_queue_.close();
    }

    void cluster_worker()
    {
        while (auto job = cluster_queue_.pop())
        {
            if (!worker_failed_)
            {
                if (job->col == kFlush)
                    run_guarded([&] { drain_trees(job->finish_stamp_ns); });
                else
                    run_guarded([&] { cluster_step(*job); });
            }
            if (job->col != kFlush)
            {
                std::lock_guard lock(progress_mutex_);
                ++processed_;
            }
            progress_cv_.notify_all();
        }
    }

    template <typename F>
    void run_guarded(F&& f)
    {
        try
        {
            f();
        }
        catch (...)
        {
            std::lock_guard lock(progress_mutex_);
            if (!worker_error_)
                worker_error_ = std::current_exception();
            worker_failed_ = true;
            progress_cv_.notify_all();
        }
    }

    void rethrow_worker_error()
    {
        std::lock_guard lock(progress_mutex_);
        if (worker_error_)
        {
            auto error = worker_error_;
            worker_error_ = nullptr;
            std::rethrow_exception(error);
        }
    }

    void join()
    {
        if (ground_thread_.joinable())
            ground_thread_.join();
        if (cluster_thread_.joinable())
            cluster_thread_.join();
    }

    PipelineConfig config_;
    RangeImage image_;
    GroundSegmenter ground_;
    TreeClusterer trees_;
    ClusterPublisher publisher_;
    Sink sink_;
    ColumnObserver observer_;
    Execution execution_;

    int64_t last_stamp_{0};
    uint64_t firings_{0};
    uint64_t ccl_counter_{0};
    uint64_t columns_processed_{0};
    bool finished_{false};

    detail::Channel<ColumnJob> ground_queue_;
    detail::Channel<ColumnJob> cluster_queue_;
    std::thread ground_thread_;
    std::thread cluster_thread_;
    std::mutex progress_mutex_;
    std::condition_variable progress_cv_;
    uint64_t handed_off_{0};
    uint64_t processed_{0};
    std::atomic<bool> worker_failed_{false};
    std::exception_ptr worker_error_;
};

} // namespace contseg

#endif

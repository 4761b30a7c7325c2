#include <gtest/gtest.h>

#include <contseg/metrics.hpp>

#include <functional>
#include <random>
#include <sstream>

using namespace contseg;

TEST(UseOse, PerfectSegmentationIsZero)
{
    const std::vector<uint32_t> gt{1, 1, 1, 2, 2, 3};
    const std::vector<uint32_t> pred{7, 7, 7, 4, 4, 9};
    const UseOse r = use_ose(pred, gt);
    EXPECT_EQ(r.use, 0.0);
    EXPECT_EQ(r.ose, 0.0);
}

TEST(UseOse, MergeOfTwoEqualInstancesIsLnTwo)
{
    const std::vector<uint32_t> gt{1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
    const std::vector<uint32_t> pred(10, 5);
    const UseOse r = use_ose(pred, gt);
    EXPECT_NEAR(r.use, std::log(2.0), 1e-12);
    EXPECT_EQ(r.ose, 0.0);
}

TEST(UseOse, SplitIntoHalvesIsLnTwo)
{
    const std::vector<uint32_t> gt(10, 3);
    const std::vector<uint32_t> pred{1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
    const UseOse r = use_ose(pred, gt);
    EXPECT_NEAR(r.ose, std::log(2.0), 1e-12);
    EXPECT_EQ(r.use, 0.0);
}

TEST(UseOse, HandComputedUnevenMix)
{
    // one cluster holding 3 points of instance 1 and 1 point of instance 2
    const std::vector<uint32_t> gt{1, 1, 1, 2};
    const std::vector<uint32_t> pred{4, 4, 4, 4};
    const double p = 0.75;
    EXPECT_NEAR(use_ose(pred, gt).use, -(p * std::log(p) + (1 - p) * std::log(1 - p)), 1e-12);
}

TEST(UseOse, InvariantUnderRelabeling)
{
    std::mt19937 rng(3);
    std::vector<uint32_t> gt(500), pred(500), permuted(500);
    for (size_t i = 0; i < gt.size(); ++i)
    {
        gt[i] = 1 + rng() % 7;
        pred[i] = 1 + rng() % 9;
        permuted[i] = 100 - pred[i] * 3;
    }
    const UseOse a = use_ose(pred, gt);
    const UseOse b = use_ose(permuted, gt);
    EXPECT_NEAR(a.use, b.use, 1e-12);
    EXPECT_NEAR(a.ose, b.ose, 1e-12);
    EXPECT_GE(a.use, 0.0);
    EXPECT_GE(a.ose, 0.0);
}

TEST(UseOse, SubsetPropertiesGiveZero)
{
    // every predicted cluster lies inside one instance: USE = 0 even though instances are split
    const std::vector<uint32_t> gt{1, 1, 1, 2, 2, 2};
    const std::vector<uint32_t> pred{1, 2, 2, 3, 4, 5};
    EXPECT_EQ(use_ose(pred, gt).use, 0.0);
    EXPECT_GT(use_ose(pred, gt).ose, 0.0);
    EXPECT_EQ(use_ose(gt, pred).ose, 0.0);
}

TEST(UseOse, LengthMismatchIsRejected)
{
    const std::vector<uint32_t> a{1, 2};
    const std::vector<uint32_t> b{1};
    EXPECT_THROW(use_ose(a, b), DataError);
}

TEST(EvaluateSegmentation, PerFrameMeanAndPopulationStd)
{
    // rows 2, 3 firings per frame: frame 0 holds ids 0..5, frame 1 holds ids 6..11
    std::vector<LabelRecord> gt, pred;
    for (uint64_t id = 0; id < 12; ++id)
        gt.push_back({id, id < 6 ? static_cast<uint32_t>(1 + id % 2) : 3u});
    for (uint64_t id = 0; id < 6; ++id)
        pred.push_back({id, 1}); // frame 0 merges instances 1 and 2 evenly: USE = ln 2
    for (uint64_t id = 6; id < 12; ++id)
        pred.push_back({id, 2}); // frame 1 perfect
    const auto report = evaluate_segmentation(pred, gt, 2, 3);
    ASSERT_EQ(report.frames.size(), 2u);
    EXPECT_NEAR(report.use.mean, std::log(2.0) / 2, 1e-12);
    EXPECT_NEAR(report.use.std, std::log(2.0) / 2, 1e-12);
    EXPECT_EQ(report.ose.mean, 0.0);
    EXPECT_EQ(report.evaluated_points, 12u);
}

TEST(EvaluateSegmentation, GroundAndUnclusteredAreExcluded)
{
    const std::vector<LabelRecord> gt{{0, 0}, {1, 0}, {2, 5}, {3, 5}, {4, 6}};
    const std::vector<LabelRecord> pred{{0, 9}, {1, 0}, {2, 1}, {3, 1}, {4, 0}};
    const auto report = evaluate_segmentation(pred, gt, 1, 100);
    EXPECT_EQ(report.evaluated_points, 2u);
    EXPECT_EQ(report.unclustered_instance_points, 1u);
    EXPECT_EQ(report.use.mean, 0.0);
}

TEST(EvaluateSegmentation, UnknownPointIdIsRejected)
{
    const std::vector<LabelRecord> gt{{0, 1}};
    const std::vector<LabelRecord> pred{{0, 1}, {8, 1}};
    EXPECT_THROW(evaluate_segmentation(pred, gt, 1, 10), DataError);
}

TEST(LatencyStats, SingleCluster)
{
    std::vector<ClusterMessage> c(1);
    c[0].latency_ns = 3'000'000;
    const auto r = latency_stats(c);
    EXPECT_DOUBLE_EQ(r.latency_ms.mean, 3.0);
    EXPECT_DOUBLE_EQ(r.latency_ms.std, 0.0);
}

TEST(LatencyStats, PopulationStd)
{
    std::vector<ClusterMessage> c(2);
    c[0].latency_ns = 1'000'000;
    c[1].latency_ns = 5'000'000;
    const auto r = latency_stats(c);
    EXPECT_DOUBLE_EQ(r.latency_ms.mean, 3.0);
    EXPECT_DOUBLE_EQ(r.latency_ms.std, 2.0);
}

TEST(LatencyStats, ForcedReportedSeparately)
{
    std::vector<ClusterMessage> c(3);
    c[0].latency_ns = 1'000'000;
    c[1].latency_ns = 2'000'000;
    c[2].latency_ns = 90'000'000;
    c[2].force_finished = true;
    const auto r = latency_stats(c);
    EXPECT_EQ(r.forced, 1u);
    EXPECT_DOUBLE_EQ(r.latency_ms.mean, 1.5);
    EXPECT_DOUBLE_EQ(r.forced_latency_ms.mean, 90.0);
}

TEST(LatencyStats, EmptyStream)
{
    const auto r = latency_stats(std::vector<ClusterMessage>{});
    EXPECT_EQ(r.clusters, 0u);
    EXPECT_EQ(r.latency_ms.mean, 0.0);
}

TEST(PartitionAgreement, IdenticalUpToRenaming)
{
    const std::vector<uint32_t> a{1, 1, 2, 2, 3};
    const std::vector<uint32_t> b{9, 9, 4, 4, 7};
    EXPECT_EQ(partition_agreement(a, b), 1.0);
}

TEST(PartitionAgreement, SplitCountsLargerPart)
{
    const std::vector<uint32_t> a{1, 1, 1, 2};
    const std::vector<uint32_t> b{5, 5, 5, 5};
    EXPECT_DOUBLE_EQ(partition_agreement(a, b), 0.75);
}

TEST(PartitionAgreement, OneToOneMatchingBeatsGreedy)
{
    // pairing label 1 with its majority partner 10 leaves label 2 unmatched
    const std::vector<uint32_t> a{1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
    const std::vector<uint32_t> b{10, 10, 10, 10, 20, 20, 10, 10, 10, 10, 10};
    // 1->10 (4) + 2 unmatched = 4, versus 1->20 (2) + 2->10 (5) = 7
    EXPECT_DOUBLE_EQ(partition_agreement(a, b), 7.0 / 11.0);
}

TEST(PartitionAgreement, MatchesBruteForceOnSmallCases)
{
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial)
    {
        const size_t n = 1 + rng() % 12;
        std::vector<uint32_t> a(n), b(n);
        for (size_t i = 0; i < n; ++i)
        {
            a[i] = 1 + rng() % 4;
            b[i] = 1 + rng() % 4;
        }
        // brute force over all injective maps from labels of a into labels {1..4} of b (or unmatched = 0)
        int best = 0;
        std::vector<uint32_t> map(5, 0);
        std::function<void(uint32_t, std::vector<bool>&)> rec = [&](uint32_t la, std::vector<bool>& used) {
            if (la == 5)
            {
                int s = 0;
                for (size_t i = 0; i < n; ++i)
                    s += map[a[i]] == b[i] ? 1 : 0;
                best = std::max(best, s);
                return;
            }
            map[la] = 0;
            rec(la + 1, used);
            for (uint32_t lb = 1; lb <= 4; ++lb)
                if (!used[lb])
                {
                    used[lb] = true;
                    map[la] = lb;
                    rec(la + 1, used);
                    used[lb] = false;
                }
            map[la] = 0;
        };
        std::vector<bool> used(5, false);
        rec(1, used);
        EXPECT_DOUBLE_EQ(partition_agreement(a, b), static_cast<double>(best) / n) << "trial " << trial;
    }
}

TEST(LabelTable, RoundTripAndTruncation)
{
    const std::vector<LabelRecord> records{{1, 2}, {1ull << 40, 7}};
    std::stringstream buf;
    write_labels(buf, records);
    EXPECT_EQ(buf.str().size(), 24u);
    EXPECT_EQ(read_labels(buf), records);
    std::stringstream cut(buf.str().substr(0, 20));
    EXPECT_THROW(read_labels(cut), DataError);
}

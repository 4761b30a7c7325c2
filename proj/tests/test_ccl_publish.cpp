#include <gtest/gtest.h>

#include <contseg/ccl_publish.hpp>
#include <contseg/tree_cluster.hpp>

#include "support/builders.hpp"

using namespace contseg;
using contseg::testing::fill_image;
using contseg::testing::make_firing;
using contseg::testing::PlacedPoint;
using contseg::testing::polar;
using contseg::testing::small_sensor;

namespace
{

constexpr uint32_t kFirings = 64;
constexpr double kCol = kTwoPi / kFirings;

double center(int64_t col) { return (static_cast<double>(col) + 0.5) * kCol; }

struct Fixture
{
    RangeImage image{small_sensor(6, kFirings), 256};
    TreeClusterer trees{ClusterParams{}};
    ClusterPublisher publisher{PublishParams{}};
    int64_t last_col{0};

    void build(const std::vector<PlacedPoint>& points)
    {
        for (int64_t c : fill_image(image, points))
        {
            publisher.add_roots(trees.associate_column(image, c));
            last_col = c;
        }
    }

    // three points: two trees in column 10 joined by an edge through a point in column 11
    void build_linked_pair()
    {
        build({{1, polar(5, center(10) + 0.04, 0.4)},
               {4, polar(5, center(10) + 0.04, -0.4)},
               {2, polar(5, center(11) - 0.04, 0.0)}});
    }

    TreeMeta& meta(int row, int64_t col) { return *image.at(row, col).tree_meta; }
};

} // namespace

TEST(CclRun, LinkedCompleteTreesFormOneCluster)
{
    Fixture f;
    f.build_linked_pair();
    ASSERT_EQ(f.publisher.unpublished_roots().size(), 2u);
    const auto out = f.publisher.ccl_run(f.image, 1e9, f.last_col, 0);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].points.size(), 3u);
    EXPECT_EQ(out[0].id, 1u);
    EXPECT_FALSE(out[0].force_finished);
    EXPECT_TRUE(f.publisher.unpublished_roots().empty());
}

TEST(CclRun, IncompleteTreeHoldsBackItsComponent)
{
    Fixture f;
    f.build_linked_pair();
    const double a = f.meta(1, 10).phi_finished;
    const double b = f.meta(4, 10).phi_finished;
    ASSERT_LT(b, a);
    const auto out = f.publisher.ccl_run(f.image, 0.5 * (a + b), 42, 0);
    EXPECT_TRUE(out.empty());
    EXPECT_EQ(f.image.at(1, 10).visited_stamp, 42);
    EXPECT_EQ(f.image.at(4, 10).visited_stamp, 42);
    EXPECT_EQ(f.publisher.unpublished_roots().size(), 2u);
}

TEST(CclRun, StrictInequalityAtPhiFinished)
{
    Fixture f;
    f.build({{2, polar(5, center(10), 0.0)}});
    const double phi = f.meta(2, 10).phi_finished;
    EXPECT_TRUE(f.publisher.ccl_run(f.image, phi, 1, 0).empty());
    EXPECT_EQ(f.publisher.ccl_run(f.image, std::nextafter(phi, 10.0), 2, 0).size(), 1u);
}

TEST(CclRun, UnlinkedTreesGetDistinctIds)
{
    Fixture f;
    f.build({{2, polar(5, center(10), 0.0)}, {2, polar(5, center(20), 0.0)}});
    const auto out = f.publisher.ccl_run(f.image, 1e9, f.last_col, 0);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_NE(out[0].id, out[1].id);
    EXPECT_LT(out[0].points.front().col, out[1].points.front().col);
}

TEST(CclRun, ClusterCarriesNewestTimestampAndLatency)
{
    Fixture f;
    f.build_linked_pair();
    const auto out = f.publisher.ccl_run(f.image, 1e9, f.last_col, 9000);
    ASSERT_EQ(out.size(), 1u);
    int64_t newest = 0;
    for (const ClusterPoint& p : out[0].points)
        newest = std::max(newest, p.timestamp_ns);
    EXPECT_EQ(out[0].reference_timestamp_ns, newest);
    EXPECT_EQ(out[0].latency_ns, 9000 - newest);
    EXPECT_EQ(out[0].publish_col, f.last_col + 1);
}

TEST(CclRun, PublishedCellsAreMarked)
{
    Fixture f;
    f.build_linked_pair();
    f.publisher.ccl_run(f.image, 1e9, f.last_col, 0);
    EXPECT_TRUE(f.image.at(1, 10).published);
    EXPECT_TRUE(f.image.at(2, 11).published);
    EXPECT_TRUE(f.meta(4, 10).published);
}

TEST(CclRun, DanglingEdgeIsInvariantViolation)
{
    Fixture f;
    f.build({{2, polar(5, center(10), 0.0)}});
    f.meta(2, 10).edges.push_back({12, 3});
    EXPECT_THROW(f.publisher.ccl_run(f.image, 1e9, 1, 0), InvariantError);
}

TEST(CclRun, MinimumSizeFiltersSmallClusters)
{
    Fixture f;
    PublishParams p;
    p.min_cluster_size = 2;
    f.publisher = ClusterPublisher(p);
    f.build({{2, polar(5, center(10), 0.0)}, {2, polar(5, center(20), 0.0)}, {3, polar(5, center(20), -0.2)}});
    const auto out = f.publisher.ccl_run(f.image, 1e9, f.last_col, 0);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].points.size(), 2u);
    EXPECT_EQ(f.publisher.counters().clusters_filtered, 1u);
}

TEST(ForcedFinish, NoOverflowNoForcedPublish)
{
    Fixture f;
    f.build_linked_pair();
    EXPECT_TRUE(f.publisher.forced_finish(f.image, f.last_col, 0).empty());
}

TEST(ForcedFinish, WholeComponentIsPublishedTogether)
{
    Fixture f;
    // three trees in column 10 chained by two linking points in column 11
    f.build({{0, polar(5, center(10) + 0.04, 0.8)},
             {2, polar(5, center(10) + 0.04, 0.0)},
             {4, polar(5, center(10) + 0.04, -0.8)},
             {1, polar(5, center(11) - 0.04, 0.4)},
             {3, polar(5, center(11) - 0.04, -0.4)}});
    ASSERT_EQ(f.publisher.unpublished_roots().size(), 3u);
    // 256 columns wide, margin 64: roots in column 10 are due once column 202 is reached
    EXPECT_TRUE(f.publisher.forced_finish(f.image, 201, 0).empty());
    const auto out = f.publisher.forced_finish(f.image, 202, 0);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_TRUE(out[0].force_finished);
    EXPECT_EQ(out[0].points.size(), 5u);
    EXPECT_TRUE(f.publisher.unpublished_roots().empty());
}

TEST(ReclaimColumns, NoRootsReclaimsUpToCurrentColumn)
{
    Fixture f;
    f.build({{2, polar(5, center(10), 0.0)}});
    f.publisher.ccl_run(f.image, 1e9, f.last_col, 0);
    EXPECT_EQ(f.publisher.reclaim_columns(f.image, f.last_col), f.last_col);
}

TEST(ReclaimColumns, OldestRootBoundsReclaim)
{
    RangeImage image(small_sensor(4, 1800), 256);
    const auto c = [](int64_t col) { return (static_cast<double>(col) + 0.5) * kTwoPi / 1800; };
    image.insert_firing(make_firing(0, 4, c(400), {}));
    image.insert_firing(make_firing(1, 4, c(500), {{1, polar(20, c(500), 0)}}));
    const auto finished = image.insert_firing(make_firing(2, 4, c(520), {}));
    ASSERT_EQ(finished.back(), 519);
    image.at(1, 500).label = Label::obstacle;
    TreeClusterer trees{ClusterParams{}};
    ClusterPublisher publisher;
    publisher.add_roots(trees.associate_column(image, 500));
    EXPECT_EQ(publisher.reclaim_columns(image, 519), 500);
    EXPECT_EQ(publisher.counters().columns_reclaimed, 100u);
    EXPECT_EQ(publisher.reclaim_columns(image, 519), 500);
    EXPECT_EQ(publisher.counters().columns_reclaimed, 100u);
}

TEST(PublishParams, Validation)
{
    PublishParams p;
    p.forced_margin = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.ccl_every = 0;
    EXPECT_THROW(p.validate(), ConfigError);
}

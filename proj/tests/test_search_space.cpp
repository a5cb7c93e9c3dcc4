#include <gtest/gtest.h>

#include <set>

#include "ddpnas/search_space.hpp"
#include "test_support.hpp"

using namespace ddpnas;

TEST(BuildSpace, FourNodesHasFourteenEdges)
{
    const auto spec = build_space(4, ddptest::op_names(8), 2);
    EXPECT_EQ(spec.edges().size(), 14u);
    EXPECT_EQ(spec.num_flat_edges(), 28u);
}

TEST(BuildSpace, SmallestCell)
{
    const auto spec = build_space(1, {"op_a", "op_b"}, 1);
    ASSERT_EQ(spec.edges().size(), 2u);
    EXPECT_EQ(spec.edges()[0], (EdgeId{-1, 1}));
    EXPECT_EQ(spec.edges()[1], (EdgeId{0, 1}));
}

TEST(BuildSpace, TwoNodesEdgeOrder)
{
    const auto spec = build_space(2, {"a", "b", "c"}, 1);
    const std::vector<EdgeId> expected{{-1, 1}, {0, 1}, {-1, 2}, {0, 2}, {1, 2}};
    EXPECT_EQ(spec.edges(), expected);
}

TEST(BuildSpace, EdgesMatchReferenceForManySizes)
{
    for (int m = 1; m <= 12; ++m) {
        const auto spec = build_space(m, {"a", "b"}, 1);
        const auto ref = ddptest::reference_edges(m);
        ASSERT_EQ(spec.edges().size(), ref.size());
        EXPECT_EQ(spec.edges().size(), static_cast<std::size_t>(m * (m + 3) / 2));
        for (std::size_t i = 0; i < ref.size(); ++i) {
            EXPECT_EQ(spec.edges()[i].source, ref[i].first);
            EXPECT_EQ(spec.edges()[i].target, ref[i].second);
        }
        EXPECT_TRUE(std::is_sorted(spec.edges().begin(), spec.edges().end()));
    }
}

TEST(BuildSpace, RejectsBadInput)
{
    EXPECT_THROW(build_space(0, {"a", "b"}, 1), ConfigError);
    EXPECT_THROW(build_space(2, {"a", "a"}, 1), ConfigError);
    EXPECT_THROW(build_space(2, {"a"}, 1), ConfigError);
    EXPECT_THROW(build_space(2, {"a", ""}, 1), ConfigError);
    EXPECT_THROW(build_space(2, {"a", "b;c"}, 1), ConfigError);
    EXPECT_THROW(build_space(2, {"a", "b"}, 0), ConfigError);
}

TEST(SpaceSize, TwoTimesEightToTheFourteen)
{
    const auto spec = build_space(4, ddptest::op_names(8), 2);
    EXPECT_EQ(space_size(spec), BigInt("8796093022208"));
    EXPECT_GT(space_size(spec), BigInt(std::numeric_limits<std::uint32_t>::max()));
}

TEST(SpaceSize, SingleChoice) { EXPECT_EQ(space_size(1, 1, 2), BigInt(1)); }

TEST(SpaceSize, ThreeToTheFive)
{
    EXPECT_EQ(space_size(build_space(2, {"a", "b", "c"}, 1)), BigInt(243));
}

TEST(Enumerate, TwoByTwo)
{
    const auto archs = enumerate_architectures(build_space(1, {"a", "b"}, 1), 10);
    EXPECT_EQ(archs.size(), 4u);
}

TEST(Enumerate, CountOrderAndUniqueness)
{
    const auto spec = build_space(2, {"a", "b", "c"}, 1);
    const auto archs = enumerate_architectures(spec, 300);
    ASSERT_EQ(archs.size(), 243u);
    EXPECT_EQ(archs.front().choice, std::vector<int>(5, 0));
    EXPECT_EQ(archs.back().choice, std::vector<int>(5, 2));
    EXPECT_TRUE(std::is_sorted(archs.begin(), archs.end(),
                               [](const auto& a, const auto& b) { return a.choice < b.choice; }));
    std::set<std::string> keys;
    for (const auto& a : archs) {
        keys.insert(encode(spec, a));
    }
    EXPECT_EQ(keys.size(), 243u);
}

TEST(Enumerate, TwoCellTypesCoverJointAssignments)
{
    const auto spec = build_space(1, {"a", "b"}, 2);
    const auto archs = enumerate_architectures(spec, 100);
    EXPECT_EQ(archs.size(), 16u);
    // each cell type's projection takes each of the space_size / types values equally often
    std::map<std::vector<int>, int> cell0;
    for (const auto& a : archs) {
        ++cell0[{a.choice[0], a.choice[1]}];
    }
    EXPECT_EQ(cell0.size(), 4u);
    for (const auto& [k, n] : cell0) {
        EXPECT_EQ(n, 4);
    }
}

TEST(Enumerate, CapErrorCarriesSize)
{
    const auto spec = build_space(4, ddptest::op_names(8), 2);
    try {
        enumerate_architectures(spec, 1000000);
        FAIL() << "expected EnumerationCapError";
    } catch (const EnumerationCapError& ex) {
        EXPECT_EQ(ex.size(), BigInt(2) * boost::multiprecision::pow(BigInt(8), 14));
        EXPECT_NE(std::string(ex.what()).find("8796093022208"), std::string::npos);
    }
}

TEST(Encode, KnownString)
{
    const auto spec = build_space(1, {"op_a", "op_b"}, 2);
    const Architecture a{{0, 1, 1, 0}};
    EXPECT_EQ(encode(spec, a), "cell0/e(-1,1)=op_a;cell0/e(0,1)=op_b;cell1/e(-1,1)=op_b;cell1/e(0,1)=op_a");
}

TEST(Encode, RoundTripProperty)
{
    Rng rng = make_rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = 1 + trial % 5;
        const auto spec = build_space(m, ddptest::op_names(2 + trial % 7), 1 + trial % 2);
        const auto a = ddptest::random_architecture(spec, rng);
        const auto text = encode(spec, a);
        EXPECT_EQ(decode(text, spec), a) << text;
    }
}

TEST(Encode, DistinctArchitecturesDistinctStrings)
{
    const auto spec = build_space(2, {"a", "b", "c"}, 1);
    Rng rng = make_rng(5);
    for (int i = 0; i < 500; ++i) {
        const auto a = ddptest::random_architecture(spec, rng);
        const auto b = ddptest::random_architecture(spec, rng);
        EXPECT_EQ(a == b, encode(spec, a) == encode(spec, b));
    }
}

TEST(Decode, Errors)
{
    const auto spec = build_space(1, {"op_a", "op_b"}, 1);
    EXPECT_THROW(decode("cell0/e(-1,1)=op_a;cell0/e(0,1)=op_c", spec), ConfigError);
    EXPECT_THROW(decode("cell0/e(-1,1)=op_a", spec), ConfigError);
    EXPECT_THROW(decode("cell0/e(-1,1)=op_a;cell0/e(-1,1)=op_b", spec), ConfigError);
    EXPECT_THROW(decode("cell0/e(-1,2)=op_a;cell0/e(0,1)=op_b", spec), ConfigError);
    EXPECT_THROW(decode("cell1/e(-1,1)=op_a;cell0/e(0,1)=op_b", spec), ConfigError);
    EXPECT_THROW(decode("garbage", spec), ConfigError);
    EXPECT_THROW(decode("", spec), ConfigError);
}

TEST(Validate, RejectsWrongShapes)
{
    const auto spec = build_space(1, {"a", "b"}, 1);
    EXPECT_THROW(spec.validate(Architecture{{0}}), Error);
    EXPECT_THROW(spec.validate(Architecture{{0, 2}}), Error);
    EXPECT_NO_THROW(spec.validate(Architecture{{0, 1}}));
}

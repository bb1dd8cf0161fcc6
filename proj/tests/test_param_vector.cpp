#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"
#include "test_support.hpp"

using namespace fedsim;
using namespace fedsim::test;

TEST_CASE("layout bookkeeping") {
    auto layout = two_segment_layout(3, 2);
    CHECK(layout->total_len() == 5);
    CHECK(layout->offset_of("feature_extractor") == 0);
    CHECK(layout->offset_of("classifier") == 3);
    CHECK(layout->has("classifier"));
    CHECK_FALSE(layout->has("head"));
    CHECK_THROWS_AS(layout->segment("head"), UsageError);

    CHECK_THROWS_AS(ParamLayout({{"a", 2, SegmentRole::classifier},
                                 {"a", 3, SegmentRole::classifier}}),
                    UsageError);
    CHECK_THROWS_AS(ParamLayout({{"a", 2, SegmentRole::feature_extractor}}), UsageError);
}

TEST_CASE("axpy basics") {
    auto layout = single_segment_layout(2);
    const auto x12 = vec(layout, {1, 2});
    const auto y34 = vec(layout, {3, 4});
    const auto zero = vec(layout, {0, 0});
    const auto five = vec(layout, {5, 5});

    CHECK(exactly_equal(axpy(0.0, x12, y34), y34));
    CHECK(exactly_equal(axpy(1.0, x12, zero), x12));
    CHECK(exactly_equal(axpy(-1.0, five, five), zero));

    auto other = vec(single_segment_layout(3), {1, 2, 3});
    CHECK_THROWS_AS(axpy(1.0, x12, other), UsageError);
}

TEST_CASE("weighted_mean basics") {
    auto layout = single_segment_layout(2);
    const std::vector<ParamVector> vs{vec(layout, {1, 3}), vec(layout, {3, 5})};

    auto m = weighted_mean(vs, {1, 1});
    CHECK(m.values[0] == doctest::Approx(2).epsilon(1e-15));
    CHECK(m.values[1] == doctest::Approx(4).epsilon(1e-15));

    m = weighted_mean(vs, {1, 3});
    CHECK(m.values[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(m.values[1] == doctest::Approx(4.5).epsilon(1e-15));

    const std::vector<ParamVector> one{vec(layout, {7, -2})};
    CHECK(exactly_equal(weighted_mean(one, {0.3}), one[0]));

    CHECK_THROWS_AS(weighted_mean(std::vector<ParamVector>{}, {}), UsageError);
    CHECK_THROWS_AS(weighted_mean(vs, {1, -1}), UsageError);
    CHECK_THROWS_AS(weighted_mean(vs, {0, 0}), UsageError);
}

TEST_CASE("masked_blend basics") {
    auto layout = two_segment_layout(2, 1);
    const auto base = vec(layout, {1, 1, 1});
    const auto overlay = vec(layout, {9, 9, 9});

    CHECK(exactly_equal(masked_blend(base, overlay, SegmentMask::all_of(*layout)), overlay));
    CHECK(exactly_equal(masked_blend(base, overlay, SegmentMask::none()), base));

    const auto blended = masked_blend(base, overlay, SegmentMask::of({"classifier"}));
    CHECK(blended.values == std::vector<double>{1, 1, 9});

    CHECK_THROWS_AS(masked_blend(base, overlay, SegmentMask::of({"nope"})), UsageError);
}

TEST_CASE("weighted_mean properties") {
    auto layout = two_segment_layout(3, 2);
    Rng rng(42);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> wgt(0.01, 4.0);

    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng() % 6);
        std::vector<ParamVector> vs;
        std::vector<double> ws;
        for (std::size_t i = 0; i < k; ++i) {
            ParamVector v = ParamVector::zeros(layout);
            for (auto& x : v.values) x = val(rng);
            vs.push_back(std::move(v));
            ws.push_back(wgt(rng));
        }
        const auto base = weighted_mean(vs, ws);

        // Power-of-two rescaling keeps normalized weights bit-identical.
        std::vector<double> scaled = ws;
        for (auto& w : scaled) w *= 1024.0;
        CHECK(exactly_equal(weighted_mean(vs, scaled), base));

        // Arbitrary positive rescaling stays within tight relative tolerance.
        const double c = wgt(rng);
        scaled = ws;
        for (auto& w : scaled) w *= c;
        CHECK(all_close(weighted_mean(vs, scaled), base, 1e-12, 1e-15));

        // k copies of one vector average to that vector.
        std::vector<ParamVector> copies(k, vs[0]);
        CHECK(all_close(weighted_mean(copies, ws), vs[0], 1e-12, 1e-15));

        // Blending a vector with itself is the identity for any mask.
        const auto mask = (trial % 3 == 0)   ? SegmentMask::none()
                          : (trial % 3 == 1) ? SegmentMask::of({"classifier"})
                                             : SegmentMask::all_of(*layout);
        CHECK(exactly_equal(masked_blend(vs[0], vs[0], mask), vs[0]));
    }
}

TEST_CASE("binary serialization round-trips losslessly") {
    auto layout = two_segment_layout(4, 3);
    Rng rng(7);
    std::normal_distribution<double> val(0.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        ParamVector v = ParamVector::zeros(layout);
        for (auto& x : v.values) x = val(rng);

        std::stringstream ss;
        write_param_vector(ss, v);
        const auto back = read_param_vector(ss);
        CHECK(exactly_equal(back, v));
        CHECK(*back.layout == *layout);
    }
}

TEST_CASE("finiteness guard") {
    auto layout = single_segment_layout(2);
    const auto big = vec(layout, {1e308, 1e308});
    CHECK_THROWS_AS(axpy(10.0, big, big), NumericError);
}

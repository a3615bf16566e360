#include "doctest.h"
#include "eegdm/augment.hpp"
#include "test_util.hpp"

using namespace eegdm;

TEST_CASE("zero mask zeroes a contiguous seed-determined stretch") {
    Sample s = test::random_sample(3, 200, 42);
    AugmentSpec spec;
    spec.kind = AugmentKind::ZeroMask;
    spec.mask_fraction = 0.25;
    spec.seed = 5;
    Sample out = apply(s, spec);
    REQUIRE(out.data.rows() == 3);
    REQUIRE(out.data.cols() == 200);
    for (int c = 0; c < 3; ++c) {
        int zeros = 0, first = -1, last = -1;
        for (int t = 0; t < 200; ++t) {
            if (out.data(c, t) == 0.0f) {
                ++zeros;
                if (first < 0) first = t;
                last = t;
            } else {
                CHECK(out.data(c, t) == s.data(c, t));
            }
        }
        CHECK(zeros == 50);
        CHECK(last - first + 1 == 50);  // contiguous
    }
    // determinism
    Sample again = apply(s, spec);
    CHECK(again.data == out.data);
}

TEST_CASE("zero mask with fraction 0 is the identity") {
    Sample s = test::random_sample(2, 64, 1);
    AugmentSpec spec;
    spec.kind = AugmentKind::ZeroMask;
    spec.mask_fraction = 0.0;
    CHECK(apply(s, spec).data == s.data);
}

TEST_CASE("amplitude scale with unit range is the identity") {
    Sample s = test::random_sample(2, 64, 2);
    AugmentSpec spec;
    spec.kind = AugmentKind::AmplitudeScale;
    spec.scale_low = 1.0;
    spec.scale_high = 1.0;
    CHECK(apply(s, spec).data == s.data);
}

TEST_CASE("amplitude scale multiplies each channel by one in-range draw") {
    Sample s = test::random_sample(2, 64, 3);
    AugmentSpec spec;
    spec.kind = AugmentKind::AmplitudeScale;
    spec.scale_low = 0.5;
    spec.scale_high = 2.0;
    spec.seed = 7;
    Sample out = apply(s, spec);
    for (int c = 0; c < 2; ++c) {
        float factor = out.data(c, 0) / s.data(c, 0);
        CHECK(factor >= 0.5f);
        CHECK(factor <= 2.0f);
        for (int t = 0; t < 64; ++t)
            CHECK(out.data(c, t) == doctest::Approx(s.data(c, t) * factor).epsilon(1e-6));
    }
}

TEST_CASE("augment parameter validation") {
    Sample s = test::random_sample(1, 32, 4);
    AugmentSpec bad_mask;
    bad_mask.kind = AugmentKind::ZeroMask;
    bad_mask.mask_fraction = 1.0;
    CHECK_THROWS_AS(apply(s, bad_mask), ConfigError);

    AugmentSpec bad_scale;
    bad_scale.kind = AugmentKind::AmplitudeScale;
    bad_scale.scale_low = 0.0;
    CHECK_THROWS_AS(apply(s, bad_scale), ConfigError);
}

TEST_CASE("make_views keeps the original first") {
    Sample s = test::random_sample(2, 64, 5);
    AugmentSpec identity;
    ViewSet vs = make_views(s, {identity});
    CHECK(vs.count() == 2);
    CHECK(vs.views[0].data == s.data);
    CHECK(vs.views[1].data == s.data);

    AugmentSpec mask;
    mask.kind = AugmentKind::ZeroMask;
    mask.mask_fraction = 0.1;
    AugmentSpec scale;
    scale.kind = AugmentKind::AmplitudeScale;
    ViewSet three = make_views(s, {mask, scale});
    CHECK(three.count() == 3);

    CHECK_THROWS_AS(make_views(s, {}), ConfigError);

    ViewSet a = make_views(s, {mask, scale});
    CHECK(a.views[1].data == three.views[1].data);
    CHECK(a.views[2].data == three.views[2].data);
}

TEST_CASE("augmentations never change shape or introduce non-finite values") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Sample s = test::random_sample(rng.uniform_int(1, 4), rng.uniform_int(8, 128), trial);
        AugmentSpec spec;
        int kind = rng.uniform_int(0, 2);
        spec.kind = kind == 0   ? AugmentKind::Identity
                    : kind == 1 ? AugmentKind::ZeroMask
                                : AugmentKind::AmplitudeScale;
        spec.mask_fraction = rng.uniform(0.0, 0.99);
        spec.scale_low = rng.uniform(0.1, 1.0);
        spec.scale_high = spec.scale_low + rng.uniform(0.0, 2.0);
        spec.seed = trial;
        Sample out = apply(s, spec);
        CHECK(out.data.rows() == s.data.rows());
        CHECK(out.data.cols() == s.data.cols());
        CHECK(all_finite(out.data));
    }
}

TEST_CASE("scaling and masking commute when both use the same seeds") {
    Sample s = test::random_sample(3, 100, 6);
    AugmentSpec mask;
    mask.kind = AugmentKind::ZeroMask;
    mask.mask_fraction = 0.3;
    mask.seed = 11;
    AugmentSpec scale;
    scale.kind = AugmentKind::AmplitudeScale;
    scale.scale_low = 0.5;
    scale.scale_high = 2.0;
    scale.seed = 12;
    Sample a = apply(apply(s, mask), scale);
    Sample b = apply(apply(s, scale), mask);
    CHECK(a.data == b.data);
}

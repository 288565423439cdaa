#include <gtest/gtest.h>

#include "ctl/labels.hpp"
#include "ctl/rng.hpp"

using namespace ctl;

namespace {

StrongLabel mask_from_rows(const std::vector<std::vector<int>>& rows) {
    StrongLabel mask(static_cast<int>(rows.size()),
                     rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (int t = 0; t < mask.frames; ++t)
        for (int c = 0; c < mask.classes; ++c) mask.set(t, c, rows[t][c] != 0);
    return mask;
}

}  // namespace

TEST(EventVocabulary, SizesAndValidation) {
    EventVocabulary vocab({"car", "dog"});
    EXPECT_EQ(vocab.num_classes(), 2);
    EXPECT_EQ(vocab.num_boundary_labels(), 4);
    EXPECT_EQ(vocab.num_ctc_symbols(), 5);
    EXPECT_EQ(vocab.blank_symbol(), 4);
    EXPECT_THROW(EventVocabulary({"a", "a"}), std::invalid_argument);
    EXPECT_THROW(EventVocabulary({""}), std::invalid_argument);
}

TEST(BoundaryLabel, IndexRoundTrip) {
    for (int i = 0; i < 6; ++i) EXPECT_EQ(boundary_index(boundary_from_index(i)), i);
    EXPECT_EQ(boundary_index(onset(2)), 4);
    EXPECT_EQ(boundary_index(offset(2)), 5);
}

TEST(StrongToSequential, NestedCarDog) {
    // car active frames 1-4, dog active frames 2-3 (1-based).
    const StrongLabel mask = mask_from_rows({{1, 0}, {1, 1}, {1, 1}, {1, 0}});
    const SequentialLabel seq = strong_to_sequential(mask);
    const SequentialLabel expected = {onset(0), onset(1), offset(1), offset(0)};
    EXPECT_EQ(seq, expected);
}

TEST(StrongToSequential, AllZero) {
    const StrongLabel mask(4, 2);
    EXPECT_TRUE(strong_to_sequential(mask).empty());
}

TEST(StrongToSequential, SingleRun) {
    const StrongLabel mask = mask_from_rows({{0}, {1}, {0}});
    const SequentialLabel expected = {onset(0), offset(0)};
    EXPECT_EQ(strong_to_sequential(mask), expected);
}

TEST(StrongToSequential, OffsetBeforeOnsetOnTies) {
    // class 0 ends exactly where class 1 begins: both boundaries at frame 3.
    const StrongLabel mask = mask_from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    const SequentialLabel expected = {onset(0), offset(0), onset(1), offset(1)};
    EXPECT_EQ(strong_to_sequential(mask), expected);
}

TEST(StrongToSequential, ClassIndexBreaksRemainingTies) {
    const StrongLabel mask = mask_from_rows({{1, 1}, {1, 1}});
    const SequentialLabel expected = {onset(0), onset(1), offset(0), offset(1)};
    EXPECT_EQ(strong_to_sequential(mask), expected);
}

TEST(StrongToSequential, OutputAlwaysAlternates) {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const int frames = rng.uniform_int(1, 12);
        const int classes = rng.uniform_int(1, 3);
        StrongLabel mask(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) mask.set(t, c, rng.uniform() < 0.5);
        EXPECT_TRUE(is_valid_sequential(strong_to_sequential(mask), classes));
    }
}

TEST(IsValidSequential, RejectsBrokenSequences) {
    EXPECT_TRUE(is_valid_sequential({}, 1));
    EXPECT_FALSE(is_valid_sequential({offset(0)}, 1));                       // offset first
    EXPECT_FALSE(is_valid_sequential({onset(0), onset(0)}, 1));              // double onset
    EXPECT_FALSE(is_valid_sequential({onset(0)}, 1));                        // unclosed
    EXPECT_TRUE(is_valid_sequential({onset(0), onset(1), offset(1), offset(0)}, 2));
    EXPECT_FALSE(is_valid_sequential({onset(0), offset(0)}, 0));             // out of range
}

TEST(StrongToPresence, Examples) {
    EXPECT_EQ(strong_to_presence(StrongLabel(3, 2)).present, (std::vector<uint8_t>{0, 0}));
    const StrongLabel one = mask_from_rows({{0, 0}, {1, 0}});
    EXPECT_EQ(strong_to_presence(one).present, (std::vector<uint8_t>{1, 0}));
    const StrongLabel cardog = mask_from_rows({{1, 0}, {1, 1}, {1, 1}, {1, 0}});
    EXPECT_EQ(strong_to_presence(cardog).present, (std::vector<uint8_t>{1, 1}));
}

TEST(CollapseCtc, PaperAlignments) {
    // vocabulary {car, dog}: onsets 0/2, offsets 1/3, blank 4.
    const int blank = 4;
    const SequentialLabel expected = {onset(0), onset(1), offset(1), offset(0)};
    EXPECT_EQ(collapse_ctc({blank, 0, 2, 3, 1, blank}, blank), expected);
    EXPECT_EQ(collapse_ctc({0, blank, 2, 3, 1, 1}, blank), expected);
    EXPECT_TRUE(collapse_ctc({blank, blank, blank}, blank).empty());
}

TEST(CollapseCtc, RepeatsSeparatedByBlankSurvive) {
    const int blank = 2;
    const SequentialLabel expected = {onset(0), onset(0)};
    EXPECT_EQ(collapse_ctc({0, blank, 0}, blank), expected);
}

TEST(CollapseCtc, IdempotentOnBlankFreeRepeatFreeSequences) {
    Rng rng(7);
    const int blank = 4;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> alignment;
        int prev = -1;
        for (int i = 0; i < rng.uniform_int(0, 10); ++i) {
            int sym = rng.uniform_int(0, 3);
            if (sym == prev) sym = (sym + 1) % 4;
            alignment.push_back(sym);
            prev = sym;
        }
        const SequentialLabel once = collapse_ctc(alignment, blank);
        std::vector<int> as_alignment;
        for (const auto& l : once) as_alignment.push_back(boundary_index(l));
        EXPECT_EQ(collapse_ctc(as_alignment, blank), once);
        EXPECT_EQ(once.size(), alignment.size());  // nothing collapsed
    }
}

TEST(FlattenCtl, ConcatenatesWithoutCollapsing) {
    const SequentialLabel a = flatten_ctl({{onset(0)}, {}, {offset(0)}});
    EXPECT_EQ(a, (SequentialLabel{onset(0), offset(0)}));

    const SequentialLabel b = flatten_ctl({{onset(0)}, {onset(0), offset(0)}, {offset(0)}});
    EXPECT_EQ(b, (SequentialLabel{onset(0), onset(0), offset(0), offset(0)}));

    EXPECT_TRUE(flatten_ctl({{}, {}, {}}).empty());
}

TEST(FlattenCtl, LengthEqualsTotalEmissions) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<BoundaryLabel>> emissions(rng.uniform_int(0, 6));
        size_t total = 0;
        for (auto& frame : emissions) {
            const int k = rng.uniform_int(0, 3);
            for (int i = 0; i < k; ++i) frame.push_back(boundary_from_index(rng.uniform_int(0, 3)));
            total += k;
        }
        EXPECT_EQ(flatten_ctl(emissions).size(), total);
    }
}

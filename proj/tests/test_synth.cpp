#include <gtest/gtest.h>

#include <filesystem>

#include "ctl/io.hpp"
#include "ctl/synth.hpp"

using namespace ctl;

namespace {

SynthConfig small_config(uint64_t seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.num_train = 30;
    cfg.num_validation = 10;
    cfg.num_evaluation = 10;
    cfg.frames = 40;
    cfg.feature_dim = 5;
    cfg.feature_noise_sigma = 0.2;
    cfg.classes = {{"blip", 2, 5, 1.0}, {"hum", 10, 18, 0.7}};
    return cfg;
}

void expect_recordings_equal(const Recording& a, const Recording& b) {
    EXPECT_EQ(a.id, b.id);
    EXPECT_TRUE(a.features == b.features);
    EXPECT_TRUE(a.strong == b.strong);
    EXPECT_EQ(a.sequential, b.sequential);
    EXPECT_EQ(a.presence, b.presence);
}

}  // namespace

TEST(SynthConfig, ValidationNamesTheField) {
    SynthConfig cfg = small_config(1);
    cfg.classes[1].min_dur = 25;
    cfg.classes[1].max_dur = 20;
    try {
        cfg.validate();
        FAIL() << "expected invalid_argument";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("classes[1].min_dur"), std::string::npos);
    }
    cfg = small_config(1);
    cfg.classes[0].max_dur = 100;  // exceeds frames=40
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = small_config(1);
    cfg.feature_noise_sigma = -1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SynthConfig, JsonRoundTrip) {
    const SynthConfig cfg = small_config(42);
    const SynthConfig back = synth_config_from_json(synth_config_to_json(cfg));
    EXPECT_EQ(back.seed, cfg.seed);
    EXPECT_EQ(back.num_train, cfg.num_train);
    EXPECT_EQ(back.frames, cfg.frames);
    EXPECT_EQ(back.classes.size(), cfg.classes.size());
    EXPECT_EQ(back.classes[1].name, "hum");
    EXPECT_EQ(back.classes[1].max_dur, 18);
    EXPECT_DOUBLE_EQ(back.feature_noise_sigma, cfg.feature_noise_sigma);
}

TEST(Generate, DeterministicGivenSeed) {
    const Corpus a = generate(small_config(9));
    const Corpus b = generate(small_config(9));
    ASSERT_EQ(a.train.size(), b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) expect_recordings_equal(a.train[i], b.train[i]);
    for (size_t i = 0; i < a.validation.size(); ++i)
        expect_recordings_equal(a.validation[i], b.validation[i]);

    const Corpus c = generate(small_config(10));
    bool any_difference = false;
    for (size_t i = 0; i < a.train.size() && !any_difference; ++i)
        any_difference = !(a.train[i].features == c.train[i].features);
    EXPECT_TRUE(any_difference);
}

TEST(Generate, ZeroRateMeansSilence) {
    SynthConfig cfg = small_config(2);
    for (auto& spec : cfg.classes) spec.rate = 0.0;
    const Corpus corpus = generate(cfg);
    for (const auto& rec : corpus.train) {
        EXPECT_TRUE(rec.sequential.empty());
        for (int t = 0; t < rec.strong.frames; ++t)
            for (int c = 0; c < rec.strong.classes; ++c) EXPECT_FALSE(rec.strong.at(t, c));
    }
}

TEST(Generate, NoiselessFeaturesEqualSignatureSums) {
    SynthConfig cfg = small_config(3);
    cfg.feature_noise_sigma = 0.0;
    const Corpus corpus = generate(cfg);
    // Active frames carry the exact per-class signature sum; silent frames
    // are exactly zero. Signatures are recoverable from single-class frames.
    for (const auto& rec : corpus.train) {
        for (int t = 0; t < rec.strong.frames; ++t) {
            bool any = false;
            for (int c = 0; c < rec.strong.classes; ++c) any = any || rec.strong.at(t, c);
            if (!any) {
                for (int d = 0; d < corpus.feature_dim; ++d)
                    EXPECT_DOUBLE_EQ(rec.features(t, d), 0.0);
            }
        }
    }
    // Frames with identical activity patterns have identical features.
    const auto& rec = corpus.train[0];
    for (int t1 = 0; t1 < rec.strong.frames; ++t1)
        for (int t2 = t1 + 1; t2 < rec.strong.frames; ++t2) {
            bool same = true;
            for (int c = 0; c < rec.strong.classes; ++c)
                same = same && rec.strong.at(t1, c) == rec.strong.at(t2, c);
            if (same) {
                for (int d = 0; d < corpus.feature_dim; ++d)
                    EXPECT_DOUBLE_EQ(rec.features(t1, d), rec.features(t2, d));
            }
        }
}

TEST(Generate, DurationsWithinBounds) {
    const SynthConfig cfg = small_config(4);
    const Corpus corpus = generate(cfg);
    auto check_split = [&](const std::vector<Recording>& recs) {
        for (const auto& rec : recs) {
            for (int c = 0; c < rec.strong.classes; ++c) {
                int run = 0;
                for (int t = 0; t <= rec.strong.frames; ++t) {
                    const bool active = t < rec.strong.frames && rec.strong.at(t, c);
                    if (active) {
                        ++run;
                    } else if (run > 0) {
                        EXPECT_GE(run, cfg.classes[c].min_dur);
                        EXPECT_LE(run, cfg.classes[c].max_dur);
                        run = 0;
                    }
                }
            }
        }
    };
    check_split(corpus.train);
    check_split(corpus.validation);
    check_split(corpus.evaluation);
}

TEST(Generate, LabelConsistencyInvariant) {
    const Corpus corpus = generate(small_config(5));
    for (const auto& rec : corpus.train) {
        EXPECT_EQ(rec.sequential, strong_to_sequential(rec.strong));
        EXPECT_EQ(rec.presence, strong_to_presence(rec.strong));
        EXPECT_TRUE(is_valid_sequential(rec.sequential, rec.strong.classes));
    }
}

TEST(Generate, OverlapControl) {
    SynthConfig cfg = small_config(6);
    cfg.overlap_allowed = false;
    const Corpus corpus = generate(cfg);
    for (const auto& rec : corpus.train)
        for (int t = 0; t < rec.strong.frames; ++t) {
            int active = 0;
            for (int c = 0; c < rec.strong.classes; ++c) active += rec.strong.at(t, c) ? 1 : 0;
            EXPECT_LE(active, 1);
        }
}

TEST(CorpusIo, SaveLoadRoundTrip) {
    const SynthConfig cfg = small_config(7);
    const Corpus corpus = generate(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "ctl_test_corpus";
    std::filesystem::remove_all(dir);
    save_corpus(corpus, dir, synth_config_to_json(cfg));

    Json manifest;
    const Corpus loaded = load_corpus(dir, &manifest);
    EXPECT_EQ(loaded.vocab.classes, corpus.vocab.classes);
    EXPECT_EQ(loaded.frames, corpus.frames);
    EXPECT_EQ(loaded.feature_dim, corpus.feature_dim);
    ASSERT_EQ(loaded.train.size(), corpus.train.size());
    ASSERT_EQ(loaded.evaluation.size(), corpus.evaluation.size());
    for (size_t i = 0; i < corpus.train.size(); ++i)
        expect_recordings_equal(loaded.train[i], corpus.train[i]);
    for (size_t i = 0; i < corpus.evaluation.size(); ++i)
        expect_recordings_equal(loaded.evaluation[i], corpus.evaluation[i]);
    EXPECT_EQ(manifest.at("config").at("seed").get<uint64_t>(), cfg.seed);
    std::filesystem::remove_all(dir);
}

TEST(CorpusIo, SaveIsByteDeterministic) {
    const SynthConfig cfg = small_config(8);
    const auto dir_a = std::filesystem::temp_directory_path() / "ctl_corpus_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "ctl_corpus_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    save_corpus(generate(cfg), dir_a, synth_config_to_json(cfg));
    save_corpus(generate(cfg), dir_b, synth_config_to_json(cfg));
    for (const char* name : {"manifest.json", "train.bin", "validation.bin", "evaluation.bin"}) {
        EXPECT_EQ(read_file(dir_a / name), read_file(dir_b / name)) << name;
    }
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctl/dataset.hpp"
#include "ctl/io.hpp"
#include "ctl/labels.hpp"
#include "ctl/matrix.hpp"
#include "ctl/rng.hpp"

namespace ctl {

using Json = nlohmann::json;

struct ClassSpec {
    std::string name;
    int min_dur = 1;
    int max_dur = 1;
    double rate = 1.0;  // expected event count per recording (Poisson)
};

struct SynthConfig {
    uint64_t seed = 1;
    int num_train = 2000;
    int num_validation = 300;
    int num_evaluation = 300;
    int frames = 100;
    int feature_dim = 8;
    double feature_noise_sigma = 0.15;
    // Pairwise cosine similarity between class signatures: 0 makes classes
    // orthogonal (trivially separable per frame), values near 1 make them
    // confusable per frame so temporal structure has to disambiguate.
    double signature_cos = 0.85;
    bool overlap_allowed = true;
    std::vector<ClassSpec> classes = {{"short", 3, 8, 0.7}, {"long", 30, 60, 0.6}};

    void validate() const {
        if (num_train < 0 || num_validation < 0 || num_evaluation < 0)
            throw std::invalid_argument("SynthConfig: negative split size");
        if (frames < 1) throw std::invalid_argument("SynthConfig: frames < 1");
        if (feature_dim < 1) throw std::invalid_argument("SynthConfig: feature_dim < 1");
        if (feature_noise_sigma < 0)
            throw std::invalid_argument("SynthConfig: feature_noise_sigma < 0");
        if (!(signature_cos >= 0.0 && signature_cos < 1.0))
            throw std::invalid_argument("SynthConfig: signature_cos outside [0, 1)");
        if (classes.empty()) throw std::invalid_argument("SynthConfig: classes is empty");
        if (feature_dim < static_cast<int>(classes.size()) + 1)
            throw std::invalid_argument("SynthConfig: feature_dim must exceed the class count");
        for (size_t c = 0; c < classes.size(); ++c) {
            const auto& spec = classes[c];
            const std::string where = "classes[" + std::to_string(c) + "]";
            if (spec.name.empty()) throw std::invalid_argument(where + ".name is empty");
            if (spec.min_dur < 1) throw std::invalid_argument(where + ".min_dur < 1");
            if (spec.min_dur > spec.max_dur)
                throw std::invalid_argument(where + ".min_dur > " + where + ".max_dur");
            if (spec.max_dur > frames)
                throw std::invalid_argument(where + ".max_dur exceeds frames");
            if (spec.rate < 0) throw std::invalid_argument(where + ".rate < 0");
        }
    }

    EventVocabulary vocabulary() const {
        std::vector<std::string> names;
        for (const auto& c : classes) names.push_back(c.name);
        return EventVocabulary(names);
    }
};

inline Json synth_config_to_json(const SynthConfig& cfg) {
    Json classes = Json::array();
    for (const auto& c : cfg.classes)
        classes.push_back({{"name", c.name},
                           {"min_dur", c.min_dur},
                           {"max_dur", c.max_dur},
                           {"rate", c.rate}});
    return Json{{"seed", cfg.seed},
                {"num_train", cfg.num_train},
                {"num_validation", cfg.num_validation},
                {"num_evaluation", cfg.num_evaluation},
                {"frames", cfg.frames},
                {"feature_dim", cfg.feature_dim},
                {"feature_noise_sigma", cfg.feature_noise_sigma},
                {"signature_cos", cfg.signature_cos},
                {"overlap_allowed", cfg.overlap_allowed},
                {"classes", classes}};
}

inline SynthConfig synth_config_from_json(const Json& j) {
    SynthConfig cfg;
    const SynthConfig defaults;
    cfg.seed = j.value("seed", defaults.seed);
    cfg.num_train = j.value("num_train", defaults.num_train);
    cfg.num_validation = j.value("num_validation", defaults.num_validation);
    cfg.num_evaluation = j.value("num_evaluation", defaults.num_evaluation);
    cfg.frames = j.value("frames", defaults.frames);
    cfg.feature_dim = j.value("feature_dim", defaults.feature_dim);
    cfg.feature_noise_sigma = j.value("feature_noise_sigma", defaults.feature_noise_sigma);
    cfg.signature_cos = j.value("signature_cos", defaults.signature_cos);
    cfg.overlap_allowed = j.value("overlap_allowed", defaults.overlap_allowed);
    if (j.contains("classes")) {
        cfg.classes.clear();
        for (const auto& jc : j.at("classes")) {
            ClassSpec spec;
            spec.name = jc.value("name", std::string());
            spec.min_dur = jc.value("min_dur", 1);
            spec.max_dur = jc.value("max_dur", 1);
            spec.rate = jc.value("rate", 1.0);
            cfg.classes.push_back(spec);
        }
    }
    cfg.validate();
    return cfg;
}

struct GenerateStats {
    long long regenerated = 0;  // recordings re-drawn after placement failures
};

namespace detail {

// Per-class feature signatures: fixed unit vectors derived from the master
// seed, shared by every split. Each signature is sqrt(rho) * u +
// sqrt(1 - rho) * v_c with u, v_0, v_1, ... orthonormal, so any two class
// signatures have cosine similarity rho = signature_cos.
inline std::vector<std::vector<double>> feature_signatures(const SynthConfig& cfg) {
    Rng rng(mix_seed(cfg.seed, 0x5349474E));  // signature stream
    const int n = static_cast<int>(cfg.classes.size());
    const int dim = cfg.feature_dim;
    std::vector<std::vector<double>> basis;  // u followed by v_0..v_{n-1}
    for (int k = 0; k < n + 1; ++k) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        for (const auto& b : basis) {
            double dot = 0.0;
            for (int d = 0; d < dim; ++d) dot += v[d] * b[d];
            for (int d = 0; d < dim; ++d) v[d] -= dot * b[d];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw std::runtime_error("synth: degenerate signature basis");
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    const double shared = std::sqrt(cfg.signature_cos);
    const double distinct = std::sqrt(1.0 - cfg.signature_cos);
    std::vector<std::vector<double>> sigs;
    for (int c = 0; c < n; ++c) {
        std::vector<double> s(dim);
        for (int d = 0; d < dim; ++d) s[d] = shared * basis[0][d] + distinct * basis[c + 1][d];
        sigs.push_back(std::move(s));
    }
    return sigs;
}

// Events of one class never touch each other (adjacent same-class runs would
// merge into one longer run and break the duration bounds); events of
// different classes may overlap iff overlap_allowed.
inline bool try_place_events(const SynthConfig& cfg, Rng& rng, StrongLabel& mask) {
    const int frames = cfg.frames;
    for (int c = 0; c < static_cast<int>(cfg.classes.size()); ++c) {
        const auto& spec = cfg.classes[c];
        if (spec.rate <= 0.0) continue;
        const int count = rng.poisson(spec.rate);
        for (int e = 0; e < count; ++e) {
            const int dur = rng.uniform_int(spec.min_dur, spec.max_dur);
            bool placed = false;
            for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
                const int start = rng.uniform_int(0, frames - dur);
                bool free = true;
                for (int t = std::max(0, start - 1); t < std::min(frames, start + dur + 1) && free;
                     ++t)
                    if (mask.at(t, c)) free = false;
                if (free && !cfg.overlap_allowed) {
                    for (int t = start; t < start + dur && free; ++t)
                        for (int o = 0; o < static_cast<int>(cfg.classes.size()) && free; ++o)
                            if (o != c && mask.at(t, o)) free = false;
                }
                if (!free) continue;
                for (int t = start; t < start + dur; ++t) mask.set(t, c, true);
                placed = true;
            }
            if (!placed) return false;
        }
    }
    return true;
}

inline Recording make_recording(const SynthConfig& cfg,
                                const std::vector<std::vector<double>>& sigs,
                                const std::string& id, uint64_t rec_seed,
                                GenerateStats* stats) {
    Rng rng(rec_seed);
    const int classes = static_cast<int>(cfg.classes.size());
    StrongLabel mask(cfg.frames, classes);
    for (int attempt = 0;; ++attempt) {
        mask = StrongLabel(cfg.frames, classes);
        if (try_place_events(cfg, rng, mask)) break;
        if (stats) ++stats->regenerated;
        if (attempt >= 20)
            throw std::runtime_error("synth: could not place events for " + id +
                                     "; rates/durations leave no room");
    }

    Matrix features(cfg.frames, cfg.feature_dim);
    for (int t = 0; t < cfg.frames; ++t) {
        for (int d = 0; d < cfg.feature_dim; ++d) {
            double v = 0.0;
            for (int c = 0; c < classes; ++c)
                if (mask.at(t, c)) v += sigs[c][d];
            if (cfg.feature_noise_sigma > 0.0) v += cfg.feature_noise_sigma * rng.normal();
            // Features are stored as 32-bit floats on disk; quantize now so
            // in-memory and reloaded corpora are identical.
            features(t, d) = static_cast<double>(static_cast<float>(v));
        }
    }

    Recording rec;
    rec.id = id;
    rec.features = std::move(features);
    rec.strong = std::move(mask);
    rec.sequential = strong_to_sequential(rec.strong);
    rec.presence = strong_to_presence(rec.strong);
    return rec;
}

}  // namespace detail

// Deterministic synthetic corpus: every recording is fully determined by the
// master seed, the split and its index within the split.
inline Corpus generate(const SynthConfig& cfg, GenerateStats* stats = nullptr) {
    cfg.validate();
    const auto sigs = detail::feature_signatures(cfg);
    Corpus corpus;
    corpus.vocab = cfg.vocabulary();
    corpus.frames = cfg.frames;
    corpus.feature_dim = cfg.feature_dim;
    const int counts[3] = {cfg.num_train, cfg.num_validation, cfg.num_evaluation};
    for (int s = 0; s < 3; ++s) {
        const uint64_t split_seed = mix_seed(cfg.seed, 100 + s);
        auto& split = s == 0 ? corpus.train : (s == 1 ? corpus.validation : corpus.evaluation);
        for (int i = 0; i < counts[s]; ++i) {
            char id[64];
            std::snprintf(id, sizeof(id), "%s-%05d", kSplitNames[s], i);
            split.push_back(
                detail::make_recording(cfg, sigs, id, mix_seed(split_seed, i), stats));
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Corpus persistence: manifest.json plus one container file per split that
// embeds the labels as JSON and the features as raw little-endian float32.

inline constexpr char kSplitMagic[] = "CTLSPLT1";
inline constexpr int kCorpusVersion = 1;

namespace detail {

inline Json strong_to_runs(const StrongLabel& strong) {
    Json per_class = Json::array();
    for (int c = 0; c < strong.classes; ++c) {
        Json runs = Json::array();
        int start = -1;
        for (int t = 0; t <= strong.frames; ++t) {
            const bool active = t < strong.frames && strong.at(t, c);
            if (active && start < 0) start = t;
            if (!active && start >= 0) {
                runs.push_back({start, t});
                start = -1;
            }
        }
        per_class.push_back(runs);
    }
    return per_class;
}

inline StrongLabel runs_to_strong(const Json& per_class, int frames) {
    StrongLabel strong(frames, static_cast<int>(per_class.size()));
    for (int c = 0; c < strong.classes; ++c)
        for (const auto& run : per_class.at(c))
            for (int t = run.at(0).get<int>(); t < run.at(1).get<int>(); ++t)
                strong.set(t, c, true);
    return strong;
}

inline std::string encode_split(const std::vector<Recording>& recs, int frames, int feature_dim) {
    Json header;
    header["recordings"] = Json::array();
    for (const auto& rec : recs)
        header["recordings"].push_back({{"id", rec.id}, {"events", strong_to_runs(rec.strong)}});
    const std::string header_bytes = header.dump();
    std::string out(kSplitMagic, 8);
    append_u64(out, header_bytes.size());
    out += header_bytes;
    out.reserve(out.size() + recs.size() * static_cast<size_t>(frames) * feature_dim * 4);
    for (const auto& rec : recs)
        for (int t = 0; t < frames; ++t)
            for (int d = 0; d < feature_dim; ++d)
                append_f32(out, static_cast<float>(rec.features(t, d)));
    return out;
}

inline std::vector<Recording> decode_split(const std::string& bytes, int frames,
                                           int feature_dim) {
    ByteReader reader(bytes);
    if (reader.read_bytes(8) != std::string(kSplitMagic, 8))
        throw std::runtime_error("corpus split file: bad magic");
    const uint64_t header_len = reader.read_u64();
    const Json header = Json::parse(reader.read_bytes(header_len));
    std::vector<Recording> recs;
    for (const auto& jr : header.at("recordings")) {
        Recording rec;
        rec.id = jr.at("id").get<std::string>();
        rec.strong = runs_to_strong(jr.at("events"), frames);
        rec.sequential = strong_to_sequential(rec.strong);
        rec.presence = strong_to_presence(rec.strong);
        rec.features = Matrix(frames, feature_dim);
        recs.push_back(std::move(rec));
    }
    for (auto& rec : recs)
        for (int t = 0; t < frames; ++t)
            for (int d = 0; d < feature_dim; ++d)
                rec.features(t, d) = static_cast<double>(reader.read_f32());
    if (reader.remaining() != 0) throw std::runtime_error("corpus split file: trailing bytes");
    return recs;
}

}  // namespace detail

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                        const Json& config_json) {
    std::filesystem::create_directories(dir);
    Json manifest;
    manifest["format"] = "ctl-corpus";
    manifest["version"] = kCorpusVersion;
    manifest["config"] = config_json;
    manifest["classes"] = corpus.vocab.classes;
    manifest["frames"] = corpus.frames;
    manifest["feature_dim"] = corpus.feature_dim;
    Json splits;
    for (const char* name : kSplitNames) {
        const auto& recs = corpus.split(name);
        const std::string file = std::string(name) + ".bin";
        splits[name] = {{"file", file}, {"count", recs.size()}};
        write_file_atomic(dir / file,
                          detail::encode_split(recs, corpus.frames, corpus.feature_dim));
    }
    manifest["splits"] = splits;
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Corpus load_corpus(const std::filesystem::path& dir, Json* manifest_out = nullptr) {
    const Json manifest = Json::parse(read_file(dir / "manifest.json"));
    if (manifest.value("format", std::string()) != "ctl-corpus")
        throw std::runtime_error("manifest.json: not a ctl-corpus manifest");
    if (manifest.value("version", 0) != kCorpusVersion)
        throw std::runtime_error("manifest.json: unsupported corpus version");
    Corpus corpus;
    corpus.vocab = EventVocabulary(manifest.at("classes").get<std::vector<std::string>>());
    corpus.frames = manifest.at("frames").get<int>();
    corpus.feature_dim = manifest.at("feature_dim").get<int>();
    for (const char* name : kSplitNames) {
        const auto& entry = manifest.at("splits").at(name);
        auto recs = detail::decode_split(read_file(dir / entry.at("file").get<std::string>()),
                                         corpus.frames, corpus.feature_dim);
        if (recs.size() != entry.at("count").get<size_t>())
            throw std::runtime_error(std::string("corpus split ") + name + ": count mismatch");
        if (name == std::string("train"))
            corpus.train = std::move(recs);
        else if (name == std::string("validation"))
            corpus.validation = std::move(recs);
        else
            corpus.evaluation = std::move(recs);
    }
    if (manifest_out) *manifest_out = manifest;
    return corpus;
}

}  // namespace ctl

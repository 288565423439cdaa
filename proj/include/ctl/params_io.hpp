#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctl/io.hpp"
#include "ctl/model.hpp"

namespace ctl {

// Trained parameters are stored as a versioned binary file: magic, version,
// a JSON header (predictor config, vocabulary, training metadata) and the
// parameter vector as little-endian float64.

inline constexpr char kParamsMagic[] = "CTLPARM1";
inline constexpr uint32_t kParamsVersion = 1;

struct SavedModel {
    PredictorConfig predictor;
    std::vector<std::string> classes;
    std::string loss;
    int best_checkpoint = 0;
    double best_val_f1 = 0.0;
    uint64_t train_seed = 0;
    std::vector<double> params;
};

inline void save_model(const SavedModel& model, const std::filesystem::path& path) {
    nlohmann::json header;
    header["classes"] = model.classes;
    header["predictor"] = {
        {"input_dim", model.predictor.input_dim},
        {"hidden_sizes", model.predictor.hidden_sizes},
        {"recurrent", model.predictor.recurrent},
        {"head", model.predictor.head == HeadKind::Sigmoid ? "sigmoid" : "softmax"},
        {"num_classes", model.predictor.num_classes},
        {"head_bias_init", model.predictor.head_bias_init},
        {"seed", model.predictor.seed}};
    header["train"] = {{"loss", model.loss},
                       {"seed", model.train_seed},
                       {"best_checkpoint", model.best_checkpoint},
                       {"best_val_f1", model.best_val_f1}};
    const std::string header_bytes = header.dump();

    std::string out(kParamsMagic, 8);
    append_u32(out, kParamsVersion);
    append_u64(out, header_bytes.size());
    out += header_bytes;
    append_u64(out, model.params.size());
    for (double v : model.params) append_f64(out, v);
    write_file_atomic(path, out);
}

inline SavedModel load_model(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    ByteReader reader(bytes);
    if (reader.read_bytes(8) != std::string(kParamsMagic, 8))
        throw std::runtime_error(path.string() + ": not a ctl parameter file");
    if (reader.read_u32() != kParamsVersion)
        throw std::runtime_error(path.string() + ": unsupported parameter file version");
    const nlohmann::json header = nlohmann::json::parse(reader.read_bytes(reader.read_u64()));

    SavedModel model;
    model.classes = header.at("classes").get<std::vector<std::string>>();
    const auto& jp = header.at("predictor");
    model.predictor.input_dim = jp.at("input_dim").get<int>();
    model.predictor.hidden_sizes = jp.at("hidden_sizes").get<std::vector<int>>();
    model.predictor.recurrent = jp.at("recurrent").get<bool>();
    model.predictor.head =
        jp.at("head").get<std::string>() == "softmax" ? HeadKind::Softmax : HeadKind::Sigmoid;
    model.predictor.num_classes = jp.at("num_classes").get<int>();
    model.predictor.head_bias_init = jp.value("head_bias_init", 0.0);
    model.predictor.seed = jp.at("seed").get<uint64_t>();
    const auto& jt = header.at("train");
    model.loss = jt.at("loss").get<std::string>();
    model.train_seed = jt.at("seed").get<uint64_t>();
    model.best_checkpoint = jt.at("best_checkpoint").get<int>();
    model.best_val_f1 = jt.at("best_val_f1").get<double>();

    const uint64_t count = reader.read_u64();
    model.params.resize(count);
    for (uint64_t i = 0; i < count; ++i) model.params[i] = reader.read_f64();
    if (reader.remaining() != 0)
        throw std::runtime_error(path.string() + ": trailing bytes in parameter file");
    return model;
}

}  // namespace ctl

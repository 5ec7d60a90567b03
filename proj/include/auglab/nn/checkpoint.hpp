#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "auglab/errors.hpp"
#include "auglab/nn/model.hpp"
#include "auglab/nn/optim.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Checkpoint file: "AGLB" magic, a version, a length-prefixed JSON header
// describing the model spec and blob layout, then raw little-endian float32
// blobs (model state tensors in collect_state order, then optimizer
// velocity buffers). Enough to resume a run bit-exactly.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'A', 'G', 'L', 'B'};

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["kind"] = spec.kind == ModelKind::mlp ? "mlp" : "convnet";
    j["widths"] = spec.widths;
    j["num_classes"] = spec.num_classes;
    j["in_channels"] = spec.in_channels;
    j["in_height"] = spec.in_height;
    j["in_width"] = spec.in_width;
    j["norm_mean"] = spec.norm_mean;
    j["norm_std"] = spec.norm_std;
    j["eligible_mix_layers"] = spec.eligible_mix_layers;
    j["drop_rate"] = spec.drop_rate;
    return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mlp") spec.kind = ModelKind::mlp;
    else if (kind == "convnet") spec.kind = ModelKind::convnet;
    else throw CheckpointError("unknown model kind '" + kind + "'");
    spec.widths = j.at("widths").get<std::vector<int>>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.in_channels = j.at("in_channels").get<int>();
    spec.in_height = j.at("in_height").get<int>();
    spec.in_width = j.at("in_width").get<int>();
    spec.norm_mean = j.at("norm_mean").get<std::vector<float>>();
    spec.norm_std = j.at("norm_std").get<std::vector<float>>();
    spec.eligible_mix_layers = j.at("eligible_mix_layers").get<std::vector<int>>();
    spec.drop_rate = j.at("drop_rate").get<double>();
    return spec;
}

struct CheckpointMeta {
    std::uint64_t seed = 0;
    int epochs_done = 0;
    std::string stage = "augment";
    double test_loss = 0.0;
    double test_acc = 0.0;
};

namespace detail {
inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw CheckpointError("unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

inline void write_floats(std::ostream& out, const float* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

inline void read_floats(std::istream& in, float* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw CheckpointError("unexpected end of file while reading tensor data");
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, Model<float>& model,
                            const SgdOptimizer<float>& optim, const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    auto state = model.state_tensors();
    nlohmann::json header;
    header["version"] = kCheckpointVersion;
    header["model"] = model_spec_to_json(model.spec());
    header["meta"] = {{"seed", meta.seed},
                      {"epochs_done", meta.epochs_done},
                      {"stage", meta.stage},
                      {"test_loss", meta.test_loss},
                      {"test_acc", meta.test_acc}};
    header["optim"] = {{"momentum", optim.config().momentum},
                       {"weight_decay", optim.config().weight_decay}};
    std::vector<std::uint64_t> state_sizes;
    for (auto* t : state) state_sizes.push_back(t->count());
    header["state_sizes"] = state_sizes;
    std::vector<std::uint64_t> velocity_sizes;
    for (const auto& v : optim.velocity()) velocity_sizes.push_back(v.size());
    header["velocity_sizes"] = velocity_sizes;

    const std::string header_text = header.dump();
    out.write(kCheckpointMagic, 4);
    detail::write_u64(out, kCheckpointVersion);
    detail::write_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (auto* t : state) detail::write_floats(out, t->values.data(), t->count());
    for (const auto& v : optim.velocity()) detail::write_floats(out, v.data(), v.size());
    if (!out) throw IoError("write failed: " + path);
}

struct LoadedCheckpoint {
    ModelSpec spec;
    std::unique_ptr<Model<float>> model;
    SgdOptimizer<float> optim;
    CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw CheckpointError(path + ": not a checkpoint file (bad magic)");
    }
    const std::uint64_t version = detail::read_u64(in);
    if (version != kCheckpointVersion) {
        throw CheckpointError(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    }
    const std::uint64_t header_len = detail::read_u64(in);
    if (header_len > (1ull << 20)) throw CheckpointError(path + ": implausible header length");
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CheckpointError(path + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const std::exception& e) {
        throw CheckpointError(path + ": corrupt header: " + e.what());
    }

    LoadedCheckpoint loaded;
    try {
        loaded.spec = model_spec_from_json(header.at("model"));
        loaded.meta.seed = header.at("meta").at("seed").get<std::uint64_t>();
        loaded.meta.epochs_done = header.at("meta").at("epochs_done").get<int>();
        loaded.meta.stage = header.at("meta").at("stage").get<std::string>();
        loaded.meta.test_loss = header.at("meta").at("test_loss").get<double>();
        loaded.meta.test_acc = header.at("meta").at("test_acc").get<double>();
        OptimConfig ocfg;
        ocfg.momentum = header.at("optim").at("momentum").get<double>();
        ocfg.weight_decay = header.at("optim").at("weight_decay").get<double>();
        loaded.optim = SgdOptimizer<float>(ocfg);
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(path + ": corrupt header: " + e.what());
    }

    RngStream dummy(0);
    loaded.model = std::make_unique<Model<float>>(loaded.spec, dummy);

    auto state = loaded.model->state_tensors();
    const auto state_sizes = header.at("state_sizes").get<std::vector<std::uint64_t>>();
    if (state_sizes.size() != state.size()) {
        throw CheckpointError(path + ": state tensor count mismatch");
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state_sizes[i] != state[i]->count()) {
            throw CheckpointError(path + ": state tensor size mismatch");
        }
        detail::read_floats(in, state[i]->values.data(), state[i]->count());
    }

    loaded.optim.attach(*loaded.model);
    const auto velocity_sizes = header.at("velocity_sizes").get<std::vector<std::uint64_t>>();
    if (velocity_sizes.size() != loaded.optim.velocity().size()) {
        throw CheckpointError(path + ": velocity buffer count mismatch");
    }
    for (std::size_t i = 0; i < velocity_sizes.size(); ++i) {
        auto& v = loaded.optim.velocity()[i];
        if (velocity_sizes[i] != v.size()) {
            throw CheckpointError(path + ": velocity buffer size mismatch");
        }
        detail::read_floats(in, v.data(), v.size());
    }
    return loaded;
}

}  // namespace auglab

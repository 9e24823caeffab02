#include "adafsnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "adafsnet/error.hpp"

namespace adafsnet {

namespace {

constexpr char kMagic[8] = {'A', 'F', 'S', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

constexpr bool little_endian() { return std::endian::native == std::endian::little; }

template <class T>
void write_le(std::ostream& out, T value) {
    if constexpr (!little_endian()) {
        auto* bytes = reinterpret_cast<unsigned char*>(&value);
        std::reverse(bytes, bytes + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
    if (!out) throw DataError("checkpoint: write failed");
}

template <class T>
T read_le(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("checkpoint: unexpected end of file");
    if constexpr (!little_endian()) {
        auto* bytes = reinterpret_cast<unsigned char*>(&value);
        std::reverse(bytes, bytes + sizeof(T));
    }
    return value;
}

nlohmann::json plan_to_json(const KernelPlan& plan) {
    return {{"p_k", plan.p_k},
            {"target_rf", plan.target_rf},
            {"p3_literal", plan.p3_literal}};
}

KernelPlan plan_from_json(const nlohmann::json& j) {
    return make_plan(j.at("p_k").get<int>(), j.at("target_rf").get<int>(),
                     j.at("p3_literal").get<bool>());
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"filters_per_path", cfg.filters_per_path},
            {"growth_rate", cfg.growth_rate},
            {"dense_block_count", cfg.dense_block_count},
            {"enable_targetdrop", cfg.enable_targetdrop},
            {"preserved_kernel_count", cfg.preserved_kernel_count},
            {"num_classes", cfg.num_classes},
            {"gamma", static_cast<double>(cfg.targetdrop.gamma)},
            {"reduction_ratio", cfg.targetdrop.reduction_ratio},
            {"region_length", cfg.targetdrop.region_length},
            {"bn_momentum", static_cast<double>(cfg.bn_momentum)},
            {"bn_epsilon", static_cast<double>(cfg.bn_epsilon)}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.filters_per_path = j.at("filters_per_path").get<int>();
    cfg.growth_rate = j.at("growth_rate").get<int>();
    cfg.dense_block_count = j.at("dense_block_count").get<int>();
    cfg.enable_targetdrop = j.at("enable_targetdrop").get<bool>();
    cfg.preserved_kernel_count = j.at("preserved_kernel_count").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.targetdrop.gamma = static_cast<real_t>(j.at("gamma").get<double>());
    cfg.targetdrop.reduction_ratio = j.at("reduction_ratio").get<int>();
    cfg.targetdrop.region_length = j.at("region_length").get<int>();
    cfg.bn_momentum = static_cast<real_t>(j.at("bn_momentum").get<double>());
    cfg.bn_epsilon = static_cast<real_t>(j.at("bn_epsilon").get<double>());
    return cfg;
}

}  // namespace

void save_checkpoint(AdaFSNet& model, const std::filesystem::path& path) {
    const std::vector<NamedArray> arrays = model.named_arrays();

    nlohmann::json manifest = nlohmann::json::array();
    for (const NamedArray& a : arrays) {
        manifest.push_back({{"name", a.name}, {"shape", a.shape}});
    }
    nlohmann::json header = {{"plan", plan_to_json(model.plan())},
                             {"config", config_to_json(model.config())},
                             {"input_dim", model.input_dim()},
                             {"dense_kernels", model.dense_kernels()},
                             {"respecialized", model.respecialized()},
                             {"arrays", manifest}};
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const NamedArray& a : arrays) {
        for (real_t v : *a.data) write_le<double>(out, static_cast<double>(v));
    }
    if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

AdaFSNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint: bad magic in " + path.string());
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto header_len = read_le<std::uint64_t>(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("checkpoint: truncated header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header: ") + e.what());
    }

    const KernelPlan plan = plan_from_json(header.at("plan"));
    const ModelConfig cfg = config_from_json(header.at("config"));
    const int input_dim = header.at("input_dim").get<int>();

    Rng rng(0);  // values are overwritten below
    AdaFSNet model(plan, cfg, input_dim, rng);
    if (header.at("respecialized").get<bool>()) {
        model.respecialize_dense_blocks(header.at("dense_kernels").get<std::vector<int>>(), rng);
    }

    const std::vector<NamedArray> arrays = model.named_arrays();
    const auto& manifest = header.at("arrays");
    if (manifest.size() != arrays.size()) {
        throw DataError("checkpoint: manifest lists " + std::to_string(manifest.size()) +
                        " arrays, model has " + std::to_string(arrays.size()));
    }
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        const auto& entry = manifest[i];
        if (entry.at("name").get<std::string>() != arrays[i].name) {
            throw DataError("checkpoint: array " + std::to_string(i) + " is '" +
                            entry.at("name").get<std::string>() + "', expected '" + arrays[i].name +
                            "'");
        }
        if (entry.at("shape").get<Shape>() != arrays[i].shape) {
            throw DataError("checkpoint: shape mismatch for " + arrays[i].name);
        }
        for (real_t& v : *arrays[i].data) v = static_cast<real_t>(read_le<double>(in));
    }
    return model;
}

}  // namespace adafsnet

#include "mvmt/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "mvmt/errors.hpp"

namespace mvmt {

using nlohmann::json;

json param_store_to_json(const ParamStore& store) {
    json out = json::object();
    store.for_each([&](const std::string& name, const ParamStore::Entry& e) {
        out[name] = {{"shape", e.value.shape()},
                     {"value", e.value.data()},
                     {"adam_m", e.adam_m.data()},
                     {"adam_v", e.adam_v.data()},
                     {"step", e.step}};
    });
    return out;
}

ParamStore param_store_from_json(const json& j) {
    ParamStore store;
    try {
        for (const auto& [name, entry] : j.items()) {
            std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
            store.add(name, shape);
            ParamStore::Entry& e = store.entry(name);
            e.value = Tensor(shape, entry.at("value").get<std::vector<double>>());
            e.adam_m = Tensor(shape, entry.at("adam_m").get<std::vector<double>>());
            e.adam_v = Tensor(shape, entry.at("adam_v").get<std::vector<double>>());
            e.step = entry.at("step").get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, std::string("malformed parameter block: ") + e.what());
    }
    return store;
}

json model_config_to_json(const ModelConfig& config) {
    return {{"hidden_dim", config.encoder.hidden_dim},
            {"vocab_size", config.encoder.vocab_size},
            {"kernel_width", config.encoder.kernel_width},
            {"demo_dim", config.encoder.demo_dim},
            {"num_tasks", config.num_tasks},
            {"variant", variant_name(config.variant)},
            {"projection_dim", config.projection_dim},
            {"contrastive_temperature", config.contrastive_temperature}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig config;
    try {
        config.encoder.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        config.encoder.vocab_size = j.at("vocab_size").get<std::size_t>();
        config.encoder.kernel_width = j.at("kernel_width").get<std::size_t>();
        config.encoder.demo_dim = j.at("demo_dim").get<std::size_t>();
        config.num_tasks = j.at("num_tasks").get<std::size_t>();
        config.variant = variant_from_name(j.at("variant").get<std::string>());
        config.projection_dim = j.at("projection_dim").get<std::size_t>();
        config.contrastive_temperature = j.at("contrastive_temperature").get<double>();
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, std::string("malformed model config: ") + e.what());
    }
    return config;
}

json trained_model_to_json(const TrainedModel& model, std::uint64_t vocab_hash, const json& extra) {
    json stores = json::array();
    for (std::size_t i = 0; i < model.store_count(); ++i) {
        stores.push_back(param_store_to_json(model.store(i)));
    }
    std::ostringstream hash;
    hash << std::hex << vocab_hash;
    return {{"format", "mvmt-checkpoint-v1"},
            {"model", model_config_to_json(model.config())},
            {"task_names", model.task_names()},
            {"vocab_hash", hash.str()},
            {"stores", stores},
            {"extra", extra}};
}

LoadedModel trained_model_from_json(const json& j) {
    try {
        if (j.value("format", "") != "mvmt-checkpoint-v1") {
            raise(ErrorKind::Parse, "unrecognized checkpoint format");
        }
        ModelConfig config = model_config_from_json(j.at("model"));
        std::vector<std::string> names = j.at("task_names").get<std::vector<std::string>>();
        LoadedModel loaded{TrainedModel(config, names), 0, j.value("extra", json::object())};
        const json& stores = j.at("stores");
        if (stores.size() != loaded.model.store_count()) {
            raise(ErrorKind::Parse, "checkpoint store count does not match the model layout");
        }
        for (std::size_t i = 0; i < stores.size(); ++i) {
            loaded.model.store(i) = param_store_from_json(stores[i]);
        }
        loaded.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
        return loaded;
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const TrainedModel& model, std::uint64_t vocab_hash, const json& extra,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << trained_model_to_json(model, vocab_hash, extra).dump() << "\n";
    if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return trained_model_from_json(j);
}

} // namespace mvmt

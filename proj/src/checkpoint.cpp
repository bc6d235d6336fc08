#include "padiff/checkpoint.hpp"

#include "padiff/npz.hpp"

#include <json.hpp>

#include <filesystem>

using nlohmann::json;

namespace padiff {

void save_checkpoint(const std::string& path, NoisePredictor<float>& model,
                     const CheckpointInfo& info) {
    std::string tmp = path + ".tmp";
    {
        NpzWriter npz(tmp);
        json header;
        header["cond_channels"] = info.arch.cond_channels;
        header["base_width"] = info.arch.base_width;
        header["channel_mult"] = info.arch.channel_mult;
        header["emb_dim"] = info.arch.emb_dim;
        header["cond_dropout_trained"] = info.arch.cond_dropout_trained;
        header["T"] = info.T;
        header["beta_1"] = info.beta_1;
        header["beta_T"] = info.beta_T;
        header["train_step"] = info.train_step;
        npz.add_bytes("header.json", header.dump(2));
        model.net().visit_params([&](const std::string& name, Mat<float>& v, Mat<float>&) {
            npz.add_array(name, {static_cast<size_t>(v.rows()),
                                 static_cast<size_t>(v.cols())}, v.data());
        });
        npz.close();
    }
    std::filesystem::rename(tmp, path);
}

NoisePredictor<float> load_checkpoint(const std::string& path, CheckpointInfo* info_out) {
    NpzReader npz(path);
    json header = json::parse(npz.bytes("header.json"));

    CheckpointInfo info;
    info.arch.cond_channels = header.at("cond_channels");
    info.arch.base_width = header.at("base_width");
    info.arch.channel_mult = header.at("channel_mult").get<std::vector<int>>();
    info.arch.emb_dim = header.at("emb_dim");
    info.arch.cond_dropout_trained = header.at("cond_dropout_trained");
    info.T = header.at("T");
    info.beta_1 = header.at("beta_1");
    info.beta_T = header.at("beta_T");
    info.train_step = header.at("train_step");

    NoisePredictor<float> model(info.arch, 0);
    model.net().visit_params([&](const std::string& name, Mat<float>& v, Mat<float>&) {
        NpyArray arr = npz.array(name);
        if (arr.shape.size() != 2 || arr.shape[0] != static_cast<size_t>(v.rows()) ||
            arr.shape[1] != static_cast<size_t>(v.cols()))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        std::copy(arr.data.begin(), arr.data.end(), v.data());
    });
    if (info_out) *info_out = info;
    return model;
}

}  // namespace padiff

#include "smgarn/checkpoint.hpp"

#include <cmath>

#include <json.hpp>

#include "smgarn/io.hpp"

namespace smgarn {

Adam::Adam(ParamRefs params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Param* p : params_) {
        m_.emplace(p->name, Tensor::zeros_like(p->value));
        v_.emplace(p->name, Tensor::zeros_like(p->value));
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Param* p : params_) {
        Tensor& m = m_.at(p->name);
        Tensor& v = v_.at(p->name);
        for (std::int64_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::restore(long long t, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v) {
    t_ = t;
    for (Param* p : params_) {
        auto im = m.find(p->name);
        auto iv = v.find(p->name);
        if (im == m.end() || iv == v.end()) {
            throw IoError("optimizer state missing for parameter '" + p->name + "'");
        }
        m_.at(p->name) = std::move(im->second);
        v_.at(p->name) = std::move(iv->second);
    }
}

namespace {

nlohmann::json cfg_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["embed_dim"] = cfg.embed_dim;
    j["mask_channels"] = cfg.mask_channels;
    j["guidance_case"] = guidance_case_name(cfg.guidance);
    j["gf_conv_stack"] = cfg.gf_conv_stack;
    j["masknet"] = {{"num_blocks", cfg.masknet.num_blocks},
                    {"use_sa", cfg.masknet.use_sa},
                    {"use_ca", cfg.masknet.use_ca}};
    j["gfnet"] = {
        {"levels", cfg.gfnet.levels},
        {"fusion", cfg.gfnet.fusion == FusionMode::concat_conv ? "concat_conv" : "add_conv"},
        {"guidance", cfg.gfnet.guidance == GuidanceMode::residual ? "residual" : "concat"}};
    j["marb"] = {{"count", cfg.marb.count},
                 {"scale", cfg.marb.scale == ScaleMode::multi ? "multi" : "single"},
                 {"agg", cfg.marb.agg == AggMode::multi ? "multi" : "single"}};
    return j;
}

ModelConfig cfg_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.mask_channels = j.at("mask_channels").get<int>();
    cfg.guidance = guidance_case_from_name(j.at("guidance_case").get<std::string>());
    cfg.gf_conv_stack = j.value("gf_conv_stack", false);
    cfg.masknet.num_blocks = j.at("masknet").at("num_blocks").get<int>();
    cfg.masknet.use_sa = j.at("masknet").at("use_sa").get<bool>();
    cfg.masknet.use_ca = j.at("masknet").at("use_ca").get<bool>();
    cfg.gfnet.levels = j.at("gfnet").at("levels").get<int>();
    cfg.gfnet.fusion = j.at("gfnet").at("fusion").get<std::string>() == "add_conv"
                           ? FusionMode::add_conv
                           : FusionMode::concat_conv;
    cfg.gfnet.guidance = j.at("gfnet").at("guidance").get<std::string>() == "concat"
                             ? GuidanceMode::concat
                             : GuidanceMode::residual;
    cfg.marb.count = j.at("marb").at("count").get<int>();
    cfg.marb.scale =
        j.at("marb").at("scale").get<std::string>() == "single" ? ScaleMode::single
                                                                : ScaleMode::multi;
    cfg.marb.agg =
        j.at("marb").at("agg").get<std::string>() == "single" ? AggMode::single : AggMode::multi;
    cfg.propagate();
    return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return cfg_to_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& json_text) {
    return cfg_from_json(nlohmann::json::parse(json_text));
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ParamRefs& params, const Adam* optimizer, int epoch, long long step) {
    std::map<std::string, Tensor> tensors;
    for (const Param* p : params) tensors.emplace(p->name, p->value);
    if (optimizer) {
        for (const auto& [name, t] : optimizer->moment1()) tensors.emplace("opt." + name + ".m", t);
        for (const auto& [name, t] : optimizer->moment2()) tensors.emplace("opt." + name + ".v", t);
    }
    nlohmann::json meta;
    meta["format"] = "smgarn-checkpoint";
    meta["version"] = 1;
    meta["model"] = cfg_to_json(cfg);
    meta["epoch"] = epoch;
    meta["step"] = step;
    meta["has_optimizer"] = optimizer != nullptr;
    meta["adam_t"] = optimizer ? optimizer->t() : 0;
    save_tensor_archive(path, tensors, meta.dump());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    TensorArchive arc = load_tensor_archive(path);
    nlohmann::json meta = nlohmann::json::parse(arc.meta_json);
    if (meta.value("format", "") != "smgarn-checkpoint") {
        throw IoError("'" + path.string() + "' is not a checkpoint");
    }
    CheckpointData d;
    d.config = cfg_from_json(meta.at("model"));
    d.epoch = meta.at("epoch").get<int>();
    d.step = meta.at("step").get<long long>();
    d.has_optimizer = meta.value("has_optimizer", false);
    d.adam_t = meta.value("adam_t", 0LL);
    for (auto& [name, t] : arc.tensors) {
        if (name.rfind("opt.", 0) == 0) {
            if (name.size() > 6 && name.compare(name.size() - 2, 2, ".m") == 0) {
                d.opt_m.emplace(name.substr(4, name.size() - 6), std::move(t));
            } else if (name.compare(name.size() - 2, 2, ".v") == 0) {
                d.opt_v.emplace(name.substr(4, name.size() - 6), std::move(t));
            }
        } else {
            d.params.emplace(name, std::move(t));
        }
    }
    return d;
}

void restore_params(const CheckpointData& data, const ParamRefs& params) {
    for (Param* p : params) {
        auto it = data.params.find(p->name);
        if (it == data.params.end()) {
            throw IoError("checkpoint missing parameter '" + p->name + "'");
        }
        if (!it->second.same_shape(p->value)) {
            throw IoError("checkpoint parameter '" + p->name + "' has shape " +
                          shape_str(it->second) + ", model expects " + shape_str(p->value));
        }
        p->value = it->second;
    }
}

}  // namespace smgarn

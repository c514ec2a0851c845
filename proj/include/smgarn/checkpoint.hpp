#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "smgarn/layers.hpp"
#include "smgarn/model.hpp"

namespace smgarn {

// Adam with standard defaults and bias correction.
class Adam {
public:
    explicit Adam(ParamRefs params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);

    long long t() const { return t_; }
    const std::map<std::string, Tensor>& moment1() const { return m_; }
    const std::map<std::string, Tensor>& moment2() const { return v_; }
    void restore(long long t, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v);

private:
    ParamRefs params_;
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

// Checkpoint container: tensor archive holding every model parameter by
// name plus optional Adam moments, with ModelConfig and counters in the
// archive's JSON meta block. Written atomically (temp file then rename).
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ParamRefs& params, const Adam* optimizer, int epoch, long long step);

struct CheckpointData {
    ModelConfig config;
    int epoch = 0;       // number of completed epochs == next epoch index
    long long step = 0;  // global optimizer steps taken
    long long adam_t = 0;
    bool has_optimizer = false;
    std::map<std::string, Tensor> params;
    std::map<std::string, Tensor> opt_m, opt_v;
};

CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies tensors into the model's parameters by name; every parameter must
// be present with matching shape.
void restore_params(const CheckpointData& data, const ParamRefs& params);

}  // namespace smgarn

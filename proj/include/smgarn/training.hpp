#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "smgarn/checkpoint.hpp"
#include "smgarn/io.hpp"
#include "smgarn/model.hpp"
#include "smgarn/synth.hpp"

namespace smgarn {

struct TrainConfig {
    int patch_size = 128;
    int batch_size = 16;
    double lr_init = 1e-4;
    int lr_halve_every = 100;
    int epochs = 1;
    unsigned long long seed = 0;
    double lambda = 1.0;
    bool augment_hflip = true;
    bool augment_vflip = true;
    bool augment_rot90 = true;
    bool clip_grad = false;
    double clip_value = 1.0;
};

struct MetricsRecord {
    int epoch = 0;
    long long step = 0;
    double loss_total = 0.0, loss_rec = 0.0, loss_mask = 0.0, lr = 0.0;
    // Eval rows only; NaN when not measured.
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
};

// Flat `key = value` config file with '#' comments. Throws ParamError with
// the offending line number for malformed lines or unknown keys.
void parse_config_file(const std::filesystem::path& path, ModelConfig& model, TrainConfig& train);

// lr_init * 2^-floor(epoch / halve_every)
double lr_schedule(int epoch, const TrainConfig& cfg);

// Geometric transforms applied jointly to every aligned tensor of a sample.
Tensor hflip(const Tensor& t);
Tensor vflip(const Tensor& t);
Tensor rot90(const Tensor& t, int quarter_turns);

SnowSample sample_patch(const SnowSample& s, int size, std::mt19937_64& rng);
struct AugmentFlags {
    bool hflip = true, vflip = true, rot90 = true;
};
SnowSample augment(const SnowSample& s, const AugmentFlags& flags, std::mt19937_64& rng);

void write_metrics_csv_header(const std::filesystem::path& path);
void append_metrics_csv(const std::filesystem::path& path, const MetricsRecord& rec);

struct TrainResult {
    std::filesystem::path last_checkpoint;
    std::vector<MetricsRecord> log;
    double final_loss_total = 0.0, final_loss_rec = 0.0, final_loss_mask = 0.0;
    long long steps = 0;
};

// End-to-end optimization over in-memory samples. Writes a checkpoint per
// epoch and appends per-step rows to metrics.csv under out_dir; set out_dir
// empty to keep everything in memory (used by tests and sweeps).
// per_step, when set, observes each step's record (after logging).
TrainResult train_loop(Smgarn& model, const TrainConfig& cfg,
                       const std::vector<SnowSample>& samples,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt,
                       const std::function<void(const MetricsRecord&)>& per_step = nullptr);

// Loader parallelism bound from SMGARN_NUM_WORKERS (0 or unset = run the
// batch assembly inline; determinism is only guaranteed in that mode).
int num_workers_from_env();

}  // namespace smgarn

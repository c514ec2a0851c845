#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smgarn/io.hpp"
#include "smgarn/model.hpp"
#include "smgarn/training.hpp"

namespace smgarn {

// 10*log10(peak^2 / MSE), capped (zero MSE reports the cap).
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0, double cap = 100.0);

// Mean local SSIM on BT.601 luminance, 11x11 Gaussian window, sigma 1.5.
double ssim(const Tensor& a, const Tensor& b, int window = 11, double sigma = 1.5,
            double k1 = 0.01, double k2 = 0.03, double peak = 1.0);

struct EvalRow {
    std::string id;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::string dataset_id;
    std::vector<EvalRow> per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

// "29.94/0.94"-style pair with two decimals each.
std::string summary_line(const EvalReport& report);

// Runs inference on every image at native resolution and scores against
// gt/. Writes report.csv and summary.json to out_dir when non-empty.
EvalReport evaluate(Smgarn& model, const std::filesystem::path& dataset_dir,
                    const std::filesystem::path& out_dir = {});

// --- Ablation sweeps ---

struct Variant {
    std::string name;
    ModelConfig config;
};

// Named ablation grids:
//   masknet    - SA/CA on-off grid
//   guidance   - the four mask-guidance cases
//   marb       - single/multi scale x single/multi aggregation
//   marb_count - 1/2/3 MARBs
std::vector<std::string> ablation_grid_names();
std::vector<Variant> ablation_grid(const std::string& grid, const ModelConfig& base);

struct SweepRow {
    std::string variant;
    double final_loss_total = 0.0;
    double final_loss_rec = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

struct SweepResult {
    std::string grid;
    std::vector<SweepRow> rows;  // ranked by mean_psnr descending
};

// Trains every variant under identical seed/budget on the given dataset,
// evaluates on the same data, and writes a ranked table plus a plot-ready
// CSV to out_dir when non-empty.
SweepResult ablation_sweep(const std::string& grid, const ModelConfig& base,
                           const TrainConfig& train_cfg,
                           const std::filesystem::path& dataset_dir,
                           const std::filesystem::path& out_dir = {});

}  // namespace smgarn

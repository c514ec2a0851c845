#include "smgarn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace smgarn {

double psnr(const Tensor& a, const Tensor& b, double peak, double cap) {
    check_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0.0) return cap;
    return std::min(cap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

// BT.601 luminance of an RGB tensor; single-channel tensors pass through.
Tensor luminance(const Tensor& t) {
    if (t.c() == 1) return t;
    if (t.c() != 3) throw DimensionError("ssim: expected 1 or 3 channels, got " + shape_str(t));
    Tensor y(t.n(), 1, t.h(), t.w());
    for (int b = 0; b < t.n(); ++b)
        for (int i = 0; i < t.h(); ++i)
            for (int j = 0; j < t.w(); ++j) {
                y(b, 0, i, j) = 0.299 * t(b, 0, i, j) + 0.587 * t(b, 1, i, j) +
                                0.114 * t(b, 2, i, j);
            }
    return y;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, int window, double sigma, double k1, double k2,
            double peak) {
    check_same_shape(a, b, "ssim");
    if (std::min(a.h(), a.w()) < window) {
        throw DimensionError("ssim: image " + shape_str(a) + " smaller than window " +
                             std::to_string(window));
    }
    const Tensor la = luminance(a), lb = luminance(b);

    const int r = window / 2;
    std::vector<double> w(static_cast<std::size_t>(window) * window);
    double wsum = 0.0;
    for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
            const double dy = i - r, dx = j - r;
            w[i * window + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            wsum += w[i * window + j];
        }
    for (double& v : w) v /= wsum;

    const double c1 = (k1 * peak) * (k1 * peak);
    const double c2 = (k2 * peak) * (k2 * peak);

    double acc = 0.0;
    std::int64_t count = 0;
    for (int bidx = 0; bidx < la.n(); ++bidx) {
#pragma omp parallel for schedule(static) reduction(+ : acc, count)
        for (int y = r; y < la.h() - r; ++y) {
            for (int x = r; x < la.w() - r; ++x) {
                double ma = 0.0, mb = 0.0, sa = 0.0, sb = 0.0, sab = 0.0;
                for (int i = 0; i < window; ++i)
                    for (int j = 0; j < window; ++j) {
                        const double wa = la(bidx, 0, y + i - r, x + j - r);
                        const double wb = lb(bidx, 0, y + i - r, x + j - r);
                        const double wt = w[i * window + j];
                        ma += wt * wa;
                        mb += wt * wb;
                        sa += wt * wa * wa;
                        sb += wt * wb * wb;
                        sab += wt * wa * wb;
                    }
                sa -= ma * ma;
                sb -= mb * mb;
                sab -= ma * mb;
                const double num = (2.0 * ma * mb + c1) * (2.0 * sab + c2);
                const double den = (ma * ma + mb * mb + c1) * (sa + sb + c2);
                acc += num / den;
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

std::string summary_line(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << report.mean_psnr << "/" << report.mean_ssim;
    return os.str();
}

EvalReport evaluate(Smgarn& model, const fs::path& dataset_dir, const fs::path& out_dir) {
    Dataset ds = Dataset::open(dataset_dir);
    if (!ds.all_have_clean()) {
        throw DataError("evaluate: dataset '" + dataset_dir.string() + "' lacks gt/ images");
    }
    const bool needs_mask = model.config().guidance == GuidanceCase::case4_gt_mask;
    if (needs_mask && !ds.all_have_mask()) {
        throw DataError("evaluate: case4_gt_mask requires mask/ images");
    }

    EvalReport report;
    report.dataset_id = dataset_dir.filename().string();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        SnowSample s = ds.load(i);
        Smgarn::Output out = model.forward(s.snowy, needs_mask ? &*s.mask : nullptr);
        EvalRow row;
        row.id = s.id;
        row.psnr_db = psnr(out.clear, *s.clean);
        row.ssim = ssim(out.clear, *s.clean);
        report.per_image.push_back(row);
    }
    for (const auto& row : report.per_image) {
        report.mean_psnr += row.psnr_db;
        report.mean_ssim += row.ssim;
    }
    report.mean_psnr /= static_cast<double>(report.per_image.size());
    report.mean_ssim /= static_cast<double>(report.per_image.size());

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream csv(out_dir / "report.csv");
        csv << "id,psnr_db,ssim\n";
        for (const auto& row : report.per_image) {
            csv << row.id << ',' << row.psnr_db << ',' << row.ssim << '\n';
        }
        nlohmann::json j;
        j["dataset_id"] = report.dataset_id;
        j["mean_psnr"] = report.mean_psnr;
        j["mean_ssim"] = report.mean_ssim;
        j["summary"] = summary_line(report);
        std::ofstream js(out_dir / "summary.json");
        js << j.dump(2) << '\n';
    }
    return report;
}

std::vector<std::string> ablation_grid_names() {
    return {"masknet", "guidance", "gfnet", "marb", "marb_count"};
}

std::vector<Variant> ablation_grid(const std::string& grid, const ModelConfig& base) {
    std::vector<Variant> out;
    auto with = [&](const std::string& name, auto&& mutate) {
        ModelConfig cfg = base;
        mutate(cfg);
        cfg.propagate();
        out.push_back({name, cfg});
    };
    if (grid == "masknet") {
        with("masknet_baseline", [](ModelConfig& c) { c.masknet.use_sa = false; c.masknet.use_ca = false; });
        with("masknet_sa", [](ModelConfig& c) { c.masknet.use_sa = true; c.masknet.use_ca = false; });
        with("masknet_ca", [](ModelConfig& c) { c.masknet.use_sa = false; c.masknet.use_ca = true; });
        with("masknet_casa", [](ModelConfig& c) { c.masknet.use_sa = true; c.masknet.use_ca = true; });
    } else if (grid == "guidance") {
        with("tbl4_case1", [](ModelConfig& c) { c.guidance = GuidanceCase::case1_no_masknet; });
        with("tbl4_case2", [](ModelConfig& c) { c.guidance = GuidanceCase::case2_no_maskloss; });
        with("tbl4_case3", [](ModelConfig& c) { c.guidance = GuidanceCase::case3_full; });
        with("tbl4_case4", [](ModelConfig& c) { c.guidance = GuidanceCase::case4_gt_mask; });
    } else if (grid == "gfnet") {
        with("tbl5_case1", [](ModelConfig& c) { c.gf_conv_stack = true; });
        with("gf_concat", [](ModelConfig& c) { c.gfnet.guidance = GuidanceMode::concat; });
        with("gf_residual", [](ModelConfig& c) { c.gfnet.guidance = GuidanceMode::residual; });
    } else if (grid == "marb") {
        with("marn_ss_sa", [](ModelConfig& c) { c.marb.scale = ScaleMode::single; c.marb.agg = AggMode::single; });
        with("marn_ms_sa", [](ModelConfig& c) { c.marb.scale = ScaleMode::multi; c.marb.agg = AggMode::single; });
        with("marn_ss_ma", [](ModelConfig& c) { c.marb.scale = ScaleMode::single; c.marb.agg = AggMode::multi; });
        with("marn_ms_ma", [](ModelConfig& c) { c.marb.scale = ScaleMode::multi; c.marb.agg = AggMode::multi; });
    } else if (grid == "marb_count") {
        with("marb_x1", [](ModelConfig& c) { c.marb.count = 1; });
        with("marb_x2", [](ModelConfig& c) { c.marb.count = 2; });
        with("marb_x3", [](ModelConfig& c) { c.marb.count = 3; });
    } else {
        std::string known;
        for (const auto& g : ablation_grid_names()) known += " " + g;
        throw ParamError("unknown ablation grid '" + grid + "'; known grids:" + known);
    }
    return out;
}

SweepResult ablation_sweep(const std::string& grid, const ModelConfig& base,
                           const TrainConfig& train_cfg, const fs::path& dataset_dir,
                           const fs::path& out_dir) {
    const std::vector<Variant> variants = ablation_grid(grid, base);

    Dataset ds = Dataset::open(dataset_dir);
    std::vector<SnowSample> samples;
    for (std::size_t i = 0; i < ds.size(); ++i) samples.push_back(ds.load(i));

    SweepResult result;
    result.grid = grid;
    for (const auto& variant : variants) {
        Smgarn model(variant.config);
        model.init(train_cfg.seed);
        TrainResult tr = train_loop(model, train_cfg, samples, "");
        EvalReport report = evaluate(model, dataset_dir);
        SweepRow row;
        row.variant = variant.name;
        row.final_loss_total = tr.final_loss_total;
        row.final_loss_rec = tr.final_loss_rec;
        row.mean_psnr = report.mean_psnr;
        row.mean_ssim = report.mean_ssim;
        result.rows.push_back(row);
    }
    std::sort(result.rows.begin(), result.rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.mean_psnr > b.mean_psnr; });

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream csv(out_dir / ("sweep_" + grid + ".csv"));
        csv << "variant,final_loss_total,final_loss_rec,mean_psnr,mean_ssim\n";
        for (const auto& row : result.rows) {
            csv << row.variant << ',' << row.final_loss_total << ',' << row.final_loss_rec << ','
                << row.mean_psnr << ',' << row.mean_ssim << '\n';
        }
    }
    return result;
}

}  // namespace smgarn

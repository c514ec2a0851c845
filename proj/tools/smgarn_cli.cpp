#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>

#include <json.hpp>

#include "smgarn/evaluation.hpp"
#include "smgarn/io.hpp"
#include "smgarn/synth.hpp"
#include "smgarn/training.hpp"

namespace fs = std::filesystem;
using namespace smgarn;

namespace {

SynthParams parse_synth_params(const fs::path& path) {
    SynthParams p;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open params file '" + path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string key, eq;
        double value;
        if (!(ss >> key >> eq >> value) || eq != "=") {
            throw ParamError("params line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        if (key == "flake_count_min") p.flake_count_range.first = static_cast<int>(value);
        else if (key == "flake_count_max") p.flake_count_range.second = static_cast<int>(value);
        else if (key == "flake_radius_min") p.flake_radius_range.first = value;
        else if (key == "flake_radius_max") p.flake_radius_range.second = value;
        else if (key == "streak_count_min") p.streak_count_range.first = static_cast<int>(value);
        else if (key == "streak_count_max") p.streak_count_range.second = static_cast<int>(value);
        else if (key == "streak_length_min") p.streak_length_range.first = value;
        else if (key == "streak_length_max") p.streak_length_range.second = value;
        else if (key == "streak_angle_min") p.streak_angle_range.first = value;
        else if (key == "streak_angle_max") p.streak_angle_range.second = value;
        else if (key == "opacity_min") p.opacity_range.first = value;
        else if (key == "opacity_max") p.opacity_range.second = value;
        else if (key == "transmission_min") p.transmission_range.first = value;
        else if (key == "transmission_max") p.transmission_range.second = value;
        else if (key == "atmospheric_min") p.atmospheric_range.first = value;
        else if (key == "atmospheric_max") p.atmospheric_range.second = value;
        else if (key == "chroma_jitter") p.chroma_jitter = value;
        else if (key == "binary_mask") p.binary_mask = value != 0.0;
        else
            throw ParamError("params line " + std::to_string(lineno) + ": unknown key '" + key +
                             "'");
    }
    p.validate();
    return p;
}

nlohmann::json synth_params_json(const SynthParams& p) {
    nlohmann::json j;
    j["flake_count_range"] = {p.flake_count_range.first, p.flake_count_range.second};
    j["flake_radius_range"] = {p.flake_radius_range.first, p.flake_radius_range.second};
    j["streak_count_range"] = {p.streak_count_range.first, p.streak_count_range.second};
    j["streak_length_range"] = {p.streak_length_range.first, p.streak_length_range.second};
    j["streak_angle_range"] = {p.streak_angle_range.first, p.streak_angle_range.second};
    j["opacity_range"] = {p.opacity_range.first, p.opacity_range.second};
    j["transmission_range"] = {p.transmission_range.first, p.transmission_range.second};
    j["atmospheric_range"] = {p.atmospheric_range.first, p.atmospheric_range.second};
    j["chroma_jitter"] = p.chroma_jitter;
    j["binary_mask"] = p.binary_mask;
    return j;
}

int cmd_synth(const fs::path& out, int count, int height, int width, unsigned long long seed,
              const std::string& params_file, bool latents) {
    SynthParams base = params_file.empty() ? SynthParams{} : parse_synth_params(params_file);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory '" + out.string() + "'");

    std::mt19937_64 clean_rng(seed);
    std::vector<SnowSample> samples;
    nlohmann::json ids = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
        Tensor clean = procedural_clean(height, width, clean_rng);
        SynthParams p = base;
        p.seed = seed * 1000003ULL + static_cast<unsigned long long>(i);
        SnowSample s = synth_sample(clean, p);
        std::ostringstream id;
        id << std::setw(4) << std::setfill('0') << (i + 1);
        s.id = id.str();
        ids.push_back(s.id);
        samples.push_back(std::move(s));
    }
    write_dataset(samples, out, latents);

    nlohmann::json manifest;
    manifest["ids"] = ids;
    manifest["seed"] = seed;
    manifest["size"] = {height, width};
    manifest["params"] = synth_params_json(base);
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << '\n';
    std::cout << "wrote " << count << " samples to " << out << "\n";
    return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out_dir,
              const std::string& resume) {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    parse_config_file(config_path, model_cfg, train_cfg);

    if (!resume.empty()) {
        // The checkpoint's architecture wins; hyperparameters still come
        // from the config file.
        model_cfg = load_checkpoint(resume).config;
    }

    Dataset ds = Dataset::open(data_dir);
    const bool needs_mask = model_cfg.guidance == GuidanceCase::case3_full ||
                            model_cfg.guidance == GuidanceCase::case4_gt_mask;
    if (!ds.all_have_clean()) {
        throw DataError("training data '" + (data_dir / "gt").string() + "' is incomplete");
    }
    if (needs_mask && !ds.all_have_mask()) {
        throw DataError("guidance case " + guidance_case_name(model_cfg.guidance) +
                        " requires masks under '" + (data_dir / "mask").string() + "'");
    }
    std::vector<SnowSample> samples;
    for (std::size_t i = 0; i < ds.size(); ++i) samples.push_back(ds.load(i));

    Smgarn model(model_cfg);
    model.init(train_cfg.seed);
    int last_epoch = -1;
    TrainResult result = train_loop(
        model, train_cfg, samples, out_dir,
        resume.empty() ? std::nullopt : std::optional<fs::path>(resume),
        [&](const MetricsRecord& rec) {
            if (rec.epoch != last_epoch) {
                last_epoch = rec.epoch;
                std::cout << "epoch " << rec.epoch << " lr " << rec.lr << " loss "
                          << rec.loss_total << "\n";
            }
        });
    std::cout << "finished after " << result.steps << " steps, final loss "
              << result.final_loss_total << "\n";
    if (!result.last_checkpoint.empty()) {
        std::cout << "last checkpoint: " << result.last_checkpoint << "\n";
    }
    return 0;
}

std::pair<Smgarn, CheckpointData> model_from_checkpoint(const fs::path& ckpt_path) {
    CheckpointData ckpt = load_checkpoint(ckpt_path);
    Smgarn model(ckpt.config);
    restore_params(ckpt, model.params());
    return {std::move(model), std::move(ckpt)};
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data_dir, const fs::path& out_dir) {
    auto [model, ckpt] = model_from_checkpoint(ckpt_path);
    EvalReport report = evaluate(model, data_dir, out_dir);
    std::cout << summary_line(report) << "\n";
    return 0;
}

int cmd_infer(const fs::path& ckpt_path, const fs::path& input, const fs::path& out_dir,
              bool save_mask) {
    auto [model, ckpt] = model_from_checkpoint(ckpt_path);
    if (model.config().guidance == GuidanceCase::case4_gt_mask) {
        throw DataError("case4_gt_mask checkpoints need ground-truth masks; use 'eval' on a "
                        "dataset with mask/ instead of 'infer'");
    }
    if (save_mask && !model.has_mask_output()) {
        std::cerr << "warning: checkpoint variant " << guidance_case_name(model.config().guidance)
                  << " produces no mask; --save-mask ignored\n";
        save_mask = false;
    }

    std::vector<fs::path> inputs;
    if (fs::is_directory(input)) {
        for (const auto& de : fs::directory_iterator(input)) {
            if (de.path().extension() == ".png") inputs.push_back(de.path());
        }
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) throw DataError("no .png inputs in '" + input.string() + "'");
    } else {
        inputs.push_back(input);
    }

    fs::create_directories(out_dir);
    int written = 0;
    for (const auto& path : inputs) {
        Tensor img;
        try {
            img = load_image_rgb(path);
        } catch (const IoError& e) {
            if (inputs.size() == 1) throw;
            std::cerr << "skipping unreadable input: " << path << "\n";
            continue;
        }
        Smgarn::Output out = model.forward(img);
        const std::string stem = path.stem().string();
        save_image_rgb(out_dir / (stem + ".png"), out.clear);
        if (save_mask && out.mask) save_image_gray(out_dir / (stem + "_mask.png"), *out.mask);
        ++written;
    }
    std::cout << "wrote " << written << " image(s) to " << out_dir << "\n";
    return 0;
}

int cmd_ablate(const std::string& grid, const fs::path& data_dir, const fs::path& out_dir,
               const std::string& config_path) {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    if (!config_path.empty()) {
        parse_config_file(config_path, model_cfg, train_cfg);
    } else {
        // Desk-scale defaults so the sweep stays tractable.
        model_cfg.embed_dim = 16;
        model_cfg.marb.count = 1;
        model_cfg.propagate();
        train_cfg.patch_size = 48;
        train_cfg.batch_size = 2;
        train_cfg.lr_init = 1e-3;
        train_cfg.epochs = 10;
    }

    SweepResult result = ablation_sweep(grid, model_cfg, train_cfg, data_dir, out_dir);
    std::cout << "variant,final_loss_total,final_loss_rec,mean_psnr,mean_ssim\n";
    for (const auto& row : result.rows) {
        std::cout << row.variant << ',' << row.final_loss_total << ',' << row.final_loss_rec
                  << ',' << std::fixed << std::setprecision(2) << row.mean_psnr << ','
                  << row.mean_ssim << std::defaultfloat << "\n";
    }

    if (grid == "marb_count") {
        // Soft trend report: more MARBs should not hurt.
        auto find = [&](const std::string& name) {
            for (const auto& r : result.rows)
                if (r.variant == name) return r.mean_psnr;
            return 0.0;
        };
        const double p1 = find("marb_x1"), p2 = find("marb_x2"), p3 = find("marb_x3");
        const bool monotone = p1 <= p2 && p2 <= p3;
        std::cout << "marb-count trend " << (monotone ? "holds" : "DOES NOT HOLD")
                  << " at this budget: " << p1 << " -> " << p2 << " -> " << p3 << " dB\n";
    }
    if (grid == "guidance") {
        auto find = [&](const std::string& name) {
            for (const auto& r : result.rows)
                if (r.variant == name) return r.final_loss_rec;
            return 0.0;
        };
        const double l1 = find("tbl4_case1"), l3 = find("tbl4_case3"), l4 = find("tbl4_case4");
        const bool ordered = l4 <= l3 && l3 <= l1;
        std::cout << "guidance ordering (case4 <= case3 <= case1 by reconstruct loss) "
                  << (ordered ? "holds" : "DOES NOT HOLD") << ": " << l4 << " <= " << l3
                  << " <= " << l1 << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SMGARN snow removal: synthesis, training, evaluation, inference, ablations"};
    app.require_subcommand(1);

    std::function<int()> run;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a paired synthetic snow dataset");
    fs::path synth_out;
    int synth_count = 0, synth_h = 128, synth_w = 128;
    unsigned long long synth_seed = 0;
    std::string synth_params;
    bool synth_latents = false;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--count", synth_count, "number of samples")
        ->required()
        ->check(CLI::PositiveNumber);
    std::vector<int> synth_size{128, 128};
    synth->add_option("--size", synth_size, "image size: H W")->expected(2);
    synth->add_option("--seed", synth_seed, "base RNG seed");
    synth->add_option("--params", synth_params, "synthesis parameter file (key = value)");
    synth->add_flag("--latents", synth_latents, "persist latent maps alongside images");
    synth->callback([&] {
        run = [&] {
            return cmd_synth(synth_out, synth_count, synth_size[0], synth_size[1], synth_seed,
                             synth_params, synth_latents);
        };
    });

    // train
    auto* train = app.add_subcommand("train", "train a model");
    fs::path train_config, train_data, train_out;
    std::string train_resume;
    train->add_option("--config", train_config, "config file")->required();
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->callback([&] {
        run = [&] { return cmd_train(train_config, train_data, train_out, train_resume); };
    });

    // eval
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    fs::path eval_ckpt, eval_data, eval_out;
    evalc->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    evalc->add_option("--data", eval_data, "dataset directory (needs gt/)")->required();
    evalc->add_option("--out", eval_out, "report output directory");
    evalc->callback([&] { run = [&] { return cmd_eval(eval_ckpt, eval_data, eval_out); }; });

    // infer
    auto* infer = app.add_subcommand("infer", "desnow images with a checkpoint");
    fs::path infer_ckpt, infer_in, infer_out;
    bool infer_save_mask = false;
    infer->add_option("--ckpt", infer_ckpt, "checkpoint file")->required();
    infer->add_option("--in", infer_in, "input image or directory")->required();
    infer->add_option("--out", infer_out, "output directory")->required();
    infer->add_flag("--save-mask", infer_save_mask, "also write the predicted snow mask");
    infer->callback([&] {
        run = [&] { return cmd_infer(infer_ckpt, infer_in, infer_out, infer_save_mask); };
    });

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run an ablation sweep");
    std::string ablate_grid;
    fs::path ablate_data, ablate_out;
    std::string ablate_config;
    ablate->add_option("--grid", ablate_grid, "grid name (masknet|guidance|gfnet|marb|marb_count)")
        ->required();
    ablate->add_option("--data", ablate_data, "dataset directory")->required();
    ablate->add_option("--out", ablate_out, "output directory");
    ablate->add_option("--config", ablate_config, "base config file");
    ablate->callback([&] {
        run = [&] { return cmd_ablate(ablate_grid, ablate_data, ablate_out, ablate_config); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return run();
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

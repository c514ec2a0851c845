#include "smgarn/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <condition_variable>
#include <iomanip>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace smgarn {

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ParamError("lr_schedule: epoch must be >= 0");
    if (cfg.lr_halve_every < 1) throw ParamError("lr_schedule: lr_halve_every must be >= 1");
    const int halvings = epoch / cfg.lr_halve_every;
    return std::ldexp(cfg.lr_init, -halvings);
}

Tensor hflip(const Tensor& t) {
    Tensor y = Tensor::zeros_like(t);
    for (int b = 0; b < t.n(); ++b)
        for (int c = 0; c < t.c(); ++c)
            for (int i = 0; i < t.h(); ++i)
                for (int j = 0; j < t.w(); ++j) y(b, c, i, j) = t(b, c, i, t.w() - 1 - j);
    return y;
}

Tensor vflip(const Tensor& t) {
    Tensor y = Tensor::zeros_like(t);
    for (int b = 0; b < t.n(); ++b)
        for (int c = 0; c < t.c(); ++c)
            for (int i = 0; i < t.h(); ++i)
                for (int j = 0; j < t.w(); ++j) y(b, c, i, j) = t(b, c, t.h() - 1 - i, j);
    return y;
}

Tensor rot90(const Tensor& t, int quarter_turns) {
    int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return t;
    if (t.h() != t.w()) throw DimensionError("rot90: tensor must be square, got " + shape_str(t));
    Tensor y = Tensor::zeros_like(t);
    const int n = t.h();
    for (int b = 0; b < t.n(); ++b)
        for (int c = 0; c < t.c(); ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    // one counter-clockwise quarter turn per k
                    int si = i, sj = j;
                    for (int q = 0; q < k; ++q) {
                        const int ti = sj, tj = n - 1 - si;
                        si = ti;
                        sj = tj;
                    }
                    y(b, c, i, j) = t(b, c, si, sj);
                }
    return y;
}

namespace {

template <typename F>
void apply_joint(SnowSample& s, F&& f) {
    s.snowy = f(s.snowy);
    if (s.clean) s.clean = f(*s.clean);
    if (s.mask) s.mask = f(*s.mask);
    if (s.latents) {
        s.latents->R = f(s.latents->R);
        s.latents->Z = f(s.latents->Z);
        s.latents->C = f(s.latents->C);
        s.latents->T = f(s.latents->T);
        s.latents->A = f(s.latents->A);
    }
}

Tensor crop(const Tensor& t, int y0, int x0, int size) {
    Tensor y(t.n(), t.c(), size, size);
    for (int b = 0; b < t.n(); ++b)
        for (int c = 0; c < t.c(); ++c)
            for (int i = 0; i < size; ++i)
                for (int j = 0; j < size; ++j) y(b, c, i, j) = t(b, c, y0 + i, x0 + j);
    return y;
}

}  // namespace

SnowSample sample_patch(const SnowSample& s, int size, std::mt19937_64& rng) {
    if (s.snowy.h() < size || s.snowy.w() < size) {
        throw DimensionError("sample_patch: image " + shape_str(s.snowy) +
                             " smaller than patch size " + std::to_string(size));
    }
    std::uniform_int_distribution<int> dy(0, s.snowy.h() - size);
    std::uniform_int_distribution<int> dx(0, s.snowy.w() - size);
    const int y0 = dy(rng), x0 = dx(rng);
    SnowSample out = s;
    apply_joint(out, [&](const Tensor& t) { return crop(t, y0, x0, size); });
    return out;
}

SnowSample augment(const SnowSample& s, const AugmentFlags& flags, std::mt19937_64& rng) {
    SnowSample out = s;
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> quarter(0, 3);
    if (flags.hflip && coin(rng)) apply_joint(out, [](const Tensor& t) { return hflip(t); });
    if (flags.vflip && coin(rng)) apply_joint(out, [](const Tensor& t) { return vflip(t); });
    if (flags.rot90) {
        if (out.snowy.h() != out.snowy.w()) {
            throw DimensionError("augment: rot90 requires square patches");
        }
        const int k = quarter(rng);
        if (k) apply_joint(out, [&](const Tensor& t) { return rot90(t, k); });
    }
    return out;
}

void parse_config_file(const fs::path& path, ModelConfig& model, TrainConfig& train) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParamError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [&](std::string& s) {
            s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
            s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
        };
        trim(key);
        trim(value);

        auto as_int = [&] { return std::stoi(value); };
        auto as_real = [&] { return std::stod(value); };
        auto as_bool = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw ParamError("config line " + std::to_string(lineno) + ": bad boolean '" + value +
                             "'");
        };

        try {
            if (key == "embed_dim") model.embed_dim = as_int();
            else if (key == "mask_channels") model.mask_channels = as_int();
            else if (key == "num_blocks") model.masknet.num_blocks = as_int();
            else if (key == "use_sa") model.masknet.use_sa = as_bool();
            else if (key == "use_ca") model.masknet.use_ca = as_bool();
            else if (key == "levels") model.gfnet.levels = as_int();
            else if (key == "fusion_mode")
                model.gfnet.fusion =
                    value == "add_conv" ? FusionMode::add_conv : FusionMode::concat_conv;
            else if (key == "guidance_mode")
                model.gfnet.guidance =
                    value == "concat" ? GuidanceMode::concat : GuidanceMode::residual;
            else if (key == "gf_conv_stack") model.gf_conv_stack = as_bool();
            else if (key == "marb_scale")
                model.marb.scale = value == "single" ? ScaleMode::single : ScaleMode::multi;
            else if (key == "marb_agg")
                model.marb.agg = value == "single" ? AggMode::single : AggMode::multi;
            else if (key == "marb_count") model.marb.count = as_int();
            else if (key == "guidance_case") model.guidance = guidance_case_from_name(value);
            else if (key == "patch_size") train.patch_size = as_int();
            else if (key == "batch_size") train.batch_size = as_int();
            else if (key == "lr_init") train.lr_init = as_real();
            else if (key == "lr_halve_every") train.lr_halve_every = as_int();
            else if (key == "epochs") train.epochs = as_int();
            else if (key == "seed") train.seed = std::stoull(value);
            else if (key == "lambda") train.lambda = as_real();
            else if (key == "augment_hflip") train.augment_hflip = as_bool();
            else if (key == "augment_vflip") train.augment_vflip = as_bool();
            else if (key == "augment_rot90") train.augment_rot90 = as_bool();
            else if (key == "clip_grad") train.clip_grad = as_bool();
            else if (key == "clip_value") train.clip_value = as_real();
            else
                throw ParamError("config line " + std::to_string(lineno) + ": unknown key '" +
                                 key + "'");
        } catch (const std::invalid_argument&) {
            throw ParamError("config line " + std::to_string(lineno) + ": bad value '" + value +
                             "' for key '" + key + "'");
        }
    }
    model.propagate();
}

void write_metrics_csv_header(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "epoch,step,loss_total,loss_rec,loss_mask,lr,psnr,ssim\n";
}

void append_metrics_csv(const fs::path& path, const MetricsRecord& rec) {
    std::ofstream out(path, std::ios::app);
    out << rec.epoch << ',' << rec.step << ',' << rec.loss_total << ',' << rec.loss_rec << ','
        << rec.loss_mask << ',' << rec.lr << ',';
    if (!std::isnan(rec.psnr)) out << rec.psnr;
    out << ',';
    if (!std::isnan(rec.ssim)) out << rec.ssim;
    out << '\n';
}

int num_workers_from_env() {
    const char* env = std::getenv("SMGARN_NUM_WORKERS");
    if (!env) return 0;
    const int n = std::atoi(env);
    return n < 0 ? 0 : n;
}

namespace {

struct Batch {
    Tensor snowy, clean, mask;
    bool has_mask = false;
};

Batch assemble_batch(const std::vector<SnowSample>& samples, const std::vector<std::size_t>& idx,
                     const TrainConfig& cfg, bool need_mask, std::mt19937_64& rng) {
    const int B = static_cast<int>(idx.size());
    const int P = cfg.patch_size;
    Batch batch;
    batch.snowy = Tensor(B, 3, P, P);
    batch.clean = Tensor(B, 3, P, P);
    if (need_mask) batch.mask = Tensor(B, 1, P, P);
    batch.has_mask = need_mask;
    const AugmentFlags flags{cfg.augment_hflip, cfg.augment_vflip, cfg.augment_rot90};
    for (int b = 0; b < B; ++b) {
        SnowSample s = sample_patch(samples[idx[b]], P, rng);
        s = augment(s, flags, rng);
        const std::int64_t plane = static_cast<std::int64_t>(P) * P;
        std::copy_n(s.snowy.data(), 3 * plane, batch.snowy.data() + b * 3 * plane);
        std::copy_n(s.clean->data(), 3 * plane, batch.clean.data() + b * 3 * plane);
        if (need_mask) std::copy_n(s.mask->data(), plane, batch.mask.data() + b * plane);
    }
    return batch;
}

// Bounded single-producer queue used when SMGARN_NUM_WORKERS >= 1. The
// producer draws from the epoch rng in the same order as the inline path,
// so batch contents are identical either way.
class BatchQueue {
public:
    explicit BatchQueue(std::size_t cap) : cap_(cap) {}

    void push(Batch&& b) {
        std::unique_lock lk(mu_);
        cv_pop_.wait(lk, [&] { return q_.size() < cap_; });
        q_.push_back(std::move(b));
        cv_push_.notify_one();
    }
    Batch pop() {
        std::unique_lock lk(mu_);
        cv_push_.wait(lk, [&] { return !q_.empty(); });
        Batch b = std::move(q_.front());
        q_.erase(q_.begin());
        cv_pop_.notify_one();
        return b;
    }

private:
    std::size_t cap_;
    std::vector<Batch> q_;
    std::mutex mu_;
    std::condition_variable cv_push_, cv_pop_;
};

}  // namespace

TrainResult train_loop(Smgarn& model, const TrainConfig& cfg,
                       const std::vector<SnowSample>& samples, const fs::path& out_dir,
                       const std::optional<fs::path>& resume,
                       const std::function<void(const MetricsRecord&)>& per_step) {
    if (samples.empty()) throw DataError("train_loop: empty sample list");
    if (cfg.batch_size < 1) throw ParamError("train_loop: batch_size must be >= 1");
    const GuidanceCase gc = model.config().guidance;
    const bool need_mask = gc == GuidanceCase::case3_full || gc == GuidanceCase::case4_gt_mask;
    for (const auto& s : samples) {
        if (!s.clean) throw DataError("train_loop: sample '" + s.id + "' lacks a clean image");
        if (need_mask && !s.mask) {
            throw DataError("train_loop: sample '" + s.id + "' lacks a mask required by " +
                            guidance_case_name(gc));
        }
    }

    Adam opt(model.params());
    int start_epoch = 0;
    long long gstep = 0;
    if (resume) {
        CheckpointData ckpt = load_checkpoint(*resume);
        restore_params(ckpt, model.params());
        if (ckpt.has_optimizer) opt.restore(ckpt.adam_t, ckpt.opt_m, ckpt.opt_v);
        start_epoch = ckpt.epoch;
        gstep = ckpt.step;
    }

    const bool to_disk = !out_dir.empty();
    fs::path metrics_path;
    if (to_disk) {
        fs::create_directories(out_dir);
        metrics_path = out_dir / "metrics.csv";
        if (!resume || !fs::exists(metrics_path)) write_metrics_csv_header(metrics_path);
    }

    TrainResult result;
    const int workers = num_workers_from_env();

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        // Per-epoch stream keeps the schedule position reproducible on resume.
        std::mt19937_64 rng(cfg.seed + 0x51ed2701ULL * static_cast<unsigned long long>(epoch + 1));
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<std::vector<std::size_t>> batches;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
            batches.emplace_back(order.begin() + i,
                                 order.begin() +
                                     std::min(order.size(), i + static_cast<std::size_t>(
                                                                    cfg.batch_size)));
        }

        BatchQueue queue(2);
        std::thread producer;
        std::size_t inline_next = 0;
        if (workers >= 1) {
            producer = std::thread([&] {
                for (const auto& idx : batches) {
                    queue.push(assemble_batch(samples, idx, cfg, need_mask, rng));
                }
            });
        }

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            Batch batch = workers >= 1
                              ? queue.pop()
                              : assemble_batch(samples, batches[inline_next++], cfg, need_mask,
                                               rng);

            Smgarn::Output out =
                model.forward(batch.snowy, gc == GuidanceCase::case4_gt_mask ? &batch.mask
                                                                             : nullptr);
            Tensor d_clear;
            const double loss_rec = l1_loss(out.clear, batch.clean, &d_clear);

            double loss_mask = 0.0;
            Tensor d_mask;
            const bool mask_supervised = gc == GuidanceCase::case3_full && cfg.lambda > 0.0;
            if (out.mask && batch.has_mask) {
                loss_mask = l1_loss(*out.mask, batch.mask, mask_supervised ? &d_mask : nullptr);
            }
            const LossBundle bundle = total_loss(loss_rec, loss_mask, cfg.lambda,
                                                 gc == GuidanceCase::case3_full && out.mask.has_value());

            if (!std::isfinite(bundle.total)) {
                throw TrainError("non-finite loss at step " + std::to_string(gstep + 1));
            }

            model.zero_grad();
            if (mask_supervised) {
                for (std::int64_t i = 0; i < d_mask.size(); ++i) d_mask[i] *= cfg.lambda;
                model.backward(d_clear, &d_mask);
            } else {
                model.backward(d_clear, nullptr);
            }

            if (cfg.clip_grad) {
                double norm_sq = 0.0;
                for (Param* p : model.params())
                    for (std::int64_t i = 0; i < p->grad.size(); ++i)
                        norm_sq += p->grad[i] * p->grad[i];
                const double norm = std::sqrt(norm_sq);
                if (norm > cfg.clip_value) {
                    const double scale = cfg.clip_value / norm;
                    for (Param* p : model.params())
                        for (std::int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
                }
            }

            opt.step(lr);
            ++gstep;

            MetricsRecord rec;
            rec.epoch = epoch;
            rec.step = gstep;
            rec.loss_total = bundle.total;
            rec.loss_rec = bundle.reconstruct;
            rec.loss_mask = loss_mask;
            rec.lr = lr;
            result.log.push_back(rec);
            if (to_disk) append_metrics_csv(metrics_path, rec);
            if (per_step) per_step(rec);
            result.final_loss_total = bundle.total;
            result.final_loss_rec = bundle.reconstruct;
            result.final_loss_mask = loss_mask;
        }

        if (producer.joinable()) producer.join();

        if (to_disk) {
            std::ostringstream name;
            name << "epoch_" << std::setw(4) << std::setfill('0') << (epoch + 1) << ".ckpt";
            const fs::path ckpt_path = out_dir / name.str();
            save_checkpoint(ckpt_path, model.config(), model.params(), &opt, epoch + 1, gstep);
            result.last_checkpoint = ckpt_path;
        }
    }
    result.steps = gstep;
    return result;
}

}  // namespace smgarn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "smgarn/io.hpp"
#include "smgarn/synth.hpp"

using namespace smgarn;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SMGARN_CLI_PATH;

struct CmdResult {
    int exit_code;
    std::string out;
};

CmdResult run(const std::string& args) {
    const fs::path out_file = fs::temp_directory_path() / "smgarn_cli_out.txt";
    const std::string cmd = kCli + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(status), ss.str()};
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("smgarn_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_tiny_config(const fs::path& p, const std::string& extra = "") {
    std::ofstream out(p);
    out << "embed_dim = 6\nmarb_count = 1\npatch_size = 16\nbatch_size = 2\nepochs = 1\n"
        << extra;
}

}  // namespace

TEST_CASE("synth: manifest ids, determinism, usage errors") {
    fs::path a = temp_dir("synth_a"), b = temp_dir("synth_b");

    CmdResult r = run("synth --out " + a.string() + " --count 4 --size 32 32 --seed 5");
    CHECK(r.exit_code == 0);
    std::string manifest = read_file(a / "manifest.json");
    CHECK(manifest.find("0001") != std::string::npos);
    CHECK(manifest.find("0004") != std::string::npos);

    // Same seed -> bitwise identical files.
    CHECK(run("synth --out " + b.string() + " --count 4 --size 32 32 --seed 5").exit_code == 0);
    for (const char* rel : {"snowy/0001.png", "gt/0003.png", "mask/0004.png"}) {
        CHECK(read_file(a / rel) == read_file(b / rel));
    }

    CHECK(run("synth --out " + a.string() + " --count 0 --size 32 32").exit_code == 1);
    CHECK(run("synth --count 2").exit_code == 1);          // missing --out
    CHECK(run("bogus_command").exit_code == 1);            // unknown subcommand
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("train: checkpoints, resume, config and data errors") {
    fs::path data = temp_dir("train_data");
    fs::path out = temp_dir("train_out");
    REQUIRE(run("synth --out " + data.string() + " --count 2 --size 32 32 --seed 1").exit_code ==
            0);
    fs::path cfg = out / "train.cfg";
    write_tiny_config(cfg);

    CmdResult r = run("train --config " + cfg.string() + " --data " + data.string() + " --out " +
                      (out / "run").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "run" / "epoch_0001.ckpt"));
    CHECK(fs::exists(out / "run" / "metrics.csv"));

    // Resume continues the epoch counter.
    write_tiny_config(cfg, "epochs = 2\n");
    CmdResult r2 = run("train --config " + cfg.string() + " --data " + data.string() + " --out " +
                       (out / "run2").string() + " --resume " +
                       (out / "run" / "epoch_0001.ckpt").string());
    CHECK(r2.exit_code == 0);
    CHECK(r2.out.find("epoch 1") != std::string::npos);
    CHECK(fs::exists(out / "run2" / "epoch_0002.ckpt"));

    // Malformed config -> exit 1 with the line number.
    fs::path bad = out / "bad.cfg";
    {
        std::ofstream o(bad);
        o << "embed_dim = 6\ngarbage line here\n";
    }
    CmdResult r3 = run("train --config " + bad.string() + " --data " + data.string() + " --out " +
                       (out / "run3").string());
    CHECK(r3.exit_code == 1);
    CHECK(r3.out.find("line 2") != std::string::npos);

    // Missing mask/ under case3 -> exit 2 naming the directory.
    fs::remove_all(data / "mask");
    CmdResult r4 = run("train --config " + cfg.string() + " --data " + data.string() + " --out " +
                       (out / "run4").string());
    CHECK(r4.exit_code == 2);
    CHECK(r4.out.find("mask") != std::string::npos);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("eval and infer against a trained checkpoint") {
    fs::path data = temp_dir("ei_data");
    fs::path out = temp_dir("ei_out");
    REQUIRE(run("synth --out " + data.string() + " --count 2 --size 32 32 --seed 2").exit_code ==
            0);
    fs::path cfg = out / "train.cfg";
    write_tiny_config(cfg);
    REQUIRE(run("train --config " + cfg.string() + " --data " + data.string() + " --out " +
                (out / "run").string())
                .exit_code == 0);
    const std::string ckpt = (out / "run" / "epoch_0001.ckpt").string();

    // eval prints the two-decimal summary pair.
    CmdResult ev = run("eval --ckpt " + ckpt + " --data " + data.string() + " --out " +
                       (out / "report").string());
    CHECK(ev.exit_code == 0);
    {
        // last non-empty line has the form XX.XX/0.XX
        std::istringstream ss(ev.out);
        std::string line, last;
        while (std::getline(ss, line))
            if (!line.empty()) last = line;
        const auto slash = last.find('/');
        REQUIRE(slash != std::string::npos);
        CHECK(last.substr(slash - 3, 1) == ".");
        CHECK(last.substr(last.size() - 3, 1) == ".");
    }
    CHECK(fs::exists(out / "report" / "report.csv"));

    // infer on a non-square image preserves its size.
    std::mt19937_64 rng(3);
    fs::path odd = out / "odd.png";
    save_image_rgb(odd, procedural_clean(97, 101, rng));
    CmdResult inf = run("infer --ckpt " + ckpt + " --in " + odd.string() + " --out " +
                        (out / "infer").string() + " --save-mask");
    CHECK(inf.exit_code == 0);
    Tensor res = load_image_rgb(out / "infer" / "odd.png");
    CHECK(res.h() == 97);
    CHECK(res.w() == 101);
    CHECK(fs::exists(out / "infer" / "odd_mask.png"));

    // Directory input: unreadable file listed on stderr, readable processed.
    fs::path batch = out / "batch";
    fs::create_directories(batch);
    save_image_rgb(batch / "ok.png", procedural_clean(24, 24, rng));
    {
        std::ofstream corrupt(batch / "broken.png");
        corrupt << "not a png";
    }
    CmdResult dir_inf = run("infer --ckpt " + ckpt + " --in " + batch.string() + " --out " +
                            (out / "infer2").string());
    CHECK(dir_inf.exit_code == 0);
    CHECK(fs::exists(out / "infer2" / "ok.png"));
    CHECK_FALSE(fs::exists(out / "infer2" / "broken.png"));
    CHECK(dir_inf.out.find("broken") != std::string::npos);

    // Missing checkpoint file -> exit 2.
    CHECK(run("eval --ckpt /nonexistent.ckpt --data " + data.string()).exit_code == 2);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("infer on a mask-free variant warns instead of writing a mask") {
    fs::path data = temp_dir("c1_data");
    fs::path out = temp_dir("c1_out");
    REQUIRE(run("synth --out " + data.string() + " --count 2 --size 32 32 --seed 4").exit_code ==
            0);
    fs::path cfg = out / "train.cfg";
    write_tiny_config(cfg, "guidance_case = case1_no_masknet\n");
    REQUIRE(run("train --config " + cfg.string() + " --data " + data.string() + " --out " +
                (out / "run").string())
                .exit_code == 0);

    std::mt19937_64 rng(5);
    fs::path img = out / "in.png";
    save_image_rgb(img, procedural_clean(24, 24, rng));
    CmdResult r = run("infer --ckpt " + (out / "run" / "epoch_0001.ckpt").string() + " --in " +
                      img.string() + " --out " + (out / "inf").string() + " --save-mask");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("warning") != std::string::npos);
    CHECK(fs::exists(out / "inf" / "in.png"));
    CHECK_FALSE(fs::exists(out / "inf" / "in_mask.png"));
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("ablate rejects unknown grids with the registry list") {
    fs::path data = temp_dir("ab_data");
    REQUIRE(run("synth --out " + data.string() + " --count 2 --size 32 32 --seed 6").exit_code ==
            0);
    CmdResult r = run("ablate --grid nonsense --data " + data.string());
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("masknet") != std::string::npos);
    CHECK(r.out.find("marb_count") != std::string::npos);
    fs::remove_all(data);
}

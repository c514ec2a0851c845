#include "smgarn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fs = std::filesystem;

namespace smgarn {

namespace {

constexpr char kArchiveMagic[8] = {'S', 'M', 'G', 'T', 'N', '1', '\n', '\0'};

std::uint8_t to_byte(double v) {
    const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(q);
}

}  // namespace

Tensor load_image_rgb(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw IoError("cannot read image '" + path.string() + "'");
    Tensor t(1, 3, m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            // OpenCV loads BGR
            t(0, 0, y, x) = row[x][2] / 255.0;
            t(0, 1, y, x) = row[x][1] / 255.0;
            t(0, 2, y, x) = row[x][0] / 255.0;
        }
    }
    return t;
}

Tensor load_image_gray(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw IoError("cannot read image '" + path.string() + "'");
    Tensor t(1, 1, m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < m.cols; ++x) t(0, 0, y, x) = row[x] / 255.0;
    }
    return t;
}

void save_image_rgb(const fs::path& path, const Tensor& img) {
    if (img.n() != 1 || img.c() != 3) {
        throw DimensionError("save_image_rgb: expected (1,3,H,W), got " + shape_str(img));
    }
    cv::Mat m(img.h(), img.w(), CV_8UC3);
    for (int y = 0; y < img.h(); ++y) {
        cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.w(); ++x) {
            row[x][2] = to_byte(img(0, 0, y, x));
            row[x][1] = to_byte(img(0, 1, y, x));
            row[x][0] = to_byte(img(0, 2, y, x));
        }
    }
    if (!cv::imwrite(path.string(), m)) {
        throw IoError("cannot write image '" + path.string() + "'");
    }
}

void save_image_gray(const fs::path& path, const Tensor& img) {
    if (img.n() != 1 || img.c() != 1) {
        throw DimensionError("save_image_gray: expected (1,1,H,W), got " + shape_str(img));
    }
    cv::Mat m(img.h(), img.w(), CV_8UC1);
    for (int y = 0; y < img.h(); ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.w(); ++x) row[x] = to_byte(img(0, 0, y, x));
    }
    if (!cv::imwrite(path.string(), m)) {
        throw IoError("cannot write image '" + path.string() + "'");
    }
}

void atomic_write_file(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

void save_tensor_archive(const fs::path& path, const std::map<std::string, Tensor>& tensors,
                         const std::string& meta_json) {
    nlohmann::json header;
    header["meta"] = nlohmann::json::parse(meta_json);
    std::uint64_t offset = 0;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = {t.n(), t.c(), t.h(), t.w()};
        e["offset"] = offset;
        entries.push_back(e);
        offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
    }
    header["tensors"] = entries;
    const std::string hs = header.dump();

    std::string bytes;
    bytes.reserve(sizeof(kArchiveMagic) + 8 + hs.size() + offset);
    bytes.append(kArchiveMagic, sizeof(kArchiveMagic));
    std::uint64_t hlen = hs.size();
    bytes.append(reinterpret_cast<const char*>(&hlen), 8);
    bytes.append(hs);
    for (const auto& [name, t] : tensors) {
        bytes.append(reinterpret_cast<const char*>(t.data()),
                     static_cast<std::size_t>(t.size()) * sizeof(double));
    }
    atomic_write_file(path, bytes);
}

TensorArchive load_tensor_archive(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive '" + path.string() + "'");
    char magic[sizeof(kArchiveMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0) {
        throw IoError("'" + path.string() + "' is not a tensor archive");
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("truncated archive header in '" + path.string() + "'");
    nlohmann::json header = nlohmann::json::parse(hs);

    TensorArchive arc;
    arc.meta_json = header.value("meta", nlohmann::json::object()).dump();
    const std::streampos data_start = in.tellg();
    for (const auto& e : header["tensors"]) {
        const auto shape = e["shape"];
        Tensor t(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>(),
                 shape[3].get<int>());
        in.seekg(data_start + static_cast<std::streamoff>(e["offset"].get<std::uint64_t>()));
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw IoError("truncated tensor data in '" + path.string() + "'");
        arc.tensors.emplace(e["name"].get<std::string>(), std::move(t));
    }
    return arc;
}

Dataset Dataset::open(const fs::path& root) {
    const fs::path snowy_dir = root / "snowy";
    if (!fs::is_directory(snowy_dir)) {
        throw DataError("dataset '" + root.string() + "' has no snowy/ directory");
    }
    Dataset d;
    d.root_ = root;
    for (const auto& de : fs::directory_iterator(snowy_dir)) {
        if (de.path().extension() != ".png") continue;
        DatasetEntry e;
        e.id = de.path().stem().string();
        e.has_clean = fs::exists(root / "gt" / (e.id + ".png"));
        e.has_mask = fs::exists(root / "mask" / (e.id + ".png"));
        e.has_latents = fs::exists(root / "latents" / (e.id + ".tns"));
        d.entries_.push_back(std::move(e));
    }
    std::sort(d.entries_.begin(), d.entries_.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
    if (d.entries_.empty()) {
        throw DataError("dataset '" + root.string() + "' contains no snowy images");
    }
    // A gt/ or mask/ file with no matching snowy image means a broken pairing.
    for (const char* sub : {"gt", "mask"}) {
        const fs::path dir = root / sub;
        if (!fs::is_directory(dir)) continue;
        for (const auto& de : fs::directory_iterator(dir)) {
            if (de.path().extension() != ".png") continue;
            const std::string id = de.path().stem().string();
            if (!fs::exists(snowy_dir / (id + ".png"))) {
                throw DataError("dataset pairing error: " + std::string(sub) + "/" + id +
                                " has no snowy counterpart");
            }
        }
    }
    return d;
}

bool Dataset::all_have_clean() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const DatasetEntry& e) { return e.has_clean; });
}

bool Dataset::all_have_mask() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const DatasetEntry& e) { return e.has_mask; });
}

SnowSample Dataset::load(std::size_t index) const {
    const DatasetEntry& e = entries_.at(index);
    SnowSample s;
    s.id = e.id;
    s.snowy = load_image_rgb(root_ / "snowy" / (e.id + ".png"));
    if (e.has_clean) {
        s.clean = load_image_rgb(root_ / "gt" / (e.id + ".png"));
        if (s.clean->h() != s.snowy.h() || s.clean->w() != s.snowy.w()) {
            throw DataError("dataset pairing error: snowy/" + e.id + " and gt/" + e.id +
                            " have different dimensions");
        }
    }
    if (e.has_mask) {
        s.mask = load_image_gray(root_ / "mask" / (e.id + ".png"));
        if (s.mask->h() != s.snowy.h() || s.mask->w() != s.snowy.w()) {
            throw DataError("dataset pairing error: snowy/" + e.id + " and mask/" + e.id +
                            " have different dimensions");
        }
    }
    if (e.has_latents) {
        TensorArchive arc = load_tensor_archive(root_ / "latents" / (e.id + ".tns"));
        SnowLatents lat;
        lat.R = arc.tensors.at("R");
        lat.Z = arc.tensors.at("Z");
        lat.C = arc.tensors.at("C");
        lat.T = arc.tensors.at("T");
        lat.A = arc.tensors.at("A");
        s.latents = std::move(lat);
    }
    return s;
}

void write_dataset(const std::vector<SnowSample>& samples, const fs::path& root,
                   bool persist_latents) {
    fs::create_directories(root / "snowy");
    for (const auto& s : samples) {
        save_image_rgb(root / "snowy" / (s.id + ".png"), s.snowy);
        if (s.clean) {
            fs::create_directories(root / "gt");
            save_image_rgb(root / "gt" / (s.id + ".png"), *s.clean);
        }
        if (s.mask) {
            fs::create_directories(root / "mask");
            save_image_gray(root / "mask" / (s.id + ".png"), *s.mask);
        }
        if (persist_latents && s.latents) {
            fs::create_directories(root / "latents");
            std::map<std::string, Tensor> t{{"R", s.latents->R},
                                            {"Z", s.latents->Z},
                                            {"C", s.latents->C},
                                            {"T", s.latents->T},
                                            {"A", s.latents->A}};
            save_tensor_archive(root / "latents" / (s.id + ".tns"), t);
        }
    }
}

}  // namespace smgarn

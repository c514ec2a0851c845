#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "smgarn/synth.hpp"
#include "smgarn/tensor.hpp"

namespace smgarn {

// --- PNG image IO (8-bit at file boundaries, float64 in memory) ---

Tensor load_image_rgb(const std::filesystem::path& path);   // (1,3,H,W)
Tensor load_image_gray(const std::filesystem::path& path);  // (1,1,H,W)
void save_image_rgb(const std::filesystem::path& path, const Tensor& img);
void save_image_gray(const std::filesystem::path& path, const Tensor& img);

// --- Named-tensor archive ---
// Self-describing container: magic + JSON header (names, shapes, offsets)
// followed by raw little-endian float64 data. Used for persisted latents
// and as the checkpoint payload.

void save_tensor_archive(const std::filesystem::path& path,
                         const std::map<std::string, Tensor>& tensors,
                         const std::string& meta_json = "{}");
struct TensorArchive {
    std::map<std::string, Tensor> tensors;
    std::string meta_json;
};
TensorArchive load_tensor_archive(const std::filesystem::path& path);

// Writes to <path>.tmp then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

// --- Paired dataset directory ---
// root/snowy/<id>.png (required), root/gt/<id>.png, root/mask/<id>.png,
// root/latents/<id>.tns (all optional per id set; see docs).

struct DatasetEntry {
    std::string id;
    bool has_clean = false;
    bool has_mask = false;
    bool has_latents = false;
};

class Dataset {
public:
    static Dataset open(const std::filesystem::path& root);

    std::size_t size() const { return entries_.size(); }
    const std::vector<DatasetEntry>& entries() const { return entries_; }
    const std::filesystem::path& root() const { return root_; }

    bool all_have_clean() const;
    bool all_have_mask() const;

    SnowSample load(std::size_t index) const;

private:
    std::filesystem::path root_;
    std::vector<DatasetEntry> entries_;
};

void write_dataset(const std::vector<SnowSample>& samples, const std::filesystem::path& root,
                   bool persist_latents = false);

}  // namespace smgarn

#pragma once

#include <string>
#include <vector>

#include "groupseg/image_io.hpp"
#include "groupseg/tokenizer.hpp"

namespace groupseg {

struct DatasetEntry {
    std::string image_file;  // relative to the dataset directory
    std::string caption;
};

// A generated split on disk: index.tsv plus images, masks, and the shared
// word lists.
struct Dataset {
    std::string dir;
    std::vector<DatasetEntry> entries;

    std::int64_t size() const { return static_cast<std::int64_t>(entries.size()); }
    RgbImage image(std::int64_t i) const;
    // Mask file name derives from the image name (img_ -> msk_, .ppm -> .pgm).
    GrayImage mask(std::int64_t i) const;
    std::string vocab_path() const { return dir + "/vocab.txt"; }
    std::string nouns_path() const { return dir + "/nouns.txt"; }
    std::string classes_path() const { return dir + "/classes.txt"; }
};

Dataset load_dataset(const std::string& dir);

// One name per line; line 0 must be the background class.
std::vector<std::string> load_class_list(const std::string& path);

}  // namespace groupseg

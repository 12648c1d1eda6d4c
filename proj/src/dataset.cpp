#include "groupseg/dataset.hpp"

#include <fstream>

#include "groupseg/errors.hpp"

namespace groupseg {

RgbImage Dataset::image(std::int64_t i) const {
    if (i < 0 || i >= size()) throw data_error("dataset index " + std::to_string(i) +
                                               " out of range");
    return read_ppm(dir + "/" + entries[static_cast<std::size_t>(i)].image_file);
}

GrayImage Dataset::mask(std::int64_t i) const {
    if (i < 0 || i >= size()) throw data_error("dataset index " + std::to_string(i) +
                                               " out of range");
    std::string name = entries[static_cast<std::size_t>(i)].image_file;
    auto at = name.rfind("img_");
    if (at == std::string::npos)
        throw data_error("cannot derive mask name from " + name);
    name.replace(at, 4, "msk_");
    auto dot = name.rfind(".ppm");
    if (dot == std::string::npos)
        throw data_error("cannot derive mask name from " + name);
    name.replace(dot, 4, ".pgm");
    return read_pgm(dir + "/" + name);
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/index.tsv", std::ios::binary);
    if (!in) throw data_error("cannot open dataset index " + dir + "/index.tsv");
    Dataset ds;
    ds.dir = dir;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            throw data_error("malformed index line " + std::to_string(lineno) + " in " + dir);
        ds.entries.push_back(DatasetEntry{line.substr(0, tab), line.substr(tab + 1)});
    }
    if (ds.entries.empty()) throw data_error("dataset index " + dir + " is empty");
    return ds;
}

std::vector<std::string> load_class_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open class list " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    if (out.size() < 2)
        throw data_error("class list " + path + " needs background plus one class");
    if (out.front() != "background")
        throw data_error("class list " + path + " must start with 'background'");
    return out;
}

}  // namespace groupseg

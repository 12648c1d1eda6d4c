#include "groupseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "groupseg/errors.hpp"

namespace groupseg {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

// All integers and doubles are stored little-endian.
template <class T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw data_error("checkpoint truncated");
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Shape& shape,
                     const std::vector<double>& data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw data_error("checkpoint record '" + name + "' has " +
                         std::to_string(data.size()) + " values for shape " + shape_str(shape));
    tensors[name] = Record{shape, data};
}

const Checkpoint::Record& Checkpoint::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw data_error("checkpoint is missing tensor '" + name + "'");
    return it->second;
}

bool Checkpoint::has(const std::string& name) const { return tensors.count(name) != 0; }

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(os, ckpt.version);
    write_le<std::uint64_t>(os, ckpt.step);
    for (std::uint64_t w : ckpt.rng_state) write_le<std::uint64_t>(os, w);
    write_le<std::uint64_t>(os, ckpt.tensors.size());
    for (const auto& [name, rec] : ckpt.tensors) {
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.shape.size()));
        for (std::int64_t d : rec.shape) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        for (double v : rec.data) write_le<double>(os, v);
    }
    if (!os) throw data_error("write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open checkpoint '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw data_error("'" + path + "' is not a checkpoint file");
    Checkpoint ckpt;
    ckpt.version = read_le<std::uint32_t>(is);
    if (ckpt.version != 1)
        throw data_error("unsupported checkpoint version " + std::to_string(ckpt.version));
    ckpt.step = read_le<std::uint64_t>(is);
    for (auto& w : ckpt.rng_state) w = read_le<std::uint64_t>(is);
    std::uint64_t count = read_le<std::uint64_t>(is);
    for (std::uint64_t t = 0; t < count; ++t) {
        std::uint32_t name_len = read_le<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw data_error("checkpoint truncated");
        std::uint32_t rank = read_le<std::uint32_t>(is);
        Shape shape(rank);
        std::int64_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<std::int64_t>(read_le<std::uint64_t>(is));
            numel *= d;
        }
        std::vector<double> data(static_cast<std::size_t>(numel));
        for (auto& v : data) v = read_le<double>(is);
        ckpt.tensors[name] = Checkpoint::Record{std::move(shape), std::move(data)};
    }
    return ckpt;
}

}  // namespace groupseg

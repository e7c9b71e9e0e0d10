#include "voxnav/checkpoint.hpp"

#include <fstream>
#include <map>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {
constexpr char kMagic[4] = {'V', 'N', 'W', 'T'};
}

void save_checkpoint(const std::string& path, const NamedParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kCheckpointVersion);
    for (const auto& [name, t] : params) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
        for (double x : t.data()) write_f64(os, x);
    }
    if (!os) throw IoError("write failure on checkpoint: " + path);
}

NamedParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4))
        throw IoError("bad magic in checkpoint: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    NamedParams out;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw IoError("truncated checkpoint name");
        const std::uint32_t ndim = read_u32(is);
        Shape shape;
        std::int64_t count = 1;
        for (std::uint32_t i = 0; i < ndim; ++i) {
            const std::uint32_t d = read_u32(is);
            if (d == 0) throw IoError("zero dimension in checkpoint");
            shape.push_back(static_cast<int>(d));
            count *= d;
        }
        std::vector<double> data(static_cast<std::size_t>(count));
        for (auto& x : data) x = read_f64(is);
        out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    return out;
}

void load_checkpoint_into(const std::string& path, const NamedParams& params) {
    NamedParams stored = load_checkpoint(path);
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : stored) by_name.emplace(name, t);
    for (const auto& [name, target] : params) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw IoError("checkpoint missing parameter: " + name);
        if (it->second.shape() != target.shape())
            throw IoError("checkpoint shape mismatch for parameter: " + name);
        const_cast<Tensor&>(target).data() = it->second.data();
    }
}

}  // namespace voxnav

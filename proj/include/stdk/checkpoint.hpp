#pragma once

// Versioned binary checkpoint: magic "STDK", format version, then named
// parameter blocks (name length, name, shape, raw little-endian f64 data).
// Round-trips bit-exactly.

#include <fstream>
#include <string>
#include <vector>

#include "stdk/autodiff.hpp"
#include "stdk/common.hpp"

namespace stdk {

inline constexpr uint32_t kCheckpointVersion = 1;

struct TensorBlock {
    std::string name;
    ad::Shape shape;
    std::vector<double> data;
};

inline void save_checkpoint(std::ostream& os, const std::vector<TensorBlock>& blocks) {
    os.write("STDK", 4);
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        write_u32(os, static_cast<uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        write_u32(os, static_cast<uint32_t>(b.shape.size()));
        for (size_t d : b.shape) write_u64(os, d);
        for (double x : b.data) write_f64(os, x);
    }
    if (!os) throw io_error("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, const std::vector<TensorBlock>& blocks) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open checkpoint for writing: " + path);
    save_checkpoint(os, blocks);
}

inline std::vector<TensorBlock> load_checkpoint(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string_view(magic, 4) != "STDK")
        throw parse_error("checkpoint: bad magic, expected STDK");
    uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw parse_error(strf("checkpoint: unsupported format version %u", version));
    uint32_t n_blocks = read_u32(is);
    std::vector<TensorBlock> blocks;
    blocks.reserve(n_blocks);
    for (uint32_t i = 0; i < n_blocks; ++i) {
        TensorBlock b;
        uint32_t name_len = read_u32(is);
        b.name.resize(name_len);
        is.read(b.name.data(), name_len);
        if (!is) throw parse_error("checkpoint: truncated block name");
        uint32_t ndim = read_u32(is);
        b.shape.resize(ndim);
        for (auto& d : b.shape) d = static_cast<size_t>(read_u64(is));
        b.data.resize(ad::shape_size(b.shape));
        for (auto& x : b.data) x = read_f64(is);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

inline std::vector<TensorBlock> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint: " + path);
    return load_checkpoint(is);
}

inline std::vector<TensorBlock> snapshot_parameters(std::span<const ad::Parameter* const> params) {
    std::vector<TensorBlock> blocks;
    blocks.reserve(params.size());
    for (const ad::Parameter* p : params)
        blocks.push_back({p->name, p->value.shape(), p->value.data()});
    return blocks;
}

// Assigns stored blocks into live parameters, matching by name.
inline void restore_parameters(std::span<ad::Parameter* const> params,
                               const std::vector<TensorBlock>& blocks) {
    for (ad::Parameter* p : params) {
        const TensorBlock* found = nullptr;
        for (const auto& b : blocks)
            if (b.name == p->name) {
                found = &b;
                break;
            }
        if (!found) throw parse_error("checkpoint: missing parameter block '" + p->name + "'");
        if (found->shape != p->value.shape())
            throw shape_error(strf("checkpoint: block '%s' has shape %s, expected %s",
                                   p->name.c_str(), ad::shape_str(found->shape).c_str(),
                                   ad::shape_str(p->value.shape()).c_str()));
        p->value.data() = found->data;
        p->value.zero_grad();
    }
}

}  // namespace stdk

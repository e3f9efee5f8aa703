#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/params.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Checkpoint format, shared repo-wide: a text manifest listing one tensor per
// line (name, dtype tag, shape, byte offset, byte length) plus a companion
// binary file of little-endian f32 values in manifest order.
//
//   <base>.manifest:   signet-checkpoint v1
//                      conv1.w f32 32x3x3x3 0 3456
//                      ...
//   <base>.bin:        raw little-endian float payload
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "signet-checkpoint v1";

namespace detail {

inline void write_f32_le(std::ofstream& out, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    // Little-endian hosts write directly; this toolkit targets such hosts.
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
}

inline std::vector<std::size_t> parse_shape(const std::string& s) {
    std::vector<std::size_t> shape;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find('x', pos);
        if (next == std::string::npos) next = s.size();
        shape.push_back(static_cast<std::size_t>(std::stoull(s.substr(pos, next - pos))));
        pos = next + 1;
    }
    return shape;
}

}  // namespace detail

struct CheckpointEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t length = 0;  // bytes
};

inline void save_checkpoint(const std::filesystem::path& base, const ParamStore& params) {
    std::ofstream manifest(base.string() + ".manifest");
    require(manifest.good(), "checkpoint: cannot write " + base.string() + ".manifest");
    std::ofstream bin(base.string() + ".bin", std::ios::binary);
    require(bin.good(), "checkpoint: cannot write " + base.string() + ".bin");

    manifest << kCheckpointMagic << "\n";
    std::size_t offset = 0;
    for (const auto& e : params.entries()) {
        std::size_t bytes = e.tensor.size() * 4;
        manifest << e.name << " f32 " << shape_str(e.tensor.shape()) << " " << offset << " " << bytes
                 << "\n";
        detail::write_f32_le(bin, e.tensor.data());
        offset += bytes;
    }
    require(manifest.good() && bin.good(), "checkpoint: write failed for " + base.string());
}

inline std::vector<CheckpointEntry> read_manifest(const std::filesystem::path& base) {
    std::ifstream manifest(base.string() + ".manifest");
    require(manifest.good(), "checkpoint: cannot open " + base.string() + ".manifest");
    std::string line;
    std::getline(manifest, line);
    require(line == kCheckpointMagic,
            "checkpoint: unsupported format line '" + line + "', expected '" + kCheckpointMagic + "'");
    std::vector<CheckpointEntry> entries;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        CheckpointEntry e;
        std::string dtype, shape;
        ss >> e.name >> dtype >> shape >> e.offset >> e.length;
        require(!ss.fail(), "checkpoint: malformed manifest line '" + line + "'");
        require(dtype == "f32", "checkpoint: unsupported dtype '" + dtype + "' for '" + e.name + "'");
        e.shape = detail::parse_shape(shape);
        entries.push_back(std::move(e));
    }
    return entries;
}

/// Loads values into an already-built store; every store entry must appear in
/// the manifest with a matching shape.
inline void load_checkpoint(const std::filesystem::path& base, ParamStore& params) {
    auto entries = read_manifest(base);
    std::ifstream bin(base.string() + ".bin", std::ios::binary);
    require(bin.good(), "checkpoint: cannot open " + base.string() + ".bin");

    for (auto& p : params.entries()) {
        const CheckpointEntry* found = nullptr;
        for (const auto& e : entries)
            if (e.name == p.name) found = &e;
        require(found != nullptr, "checkpoint: manifest is missing tensor '" + p.name + "'");
        require(found->shape == p.tensor.shape(),
                "checkpoint: shape mismatch for '" + p.name + "': manifest " + shape_str(found->shape) +
                    " vs model " + shape_str(p.tensor.shape()));
        require(found->length == p.tensor.size() * 4,
                "checkpoint: byte length mismatch for '" + p.name + "'");
        bin.seekg(static_cast<std::streamoff>(found->offset));
        bin.read(reinterpret_cast<char*>(p.tensor.data().data()),
                 static_cast<std::streamsize>(found->length));
        require(bin.gcount() == static_cast<std::streamsize>(found->length),
                "checkpoint: truncated payload while reading '" + p.name + "'");
    }
}

}  // namespace signet

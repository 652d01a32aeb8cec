// Bit-exact checkpoint serialization for named double arrays.
//
// Layout: one version byte (0x01), then an ASCII header
//     arrays <count>\n
//     <name> <ndim> <dim0> ... <offset>\n   (offset into the payload, in doubles)
//     end\n
// followed by the raw little-endian double payload. Doubles are copied with
// memcpy so a save/load round trip reproduces every bit.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slogen/error.hpp"
#include "slogen/tensor.hpp"

namespace slogen {

inline constexpr unsigned char kCheckpointVersion = 0x01;

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, TensorPtr>>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot open checkpoint for writing: " + path);
    out.put(static_cast<char>(kCheckpointVersion));

    std::ostringstream header;
    header << "arrays " << arrays.size() << "\n";
    std::size_t offset = 0;
    for (const auto& [name, t] : arrays) {
        if (name.find_first_of(" \n") != std::string::npos) {
            fail(ErrorCategory::io, "checkpoint array name contains whitespace: '" + name + "'");
        }
        header << name << " " << t->shape.size();
        for (int d : t->shape) header << " " << d;
        header << " " << offset << "\n";
        offset += t->numel();
    }
    header << "end\n";
    std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));

    std::vector<char> buf;
    for (const auto& [name, t] : arrays) {
        buf.resize(t->data.size() * sizeof(double));
        std::memcpy(buf.data(), t->data.data(), buf.size());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) fail(ErrorCategory::io, "failed writing checkpoint: " + path);
}

struct CheckpointEntry {
    Shape shape;
    std::vector<double> data;
};

inline std::map<std::string, CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open checkpoint: " + path);
    int version = in.get();
    if (version != kCheckpointVersion) {
        fail(ErrorCategory::io, "unsupported checkpoint version in " + path);
    }

    std::string line;
    if (!std::getline(in, line)) fail(ErrorCategory::io, "truncated checkpoint header: " + path);
    std::istringstream first(line);
    std::string word;
    std::size_t count = 0;
    if (!(first >> word >> count) || word != "arrays") {
        fail(ErrorCategory::io, "malformed checkpoint header: " + path);
    }

    struct Pending {
        std::string name;
        Shape shape;
        std::size_t offset;
        std::size_t numel;
    };
    std::vector<Pending> pending;
    pending.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) fail(ErrorCategory::io, "truncated checkpoint header: " + path);
        std::istringstream row(line);
        Pending p;
        std::size_t ndim = 0;
        if (!(row >> p.name >> ndim)) fail(ErrorCategory::io, "malformed checkpoint entry: " + line);
        p.shape.resize(ndim);
        p.numel = 1;
        for (std::size_t d = 0; d < ndim; ++d) {
            if (!(row >> p.shape[d]) || p.shape[d] <= 0) {
                fail(ErrorCategory::io, "malformed checkpoint entry: " + line);
            }
            p.numel *= static_cast<std::size_t>(p.shape[d]);
        }
        if (!(row >> p.offset)) fail(ErrorCategory::io, "malformed checkpoint entry: " + line);
        pending.push_back(std::move(p));
    }
    if (!std::getline(in, line) || line != "end") {
        fail(ErrorCategory::io, "checkpoint header missing terminator: " + path);
    }

    std::streampos payload_start = in.tellg();
    std::map<std::string, CheckpointEntry> result;
    std::vector<char> buf;
    for (const Pending& p : pending) {
        if (result.count(p.name)) fail(ErrorCategory::io, "duplicate checkpoint array: " + p.name);
        in.seekg(payload_start + static_cast<std::streamoff>(p.offset * sizeof(double)));
        buf.resize(p.numel * sizeof(double));
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
            fail(ErrorCategory::io, "truncated checkpoint payload for array: " + p.name);
        }
        CheckpointEntry e;
        e.shape = p.shape;
        e.data.resize(p.numel);
        std::memcpy(e.data.data(), buf.data(), buf.size());
        result.emplace(p.name, std::move(e));
    }
    return result;
}

} // namespace slogen

#ifndef UQGAZE_CHECKPOINT_HPP
#define UQGAZE_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "network.hpp"

// Layout (all integers u32 little-endian):
//   "CAGZ" | version | tensor count | per tensor: rank, dims..., float32 LE data
namespace uqgaze {

inline constexpr char kCheckpointMagic[4] = {'C', 'A', 'G', 'Z'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) fail(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
    }
    [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const ModelParams<float>& model)
{
    std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    detail::put_u32(out, kCheckpointVersion);
    const auto params = model.parameters();
    detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const TensorF32* t : params) {
        detail::put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d : t->shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : t->values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

/// Rejects anything whose layout does not match the network topology exactly.
inline ModelParams<float> deserialize_checkpoint(const std::vector<unsigned char>& bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        fail(ErrorCode::CorruptCheckpoint, "bad magic bytes");
    std::vector<unsigned char> body(bytes.begin() + 4, bytes.end());
    detail::ByteReader in(body);
    if (const std::uint32_t version = in.u32(); version != kCheckpointVersion)
        fail(ErrorCode::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
    ModelParams<float> model = ModelParams<float>::zeros();
    auto params = model.parameters();
    if (in.u32() != params.size()) fail(ErrorCode::CorruptCheckpoint, "unexpected tensor count");
    for (TensorF32* t : params) {
        if (in.u32() != t->rank()) fail(ErrorCode::CorruptCheckpoint, "unexpected tensor rank");
        for (std::size_t d : t->shape())
            if (in.u32() != d) fail(ErrorCode::CorruptCheckpoint, "unexpected tensor shape");
        in.need(4 * t->size());
        for (float& v : t->values()) v = std::bit_cast<float>(in.u32());
    }
    if (!in.at_end()) fail(ErrorCode::CorruptCheckpoint, "trailing bytes after last tensor");
    return model;
}

inline void save_checkpoint(const ModelParams<float>& model, const std::filesystem::path& path)
{
    const std::vector<unsigned char> bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoFailure, "failed writing checkpoint " + path.string());
}

inline ModelParams<float> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

} // namespace uqgaze

#endif

#include "pdesharp/tensor_io.hpp"

#include <bit>
#include <cstring>

#include "pdesharp/util.hpp"

static_assert(std::endian::native == std::endian::little, "tensor io assumes little-endian host");

namespace pdesharp {

namespace {
constexpr char kMagic[4] = {'P', 'D', 'E', 'T'};
constexpr unsigned char kVersion = 1;
constexpr unsigned char kDtypeF64 = 0;
}  // namespace

std::string encode_tensor(const Tensor& t) {
    if (t.rank() > 255) throw TensorIoError(TensorIoError::Kind::io, "tensor rank exceeds format");
    std::string out;
    out.reserve(7 + 8 * t.rank() + 8 * t.size());
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    out.push_back(static_cast<char>(kDtypeF64));
    out.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.shape) {
        std::uint64_t v = d;
        char buf[8];
        std::memcpy(buf, &v, 8);
        out.append(buf, 8);
    }
    out.append(reinterpret_cast<const char*>(t.data.data()), 8 * t.size());
    return out;
}

Tensor decode_tensor(std::string_view bytes, const std::string& origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw TensorIoError(TensorIoError::Kind::bad_magic, "bad magic in " + origin);
    if (bytes.size() < 7)
        throw TensorIoError(TensorIoError::Kind::truncated, "truncated header in " + origin);
    unsigned char version = static_cast<unsigned char>(bytes[4]);
    unsigned char dtype = static_cast<unsigned char>(bytes[5]);
    unsigned char ndim = static_cast<unsigned char>(bytes[6]);
    if (version != kVersion)
        throw TensorIoError(TensorIoError::Kind::unsupported_version,
                            "unsupported format version " + std::to_string(version) + " in " + origin);
    if (dtype != kDtypeF64)
        throw TensorIoError(TensorIoError::Kind::unsupported_dtype,
                            "unsupported dtype code " + std::to_string(dtype) + " in " + origin);
    std::size_t pos = 7;
    if (bytes.size() < pos + 8ull * ndim)
        throw TensorIoError(TensorIoError::Kind::truncated, "truncated dims in " + origin);
    std::vector<std::size_t> shape(ndim);
    for (unsigned i = 0; i < ndim; ++i) {
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        shape[i] = static_cast<std::size_t>(v);
        pos += 8;
    }
    std::size_t count = Tensor::element_count(shape);
    if (bytes.size() < pos + 8 * count)
        throw TensorIoError(TensorIoError::Kind::truncated,
                            "payload shorter than header promises in " + origin);
    if (bytes.size() > pos + 8 * count)
        throw TensorIoError(TensorIoError::Kind::io, "trailing bytes after payload in " + origin);
    Tensor t;
    t.shape = std::move(shape);
    t.data.resize(count);
    std::memcpy(t.data.data(), bytes.data() + pos, 8 * count);
    return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    write_binary_file(path, encode_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_binary_file(path);
    } catch (const Error& e) {
        throw TensorIoError(TensorIoError::Kind::io, e.what());
    }
    return decode_tensor(bytes, path.string());
}

}  // namespace pdesharp

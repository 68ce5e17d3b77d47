#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "pdesharp/tensor.hpp"

// On-disk tensor format shared with guest solver programs:
//   bytes 0..3  magic "PDET"
//   byte  4     format version (1)
//   byte  5     dtype code (0 = float64 little-endian)
//   byte  6     ndim
//   then  ndim u64 little-endian dims, then row-major payload.

namespace pdesharp {

struct TensorIoError : std::runtime_error {
    enum class Kind { bad_magic, unsupported_version, unsupported_dtype, truncated, io };
    Kind kind;
    TensorIoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes, const std::string& origin = "<memory>");

}  // namespace pdesharp

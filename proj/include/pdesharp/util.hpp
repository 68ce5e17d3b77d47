#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdesharp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);
std::string read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

// Writes to a sibling temp file and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Replaces ${NAME} with the environment value; unset variables are an error.
std::string interpolate_env(const std::string& text);

// Uniform double in [0,1) from the standard-fixed mt19937_64 stream.
// distribution classes are implementation-defined, this mapping is not.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string format_double(double v);  // shortest round-trip decimal

// One ```info ... ``` region of a chat response. An unterminated fence runs
// to the end of the text.
struct FencedBlock {
    std::string info;     // the word after the opening backticks, if any
    std::string content;  // inner lines, newline-terminated
};
std::vector<FencedBlock> fenced_blocks(const std::string& text);

}  // namespace pdesharp

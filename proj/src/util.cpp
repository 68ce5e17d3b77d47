#include "pdesharp/util.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pdesharp {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xf];
    }
    return out;
}

std::string read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error("read failed: " + path.string());
    return std::move(buf).str();
}

std::string read_text_file(const std::filesystem::path& path) { return read_binary_file(path); }

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for write: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    write_binary_file(path, text);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    write_binary_file(tmp, bytes);
    std::filesystem::rename(tmp, path);
}

std::string interpolate_env(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
            auto close = text.find('}', i + 2);
            if (close == std::string::npos) throw Error("unterminated ${ in: " + text);
            std::string name = text.substr(i + 2, close - i - 2);
            const char* val = std::getenv(name.c_str());
            if (!val) throw Error("environment variable not set: " + name);
            out += val;
            i = close + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

// Fence line: optional indent, 3+ backticks, then (for openers) an info word.
bool fence_line(std::string_view line, std::string* info) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t ticks = 0;
    while (i < line.size() && line[i] == '`') ++i, ++ticks;
    if (ticks < 3) return false;
    if (info) {
        std::size_t end = line.size();
        while (end > i && (line[end - 1] == ' ' || line[end - 1] == '\t' || line[end - 1] == '\r'))
            --end;
        *info = std::string(line.substr(i, end - i));
    }
    return true;
}

}  // namespace

std::vector<FencedBlock> fenced_blocks(const std::string& text) {
    std::vector<FencedBlock> blocks;
    FencedBlock current;
    bool open = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        std::string info;
        if (fence_line(line, &info)) {
            if (!open) {
                current = FencedBlock{info, ""};
                open = true;
            } else if (info.empty()) {
                blocks.push_back(std::move(current));
                open = false;
            } else {
                // a new tagged fence while open: close the previous block
                blocks.push_back(std::move(current));
                current = FencedBlock{info, ""};
            }
        } else if (open) {
            current.content.append(line);
            current.content.push_back('\n');
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    if (open) blocks.push_back(std::move(current));
    return blocks;
}

}  // namespace pdesharp

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

// Unique scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("pdesharp-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = lo + (hi - lo) * u;
    }
    return v;
}

}  // namespace testsupport

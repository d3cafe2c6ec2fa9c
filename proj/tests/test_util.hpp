#pragma once

#include "redharness/core.hpp"
#include "redharness/providers.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

namespace testutil {

/// Unique scratch directory, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("redharness-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

inline std::string starter_line(const std::string& id, const std::string& text,
                                const std::string& category,
                                const std::string& extra = "") {
    return "{\"id\":\"" + id + "\",\"text\":\"" + text + "\",\"category\":\"" + category + "\"" +
           extra + "}";
}

/// N starters in one category, texts "q<i> about <category>".
inline std::string starter_fixture(const std::string& category, int n,
                                   const std::string& id_prefix = "s") {
    std::string out;
    for (int i = 0; i < n; ++i) {
        out += starter_line(id_prefix + std::to_string(i),
                            "q" + std::to_string(i) + " about " + category, category) +
               "\n";
    }
    return out;
}

}  // namespace testutil

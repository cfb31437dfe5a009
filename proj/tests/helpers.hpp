#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

namespace fs = std::filesystem;

// Self-cleaning scratch directory under the system temp root.
struct TempDir {
    fs::path path;

    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("pairuni-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

inline std::string cli_path() {
    const char* p = std::getenv("PAIRUNI_CLI");
    return p != nullptr ? p : "";
}

// Runs the CLI with stdout/stderr captured to files; returns the exit code.
inline int run_cli(const std::string& args, const TempDir& dir,
                   std::string* out = nullptr, std::string* err = nullptr) {
    const std::string out_path = dir.file("cli_stdout.txt");
    const std::string err_path = dir.file("cli_stderr.txt");
    const std::string cmd =
        cli_path() + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    if (out != nullptr) *out = slurp(out_path);
    if (err != nullptr) *err = slurp(err_path);
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

}  // namespace testutil

#include "uwa/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

namespace uwa::io {

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

}  // namespace uwa::io

#include "avtrack/arrayio.hpp"

#include <cstring>
#include <fstream>

#include "avtrack/errors.hpp"

namespace avtrack::io {

namespace {
constexpr char kMagic[4] = {'A', 'V', 'T', '1'};
}

void write_array(const std::string& path, const NdArray& arr) {
    if (arr.dims.empty() || arr.dims.size() > 4) throw IoError("write_array: bad ndim");
    if (arr.data.size() != arr.count()) throw IoError("write_array: data/dims mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(kMagic, 4);
    const uint8_t dtype = static_cast<uint8_t>(arr.dtype);
    const uint8_t ndim = static_cast<uint8_t>(arr.dims.size());
    const uint16_t reserved = 0;
    f.write(reinterpret_cast<const char*>(&dtype), 1);
    f.write(reinterpret_cast<const char*>(&ndim), 1);
    f.write(reinterpret_cast<const char*>(&reserved), 2);
    for (uint32_t d : arr.dims) f.write(reinterpret_cast<const char*>(&d), 4);
    if (arr.dtype == Dtype::f32) {
        std::vector<float> buf(arr.data.begin(), arr.data.end());
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
        f.write(reinterpret_cast<const char*>(arr.data.data()),
                static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    }
    if (!f) throw IoError("write failed: " + path);
}

NdArray read_array(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not an array container: " + path);
    uint8_t dtype = 0, ndim = 0;
    uint16_t reserved = 0;
    f.read(reinterpret_cast<char*>(&dtype), 1);
    f.read(reinterpret_cast<char*>(&ndim), 1);
    f.read(reinterpret_cast<char*>(&reserved), 2);
    if (!f || dtype > 1 || ndim < 1 || ndim > 4) throw IoError("corrupt array header: " + path);
    NdArray arr;
    arr.dtype = static_cast<Dtype>(dtype);
    arr.dims.resize(ndim);
    for (auto& d : arr.dims) f.read(reinterpret_cast<char*>(&d), 4);
    if (!f) throw IoError("corrupt array dims: " + path);
    const size_t n = arr.count();
    arr.data.resize(n);
    if (arr.dtype == Dtype::f32) {
        std::vector<float> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
        if (!f) throw IoError("truncated array payload: " + path);
        for (size_t i = 0; i < n; ++i) arr.data[i] = buf[i];
    } else {
        f.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(n * 8));
        if (!f) throw IoError("truncated array payload: " + path);
    }
    return arr;
}

}  // namespace avtrack::io

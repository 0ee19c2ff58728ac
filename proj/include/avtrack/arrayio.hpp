#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avtrack::io {

// Minimal binary array container (documented in the README):
//   bytes 0-3   magic "AVT1"
//   byte  4     dtype: 0 = float32, 1 = float64
//   byte  5     ndim (1..4)
//   bytes 6-7   reserved (zero)
//   then ndim little-endian uint32 dims, then the payload in row-major order,
//   little-endian. Values pass through double in memory regardless of dtype.
enum class Dtype : uint8_t { f32 = 0, f64 = 1 };

struct NdArray {
    Dtype dtype = Dtype::f32;
    std::vector<uint32_t> dims;
    std::vector<double> data;

    size_t count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

void write_array(const std::string& path, const NdArray& arr);
NdArray read_array(const std::string& path);

}  // namespace avtrack::io

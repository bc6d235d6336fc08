#ifndef PADIFF_NPZ_HPP
#define PADIFF_NPZ_HPP

// Minimal npy/npz container IO. Entries are uncompressed (ZIP store),
// which matches numpy's np.savez and keeps the files readable from any
// language with a zip reader. Only little-endian f4/f8 arrays plus raw
// byte entries (for JSON headers) are supported.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace padiff {

struct NpyArray {
    std::vector<size_t> shape;
    std::vector<float> data;  // row-major (C order)

    size_t size() const {
        size_t n = 1;
        for (size_t s : shape) n *= s;
        return n;
    }
};

class NpzWriter {
public:
    explicit NpzWriter(const std::string& path);
    ~NpzWriter();

    void add_array(const std::string& name, const std::vector<size_t>& shape,
                   const float* data);
    // Raw (non-npy) entry, e.g. "header.json".
    void add_bytes(const std::string& name, const std::string& bytes);
    // Writes the central directory; implicitly called by the destructor.
    void close();

private:
    struct Entry;
    void add_entry(const std::string& name, const std::vector<uint8_t>& bytes);
    std::string path_;
    std::vector<Entry> entries_;
    std::vector<uint8_t> buf_;
    bool closed_ = false;
};

class NpzReader {
public:
    explicit NpzReader(const std::string& path);

    bool has(const std::string& name) const;
    std::vector<std::string> names() const;
    NpyArray array(const std::string& name) const;
    std::string bytes(const std::string& name) const;

private:
    std::string path_;
    std::map<std::string, std::pair<size_t, size_t>> offsets_;  // name -> (offset, size)
    std::vector<uint8_t> raw_;
};

uint32_t crc32_bytes(const uint8_t* data, size_t n, uint32_t crc = 0);

}  // namespace padiff

#endif

#include "padiff/npz.hpp"

#include "padiff/core.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace padiff {

uint32_t crc32_bytes(const uint8_t* data, size_t n, uint32_t crc) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    crc = ~crc;
    for (size_t i = 0; i < n; ++i)
        crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return ~crc;
}

namespace {

void put16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}

void put32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

uint16_t get16(const uint8_t* p) { return uint16_t(p[0]) | (uint16_t(p[1]) << 8); }
uint32_t get32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

std::vector<uint8_t> npy_encode(const std::vector<size_t>& shape, const float* data) {
    std::ostringstream dict;
    dict << "{'descr': '<f4', 'fortran_order': False, 'shape': (";
    for (size_t i = 0; i < shape.size(); ++i) dict << shape[i] << (shape.size() == 1 ? "," : (i + 1 < shape.size() ? ", " : ""));
    dict << "), }";
    std::string header = dict.str();
    size_t base = 10;  // magic + version + header-length field
    size_t pad = 64 - ((base + header.size() + 1) % 64);
    header.append(pad, ' ');
    header.push_back('\n');

    std::vector<uint8_t> out;
    const char magic[] = "\x93NUMPY";
    out.insert(out.end(), magic, magic + 6);
    out.push_back(1);
    out.push_back(0);
    put16(out, static_cast<uint16_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    size_t n = 1;
    for (size_t s : shape) n *= s;
    const uint8_t* raw = reinterpret_cast<const uint8_t*>(data);
    out.insert(out.end(), raw, raw + n * sizeof(float));
    return out;
}

}  // namespace

struct NpzWriter::Entry {
    std::string name;
    uint32_t crc;
    uint32_t size;
    uint32_t offset;
};

NpzWriter::NpzWriter(const std::string& path) : path_(path) {}

NpzWriter::~NpzWriter() {
    if (!closed_) close();
}

void NpzWriter::add_entry(const std::string& name, const std::vector<uint8_t>& bytes) {
    Entry e;
    e.name = name;
    e.crc = crc32_bytes(bytes.data(), bytes.size());
    e.size = static_cast<uint32_t>(bytes.size());
    e.offset = static_cast<uint32_t>(buf_.size());
    // local file header
    put32(buf_, 0x04034b50u);
    put16(buf_, 20);      // version needed
    put16(buf_, 0);       // flags
    put16(buf_, 0);       // method: store
    put16(buf_, 0);       // mod time
    put16(buf_, 0);       // mod date
    put32(buf_, e.crc);
    put32(buf_, e.size);  // compressed
    put32(buf_, e.size);  // uncompressed
    put16(buf_, static_cast<uint16_t>(name.size()));
    put16(buf_, 0);       // extra length
    buf_.insert(buf_.end(), name.begin(), name.end());
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    entries_.push_back(e);
}

void NpzWriter::add_array(const std::string& name, const std::vector<size_t>& shape,
                          const float* data) {
    add_entry(name + ".npy", npy_encode(shape, data));
}

void NpzWriter::add_bytes(const std::string& name, const std::string& bytes) {
    add_entry(name, std::vector<uint8_t>(bytes.begin(), bytes.end()));
}

void NpzWriter::close() {
    if (closed_) return;
    closed_ = true;
    uint32_t cd_start = static_cast<uint32_t>(buf_.size());
    for (const Entry& e : entries_) {
        put32(buf_, 0x02014b50u);
        put16(buf_, 20);  // version made by
        put16(buf_, 20);  // version needed
        put16(buf_, 0);
        put16(buf_, 0);
        put16(buf_, 0);
        put16(buf_, 0);
        put32(buf_, e.crc);
        put32(buf_, e.size);
        put32(buf_, e.size);
        put16(buf_, static_cast<uint16_t>(e.name.size()));
        put16(buf_, 0);
        put16(buf_, 0);
        put16(buf_, 0);
        put16(buf_, 0);
        put32(buf_, 0);
        put32(buf_, e.offset);
        buf_.insert(buf_.end(), e.name.begin(), e.name.end());
    }
    uint32_t cd_size = static_cast<uint32_t>(buf_.size()) - cd_start;
    put32(buf_, 0x06054b50u);
    put16(buf_, 0);
    put16(buf_, 0);
    put16(buf_, static_cast<uint16_t>(entries_.size()));
    put16(buf_, static_cast<uint16_t>(entries_.size()));
    put32(buf_, cd_size);
    put32(buf_, cd_start);
    put16(buf_, 0);

    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("npz: cannot open for writing: " + path_);
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("npz: write failed: " + path_);
}

NpzReader::NpzReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw not_found_error("npz: cannot open: " + path);
    raw_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (raw_.size() < 22) throw std::runtime_error("npz: truncated file: " + path);

    // locate end-of-central-directory
    size_t eocd = std::string::npos;
    for (size_t i = raw_.size() - 22; ; --i) {
        if (get32(raw_.data() + i) == 0x06054b50u) {
            eocd = i;
            break;
        }
        if (i == 0) break;
    }
    if (eocd == std::string::npos)
        throw std::runtime_error("npz: no central directory in " + path);
    uint16_t n_entries = get16(raw_.data() + eocd + 10);
    size_t pos = get32(raw_.data() + eocd + 16);
    for (uint16_t k = 0; k < n_entries; ++k) {
        if (get32(raw_.data() + pos) != 0x02014b50u)
            throw std::runtime_error("npz: bad central directory entry in " + path);
        uint16_t method = get16(raw_.data() + pos + 10);
        uint32_t size = get32(raw_.data() + pos + 24);
        uint16_t name_len = get16(raw_.data() + pos + 28);
        uint16_t extra_len = get16(raw_.data() + pos + 30);
        uint16_t comment_len = get16(raw_.data() + pos + 32);
        uint32_t lho = get32(raw_.data() + pos + 42);
        std::string name(reinterpret_cast<const char*>(raw_.data() + pos + 46), name_len);
        if (method != 0)
            throw std::runtime_error("npz: compressed entries unsupported: " + name);
        // data offset = local header offset + fixed 30 + its name/extra fields
        uint16_t l_name = get16(raw_.data() + lho + 26);
        uint16_t l_extra = get16(raw_.data() + lho + 28);
        offsets_[name] = {lho + 30 + l_name + l_extra, size};
        pos += 46u + name_len + extra_len + comment_len;
    }
}

bool NpzReader::has(const std::string& name) const {
    return offsets_.count(name) || offsets_.count(name + ".npy");
}

std::vector<std::string> NpzReader::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : offsets_) out.push_back(k);
    return out;
}

std::string NpzReader::bytes(const std::string& name) const {
    auto it = offsets_.find(name);
    if (it == offsets_.end()) throw not_found_error("npz: no entry " + name + " in " + path_);
    return std::string(reinterpret_cast<const char*>(raw_.data() + it->second.first),
                       it->second.second);
}

NpyArray NpzReader::array(const std::string& name) const {
    auto it = offsets_.find(name + ".npy");
    if (it == offsets_.end()) it = offsets_.find(name);
    if (it == offsets_.end()) throw not_found_error("npz: no array " + name + " in " + path_);
    const uint8_t* p = raw_.data() + it->second.first;
    size_t n = it->second.second;
    if (n < 10 || std::memcmp(p, "\x93NUMPY", 6) != 0)
        throw std::runtime_error("npz: entry is not npy: " + name);
    uint16_t hlen = get16(p + 8);
    std::string header(reinterpret_cast<const char*>(p + 10), hlen);

    bool f8 = header.find("'<f8'") != std::string::npos;
    if (!f8 && header.find("'<f4'") == std::string::npos)
        throw std::runtime_error("npz: unsupported dtype in " + name);
    if (header.find("'fortran_order': False") == std::string::npos)
        throw std::runtime_error("npz: fortran order unsupported in " + name);

    NpyArray arr;
    size_t lp = header.find('(');
    size_t rp = header.find(')', lp);
    std::string dims = header.substr(lp + 1, rp - lp - 1);
    std::istringstream ds(dims);
    std::string tok;
    while (std::getline(ds, tok, ',')) {
        size_t b = tok.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        arr.shape.push_back(static_cast<size_t>(std::stoull(tok.substr(b))));
    }
    size_t count = arr.size();
    const uint8_t* data = p + 10 + hlen;
    arr.data.resize(count);
    if (f8) {
        const double* d = reinterpret_cast<const double*>(data);
        for (size_t i = 0; i < count; ++i) arr.data[i] = static_cast<float>(d[i]);
    } else {
        std::memcpy(arr.data.data(), data, count * sizeof(float));
    }
    return arr;
}

}  // namespace padiff

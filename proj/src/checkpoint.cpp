#include "evslt/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "evslt/errors.hpp"

namespace evslt {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', 'K'};
constexpr uint16_t kVersion = 1;
const std::string kStepName = "optim.step";

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    put_u16(out, static_cast<uint16_t>(v & 0xffff));
    put_u16(out, static_cast<uint16_t>(v >> 16));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

struct Cursor {
    const unsigned char* p;
    size_t left;

    uint16_t u16() {
        if (left < 2) throw MalformedFile("truncated checkpoint");
        const uint16_t v = static_cast<uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    }
    uint32_t u32() {
        if (left < 4) throw MalformedFile("truncated checkpoint");
        const uint32_t v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
        p += 4;
        left -= 4;
        return v;
    }
    std::string bytes(size_t n) {
        if (left < n) throw MalformedFile("truncated checkpoint");
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
};

void append_record(std::string& out, const std::string& name,
                   const std::vector<int64_t>& shape, const std::vector<float>& values) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.append(name);
    put_u16(out, static_cast<uint16_t>(shape.size()));
    for (int64_t d : shape) put_u32(out, static_cast<uint32_t>(d));
    for (float v : values) put_f32(out, v);
}

}  // namespace

std::string serialize_checkpoint(const ParamStore& store, int64_t step) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u16(out, kVersion);
    for (size_t i = 0; i < store.size(); ++i) {
        const auto& p = store.at(i);
        append_record(out, p.name, p.shape, p.value);
    }
    append_record(out, kStepName, {}, {static_cast<float>(step)});
    return out;
}

int64_t parse_checkpoint(const std::string& bytes, ParamStore& store) {
    Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    const std::string magic = c.bytes(4);
    if (magic != std::string(kMagic, sizeof(kMagic))) throw MalformedFile("bad checkpoint magic");
    if (c.u16() != kVersion) throw MalformedFile("unsupported checkpoint version");

    std::vector<bool> filled(store.size(), false);
    bool have_step = false;
    int64_t step = 0;
    while (c.left > 0) {
        const std::string name = c.bytes(c.u16());
        const uint16_t rank = c.u16();
        uint64_t count = 1;
        std::vector<int64_t> dims;
        for (uint16_t r = 0; r < rank; ++r) {
            const uint32_t d = c.u32();
            dims.push_back(int64_t(d));
            count *= d;
            if (count > (1ull << 32)) throw MalformedFile("oversized checkpoint record " + name);
        }
        const std::string payload = c.bytes(size_t(count) * 4);
        auto values = [&] {
            std::vector<float> v(static_cast<size_t>(count));
            const auto* q = reinterpret_cast<const unsigned char*>(payload.data());
            for (size_t j = 0; j < v.size(); ++j, q += 4) {
                const uint32_t u = static_cast<uint32_t>(q[0]) | (static_cast<uint32_t>(q[1]) << 8) |
                                   (static_cast<uint32_t>(q[2]) << 16) |
                                   (static_cast<uint32_t>(q[3]) << 24);
                v[j] = std::bit_cast<float>(u);
            }
            return v;
        }();

        if (name == kStepName) {
            if (have_step) throw MalformedFile("duplicate optim.step record");
            if (rank != 0) throw MalformedFile("optim.step must be a scalar");
            have_step = true;
            step = static_cast<int64_t>(std::llround(double(values[0])));
            continue;
        }
        auto* p = store.find(name);
        if (p == nullptr) throw MalformedFile("unknown checkpoint record " + name);
        if (p->shape != dims) throw MalformedFile("shape mismatch for " + name);
        size_t idx = 0;
        for (; idx < store.size(); ++idx)
            if (&store.at(idx) == p) break;
        if (filled[idx]) throw MalformedFile("duplicate checkpoint record " + name);
        filled[idx] = true;
        p->value = std::move(values);
    }
    for (size_t i = 0; i < store.size(); ++i)
        if (!filled[i]) throw MalformedFile("missing checkpoint record " + store.at(i).name);
    if (!have_step) throw MalformedFile("missing optim.step record");
    return step;
}

void save_checkpoint(const std::string& path, const ParamStore& store, int64_t step) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoFailure("cannot open " + tmp);
        const std::string bytes = serialize_checkpoint(store, step);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoFailure("short write " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoFailure("cannot rename " + tmp);
}

int64_t load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoFailure("read failure " + path);
    return parse_checkpoint(bytes, store);
}

}  // namespace evslt

#include "evslt/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evslt/rng.hpp"

namespace evslt {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'S', 'T'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderBytes = 16;  // 14 byte header + 2 bytes zero pad
constexpr size_t kRecordBytes = 14;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    put_u16(out, static_cast<uint16_t>(v & 0xffff));
    put_u16(out, static_cast<uint16_t>(v >> 16));
}
void put_u64(std::string& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v & 0xffffffffULL));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint16_t get_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint64_t get_u64(const unsigned char* p) {
    return static_cast<uint64_t>(get_u32(p)) |
           (static_cast<uint64_t>(get_u32(p + 4)) << 32);
}

bool has_csv_extension(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

EventStream read_events_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw MalformedFile("empty csv " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y,t,p") throw MalformedFile("bad csv header in " + path);
    EventStream s;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        EventPoint e;
        long long x, y, t, p;
        if (std::sscanf(line.c_str(), "%lld,%lld,%lld,%lld", &x, &y, &t, &p) != 4)
            throw MalformedFile("bad csv row '" + line + "' in " + path);
        e.x = static_cast<int32_t>(x);
        e.y = static_cast<int32_t>(y);
        e.t = t;
        e.p = static_cast<int8_t>(p);
        s.points.push_back(e);
    }
    // csv carries no geometry; use the tight bounding box
    int32_t mx = 0, my = 0;
    for (const auto& e : s.points) {
        mx = std::max(mx, e.x);
        my = std::max(my, e.y);
    }
    s.width = mx + 1;
    s.height = my + 1;
    validate_stream(s);
    return s;
}

void write_events_csv(const EventStream& s, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out << "x,y,t,p\n";
    for (const auto& e : s.points)
        out << e.x << "," << e.y << "," << e.t << "," << int(e.p) << "\n";
    if (!out) throw IoFailure("short write to " + path);
}

}  // namespace

void validate_stream(const EventStream& s) {
    if (s.width <= 0 || s.height <= 0)
        throw MalformedFile("non-positive geometry " + std::to_string(s.width) + "x" +
                            std::to_string(s.height));
    int64_t prev_t = INT64_MIN;
    for (size_t i = 0; i < s.points.size(); ++i) {
        const EventPoint& e = s.points[i];
        if (e.x < 0 || e.x >= s.width || e.y < 0 || e.y >= s.height)
            throw OutOfBounds("event " + std::to_string(i) + " at (" + std::to_string(e.x) +
                              "," + std::to_string(e.y) + ") outside " +
                              std::to_string(s.width) + "x" + std::to_string(s.height));
        if (e.p != 1 && e.p != -1)
            throw MalformedFile("event " + std::to_string(i) + " polarity " +
                                std::to_string(int(e.p)));
        if (e.t < 0)
            throw MalformedFile("event " + std::to_string(i) + " negative timestamp");
        if (e.t < prev_t)
            throw NonMonotonicTime("event " + std::to_string(i) + " t=" +
                                   std::to_string(e.t) + " after t=" + std::to_string(prev_t));
        prev_t = e.t;
    }
}

double FrameTensor::total_mass() const {
    double m = 0.0;
    for (float v : data) m += v;
    return m;
}

EventStream read_events(const std::string& path) {
    if (has_csv_extension(path)) return read_events_csv(path);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kHeaderBytes + 8)
        throw MalformedFile("file too short (" + std::to_string(bytes.size()) + " bytes)");
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) throw MalformedFile("bad magic in " + path);
    uint16_t version = get_u16(p + 4);
    if (version != kVersion)
        throw MalformedFile("unsupported version " + std::to_string(version));
    EventStream s;
    s.width = get_u16(p + 6);
    s.height = get_u16(p + 8);
    uint32_t reserved = get_u32(p + 10);
    if (reserved != 0) throw MalformedFile("nonzero reserved field");
    uint64_t count = get_u64(p + kHeaderBytes);
    size_t expect = kHeaderBytes + 8 + count * kRecordBytes;
    if (bytes.size() != expect)
        throw MalformedFile("size " + std::to_string(bytes.size()) + " != expected " +
                            std::to_string(expect));
    s.points.resize(count);
    const unsigned char* rec = p + kHeaderBytes + 8;
    for (uint64_t i = 0; i < count; ++i, rec += kRecordBytes) {
        EventPoint& e = s.points[i];
        e.x = get_u16(rec);
        e.y = get_u16(rec + 2);
        e.t = static_cast<int64_t>(get_u64(rec + 4));
        e.p = static_cast<int8_t>(rec[12]);
        if (rec[13] != 0) throw MalformedFile("nonzero record pad at event " + std::to_string(i));
    }
    validate_stream(s);
    return s;
}

void write_events(const EventStream& s, const std::string& path) {
    validate_stream(s);
    if (has_csv_extension(path)) {
        write_events_csv(s, path);
        return;
    }
    std::string out;
    out.reserve(kHeaderBytes + 8 + s.points.size() * kRecordBytes);
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u16(out, static_cast<uint16_t>(s.width));
    put_u16(out, static_cast<uint16_t>(s.height));
    put_u32(out, 0);           // reserved
    put_u16(out, 0);           // pad header to 16 bytes
    put_u64(out, s.points.size());
    for (const auto& e : s.points) {
        put_u16(out, static_cast<uint16_t>(e.x));
        put_u16(out, static_cast<uint16_t>(e.y));
        put_u64(out, static_cast<uint64_t>(e.t));
        out.push_back(static_cast<char>(e.p));
        out.push_back(0);  // record pad
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoFailure("short write to " + path);
}

FrameTensor stack_to_frames(const EventStream& s, int64_t frame_count, BinMode mode) {
    if (frame_count < 1) throw ConfigError("frame count must be >= 1");
    if (s.points.empty()) throw EmptyStream("cannot stack an empty stream");
    validate_stream(s);

    FrameTensor f;
    f.frames = frame_count;
    f.channels = 2;
    f.height = s.height;
    f.width = s.width;
    f.data.assign(static_cast<size_t>(frame_count * 2 * s.height * s.width), 0.0f);

    const int64_t m = static_cast<int64_t>(s.points.size());
    const int64_t t_min = s.points.front().t;
    const int64_t t_max = s.points.back().t;
    const int64_t span = t_max - t_min;
    for (int64_t i = 0; i < m; ++i) {
        const EventPoint& e = s.points[i];
        int64_t bin;
        if (mode == BinMode::kCount) {
            bin = (i * frame_count) / m;
        } else if (span == 0) {
            bin = 0;
        } else {
            // uniform half-open bins; the last bin also takes t == t_max
            bin = static_cast<int64_t>((static_cast<__int128>(e.t - t_min) * frame_count) / span);
            bin = std::min(bin, frame_count - 1);
        }
        int64_t ch = (e.p == 1) ? 0 : 1;
        f.at(bin, ch, e.y, e.x) += 1.0f;
    }
    return f;
}

FrameTensor resize_frames(const FrameTensor& in, int64_t out_h, int64_t out_w, ResizeMode mode) {
    if (out_h < 1 || out_w < 1) throw ConfigError("resize target must be >= 1x1");

    // overlap weights of output cell i with input cells, one axis at a time
    struct Seg {
        int64_t first;
        std::vector<double> w;
    };
    auto axis_weights = [](int64_t n_in, int64_t n_out) {
        std::vector<Seg> segs(static_cast<size_t>(n_out));
        const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
        for (int64_t i = 0; i < n_out; ++i) {
            double lo = i * scale;
            double hi = (i + 1) * scale;
            int64_t first = std::clamp<int64_t>(static_cast<int64_t>(std::floor(lo)), 0, n_in - 1);
            int64_t last = std::clamp<int64_t>(static_cast<int64_t>(std::ceil(hi)) - 1, first, n_in - 1);
            Seg& s = segs[static_cast<size_t>(i)];
            s.first = first;
            for (int64_t j = first; j <= last; ++j) {
                double w = std::min(hi, static_cast<double>(j + 1)) -
                           std::max(lo, static_cast<double>(j));
                s.w.push_back(std::max(w, 0.0));
            }
        }
        return segs;
    };

    const auto rows = axis_weights(in.height, out_h);
    const auto cols = axis_weights(in.width, out_w);
    const double cell_area = (static_cast<double>(in.height) / out_h) *
                             (static_cast<double>(in.width) / out_w);

    FrameTensor out;
    out.frames = in.frames;
    out.channels = in.channels;
    out.height = out_h;
    out.width = out_w;
    out.data.assign(static_cast<size_t>(in.frames * in.channels * out_h * out_w), 0.0f);

    for (int64_t t = 0; t < in.frames; ++t)
        for (int64_t c = 0; c < in.channels; ++c)
            for (int64_t oy = 0; oy < out_h; ++oy) {
                const Seg& ry = rows[static_cast<size_t>(oy)];
                for (int64_t ox = 0; ox < out_w; ++ox) {
                    const Seg& rx = cols[static_cast<size_t>(ox)];
                    double acc = 0.0;
                    for (size_t a = 0; a < ry.w.size(); ++a)
                        for (size_t b = 0; b < rx.w.size(); ++b)
                            acc += ry.w[a] * rx.w[b] *
                                   in.at(t, c, ry.first + static_cast<int64_t>(a),
                                         rx.first + static_cast<int64_t>(b));
                    if (mode == ResizeMode::kMean) acc /= cell_area;
                    out.at(t, c, oy, ox) = static_cast<float>(acc);
                }
            }
    return out;
}

void normalize_per_sample(FrameTensor& frames) {
    float mx = 0.0f;
    for (float v : frames.data) mx = std::max(mx, v);
    if (mx <= 0.0f) return;
    for (float& v : frames.data) v /= mx;
}

SynthSample synth_scene(uint64_t seed, int vocab_size, const SynthOptions& opt) {
    if (vocab_size < 1) throw ConfigError("synth needs a non-empty vocabulary");
    if (opt.min_len < 1 || opt.min_len > opt.max_len)
        throw ConfigError("synth length range must satisfy 1 <= min <= max");

    Rng rng(seed);
    SynthSample sample;
    sample.stream.width = opt.sensor_width;
    sample.stream.height = opt.sensor_height;

    const int len = opt.min_len + static_cast<int>(rng.below(opt.max_len - opt.min_len + 1));
    for (int i = 0; i < len; ++i)
        sample.vocab_indices.push_back(static_cast<int>(rng.below(vocab_size)));

    const double cx = 0.5 * (opt.sensor_width - 1);
    const double cy = 0.5 * (opt.sensor_height - 1);
    const double radius = 0.40 * std::min(opt.sensor_width, opt.sensor_height);
    const int steps = 24;
    const int64_t step_dt = std::max<int64_t>(1, opt.token_duration_us / steps);

    auto emit_blob = [&](int64_t t, double px, double py, int8_t pol) {
        int xi = static_cast<int>(std::lround(px));
        int yi = static_cast<int>(std::lround(py));
        int sub = 0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int x = xi + dx, y = yi + dy;
                if (x < 0 || x >= opt.sensor_width || y < 0 || y >= opt.sensor_height) continue;
                sample.stream.points.push_back(EventPoint{x, y, t + sub, pol});
                ++sub;  // keeps timestamps strictly ordered inside a blob
            }
    };

    int64_t t0 = 0;
    for (int tok_pos = 0; tok_pos < len; ++tok_pos) {
        const int tok = sample.vocab_indices[static_cast<size_t>(tok_pos)];
        // one fixed trajectory per vocabulary entry: a straight sweep through
        // the image centre at the token's own angle
        const double angle = 6.283185307179586 * tok / vocab_size;
        const double ux = std::cos(angle), uy = std::sin(angle);
        const double jx = rng.uniform(-2.0, 2.0);
        const double jy = rng.uniform(-2.0, 2.0);
        double prev_x = cx + jx - radius * ux;
        double prev_y = cy + jy - radius * uy;
        for (int s = 0; s < steps; ++s) {
            const double f = (steps == 1) ? 1.0 : static_cast<double>(s) / (steps - 1);
            const double px = cx + jx + radius * ux * (2.0 * f - 1.0);
            const double py = cy + jy + radius * uy * (2.0 * f - 1.0);
            const int64_t t = t0 + s * step_dt;
            emit_blob(t, px, py, +1);
            if (s > 0) emit_blob(t, prev_x, prev_y, -1);
            prev_x = px;
            prev_y = py;
        }
        t0 += opt.token_duration_us;
    }
    std::stable_sort(sample.stream.points.begin(), sample.stream.points.end(),
                     [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
    validate_stream(sample.stream);
    return sample;
}

}  // namespace evslt

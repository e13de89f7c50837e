#include "evslt/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

#include "evslt/errors.hpp"

namespace evslt {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open manifest " + path);
    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";

    std::set<std::string> seen;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw MalformedFile("manifest line " + std::to_string(lineno) + " is not valid JSON");
        }
        if (!j.is_object()) throw MalformedFile("manifest line " + std::to_string(lineno));
        for (const auto& item : j.items())
            if (item.key() != "id" && item.key() != "events_path" && item.key() != "text" &&
                item.key() != "split")
                throw MalformedFile("unknown manifest key " + item.key());
        ManifestEntry e;
        for (const char* key : {"id", "events_path", "text", "split"}) {
            if (!j.contains(key) || !j.at(key).is_string())
                throw MalformedFile("manifest line " + std::to_string(lineno) +
                                    " needs string field " + key);
        }
        e.id = j.at("id").get<std::string>();
        e.events_path = j.at("events_path").get<std::string>();
        e.text = j.at("text").get<std::string>();
        e.split = j.at("split").get<std::string>();
        if (e.split != "train" && e.split != "val" && e.split != "test")
            throw MalformedFile("bad split '" + e.split + "' for id " + e.id);
        if (!seen.insert(e.id).second) throw MalformedFile("duplicate manifest id " + e.id);
        if (!fs::exists(fs::path(m.dir) / e.events_path))
            throw MalformedFile("missing events file " + e.events_path + " for id " + e.id);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write manifest " + path);
    for (const auto& e : entries) {
        json j;
        j["id"] = e.id;
        j["events_path"] = e.events_path;
        j["text"] = e.text;
        j["split"] = e.split;
        out << j.dump() << '\n';
    }
    if (!out) throw IoFailure("short write " + path);
}

std::vector<size_t> split_indices(const Manifest& m, const std::string& split) {
    std::vector<size_t> out;
    for (size_t i = 0; i < m.entries.size(); ++i)
        if (m.entries[i].split == split) out.push_back(i);
    return out;
}

FrameTensor subsample_frames(const FrameTensor& frames, int64_t keep_every) {
    if (keep_every < 1) throw ConfigError("subsample must be >= 1");
    if (keep_every == 1) return frames;
    FrameTensor out;
    out.frames = (frames.frames + keep_every - 1) / keep_every;
    out.channels = frames.channels;
    out.height = frames.height;
    out.width = frames.width;
    const int64_t per = frames.channels * frames.height * frames.width;
    out.data.reserve(static_cast<size_t>(out.frames * per));
    for (int64_t t = 0; t < frames.frames; t += keep_every)
        out.data.insert(out.data.end(), frames.data.begin() + t * per,
                        frames.data.begin() + (t + 1) * per);
    return out;
}

LoadedSample load_sample(const Manifest& m, const ManifestEntry& e, const RunConfig& rc,
                         const Vocabulary& vocab) {
    LoadedSample s;
    s.id = e.id;
    s.text = e.text;
    const auto stream = read_events((fs::path(m.dir) / e.events_path).string());
    auto frames = stack_to_frames(stream, rc.frames, rc.bin_mode);
    frames = subsample_frames(frames, rc.subsample);
    frames = resize_frames(frames, rc.height, rc.width, rc.resize_mode);
    normalize_per_sample(frames);
    s.frames = std::move(frames);
    s.sentence = frame_sentence(vocab.encode(e.text));
    return s;
}

Batch make_batch(const std::vector<const LoadedSample*>& samples) {
    if (samples.empty()) throw ShapeMismatch("empty batch");
    const auto& f0 = samples.front()->frames;
    Batch b;
    b.shape = {static_cast<int64_t>(samples.size()), f0.frames, f0.channels, f0.height, f0.width};
    b.values.reserve(static_cast<size_t>(b.shape[0]) * f0.data.size());
    for (const auto* s : samples) {
        const auto& f = s->frames;
        if (f.frames != f0.frames || f.channels != f0.channels || f.height != f0.height ||
            f.width != f0.width)
            throw ShapeMismatch("batch frame shapes disagree");
        b.values.insert(b.values.end(), f.data.begin(), f.data.end());
        b.sentences.push_back(s->sentence);
    }
    return b;
}

}  // namespace evslt

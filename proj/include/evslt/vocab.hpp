#pragma once

// Token <-> id mapping with the four reserved ids. Sentences are id
// sequences framed by BOS/EOS; PAD fills ragged batches.

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "evslt/errors.hpp"

namespace evslt {

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kReserved = 4;

    // returns the id; re-adding an existing token returns its id unchanged
    int add(const std::string& tok) {
        validate_token(tok);
        auto it = ids_.find(tok);
        if (it != ids_.end()) return it->second;
        const int id = kReserved + static_cast<int>(words_.size());
        words_.push_back(tok);
        ids_.emplace(tok, id);
        return id;
    }

    int id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? kUnk : it->second;
    }

    std::string token_of(int id) const {
        switch (id) {
            case kPad: return "<pad>";
            case kBos: return "<bos>";
            case kEos: return "<eos>";
            case kUnk: return "<unk>";
            default: break;
        }
        const size_t i = static_cast<size_t>(id - kReserved);
        if (id < 0 || i >= words_.size()) throw ConfigError("vocab id out of range");
        return words_[i];
    }

    int64_t size() const { return kReserved + static_cast<int64_t>(words_.size()); }

    // whitespace tokenization; unknown words map to UNK; no BOS/EOS framing
    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(text[i])) ++i;
            size_t j = i;
            while (j < text.size() && !is_space(text[j])) ++j;
            if (j > i) out.push_back(id_of(text.substr(i, j - i)));
            i = j;
        }
        return out;
    }

    // joins with single spaces; PAD/BOS/EOS are dropped, UNK is kept
    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (int id : ids) {
            if (id == kPad || id == kBos || id == kEos) continue;
            if (!out.empty()) out += ' ';
            out += token_of(id);
        }
        return out;
    }

    // one token per line, line number = id - 4
    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoFailure("cannot write " + path);
        for (const auto& w : words_) f << w << '\n';
        if (!f) throw IoFailure("short write " + path);
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoFailure("cannot read " + path);
        Vocabulary v;
        std::string line;
        while (std::getline(f, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) throw MalformedFile("empty vocab line in " + path);
            v.add(line);
        }
        return v;
    }

  private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    static void validate_token(const std::string& tok) {
        if (tok.empty()) throw ConfigError("empty vocab token");
        for (char c : tok)
            if (is_space(c)) throw ConfigError("vocab token contains whitespace: '" + tok + "'");
    }

    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
};

// [BOS] + content + [EOS]
inline std::vector<int> frame_sentence(const std::vector<int>& content) {
    std::vector<int> s;
    s.reserve(content.size() + 2);
    s.push_back(Vocabulary::kBos);
    s.insert(s.end(), content.begin(), content.end());
    s.push_back(Vocabulary::kEos);
    return s;
}

// strips BOS/EOS framing and any PAD tail
inline std::vector<int> sentence_content(const std::vector<int>& sentence) {
    std::vector<int> out;
    for (int id : sentence)
        if (id != Vocabulary::kPad && id != Vocabulary::kBos && id != Vocabulary::kEos)
            out.push_back(id);
    return out;
}

}  // namespace evslt

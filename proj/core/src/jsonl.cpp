#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"  // vendored nlohmann/json

#include "gamed/errors.hpp"
#include "gamed/synthdata.hpp"

namespace gamed {

namespace {

using nlohmann::json;

bool is_gz(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::string read_text(const std::string& path) {
    if (is_gz(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) throw DataError("cannot open " + path);
        std::string out;
        char buf[1 << 16];
        int n;
        while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
        const bool bad = n < 0;
        gzclose(f);
        if (bad) throw DataError("gzip read failed for " + path);
        return out;
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (is_gz(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw DataError("cannot open " + path + " for writing");
        const bool ok =
            gzwrite(f, text.data(), static_cast<unsigned>(text.size())) ==
            static_cast<int>(text.size());
        gzclose(f);
        if (!ok) throw DataError("gzip write failed for " + path);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw DataError("write failed for " + path);
}

const json& require_key(const json& obj, const char* key, const std::string& path, int line) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw DataError(path + ":" + std::to_string(line) + ": missing key '" + key + "'");
    }
    return *it;
}

NewsRecord parse_record(const json& obj, const std::string& path, int line) {
    NewsRecord rec;
    try {
        rec.id = require_key(obj, "id", path, line).get<std::string>();
        rec.tokens = require_key(obj, "text", path, line).get<std::vector<int>>();
        rec.height = require_key(obj, "height", path, line).get<int>();
        rec.width = require_key(obj, "width", path, line).get<int>();
        rec.image = require_key(obj, "image", path, line).get<std::vector<float>>();
        rec.label = require_key(obj, "label", path, line).get<int>();
        rec.consistency = require_key(obj, "consistency", path, line).get<int>();
    } catch (const json::exception& e) {
        throw DataError(path + ":" + std::to_string(line) + ": bad field type (" + e.what() + ")");
    }
    if (rec.height <= 0 || rec.width <= 0 ||
        rec.image.size() != static_cast<std::size_t>(rec.height) * rec.width) {
        throw DataError(path + ":" + std::to_string(line) + ": image size does not match height*width");
    }
    if (rec.label != 0 && rec.label != 1) {
        throw DataError(path + ":" + std::to_string(line) + ": label must be 0 or 1");
    }
    if (rec.consistency != 0 && rec.consistency != 1) {
        throw DataError(path + ":" + std::to_string(line) + ": consistency must be 0 or 1");
    }
    return rec;
}

}  // namespace

void write_jsonl(const std::vector<NewsRecord>& records, const std::string& path) {
    std::string out;
    for (const auto& rec : records) {
        json obj;
        obj["id"] = rec.id;
        obj["text"] = rec.tokens;
        obj["height"] = rec.height;
        obj["width"] = rec.width;
        obj["image"] = rec.image;
        obj["label"] = rec.label;
        obj["consistency"] = rec.consistency;
        out += obj.dump();
        out += '\n';
    }
    write_text(path, out);
}

std::vector<NewsRecord> read_jsonl(const std::string& path) {
    const std::string text = read_text(path);
    std::vector<NewsRecord> out;
    std::size_t pos = 0;
    int line = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line;
        std::string_view sv(text.data() + pos, end - pos);
        pos = end + 1;
        if (sv.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json obj = json::parse(sv, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw DataError(path + ":" + std::to_string(line) + ": malformed JSON line");
        }
        out.push_back(parse_record(obj, path, line));
    }
    return out;
}

}  // namespace gamed

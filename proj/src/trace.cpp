#include "psched/trace.hpp"

#include <zlib.h>

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace psched {

using nlohmann::json;

namespace {

constexpr char b64_alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes)
{
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += b64_alphabet[(n >> 18) & 63];
        out += b64_alphabet[(n >> 12) & 63];
        out += b64_alphabet[(n >> 6) & 63];
        out += b64_alphabet[n & 63];
    }
    if (const std::size_t rest = bytes.size() - i; rest > 0) {
        std::uint32_t n = bytes[i] << 16;
        if (rest == 2) n |= bytes[i + 1] << 8;
        out += b64_alphabet[(n >> 18) & 63];
        out += b64_alphabet[(n >> 12) & 63];
        out += rest == 2 ? b64_alphabet[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text)
{
    std::array<int, 256> lookup;
    lookup.fill(-1);
    for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(b64_alphabet[i])] = i;

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char ch : text) {
        if (ch == '=') break;
        const int v = lookup[static_cast<unsigned char>(ch)];
        if (v < 0) throw TraceError("invalid base64 character in raster payload");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

json box_json(const PatchRegion& r) { return json::array({r.x, r.y, r.w, r.h}); }

PatchRegion box_from(const json& j)
{
    if (!j.is_array() || j.size() != 4) throw TraceError("box must be [x, y, w, h]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json frame_json(const TraceFrame& f)
{
    json j;
    j["type"] = "frame";
    j["index"] = f.stamp.index;
    json entities = json::array();
    for (const auto& e : f.entities) {
        json je;
        je["id"] = e.id;
        je["kind"] = std::string(to_string(e.kind));
        je["box"] = box_json(e.box);
        je["relevance"] = e.relevance;
        if (!e.keypoints.empty()) {
            json kps = json::array();
            for (const auto& k : e.keypoints) kps.push_back(json::array({k.x, k.y}));
            je["keypoints"] = std::move(kps);
        }
        if (e.change_ratio) je["change_ratio"] = *e.change_ratio;
        entities.push_back(std::move(je));
    }
    j["entities"] = std::move(entities);
    if (!f.events.empty()) {
        json events = json::array();
        for (const auto& ev : f.events)
            events.push_back({{"kind", ev.kind == TraceEventKind::Enter ? "enter" : "exit"}, {"id", ev.entity_id}});
        j["events"] = std::move(events);
    }
    if (f.raster)
        j["raster"] = {{"width", f.raster->width}, {"height", f.raster->height}, {"encoding", "zlib+base64"},
                       {"data", encode_raster(*f.raster)}};
    if (f.change)
        j["change"] = {{"background_change_ratio", f.change->background_change_ratio},
                       {"histogram_shift", f.change->histogram_shift}};
    return j;
}

TraceFrame frame_from(const json& j, const TraceHeader& header)
{
    TraceFrame f;
    f.stamp = FrameStamp::at(j.at("index").get<std::int64_t>(), header.frame_period_ms);
    for (const auto& je : j.at("entities")) {
        TraceEntity e;
        e.id = je.at("id").get<int>();
        e.kind = parse_entity_kind(je.at("kind").get<std::string>());
        e.box = box_from(je.at("box"));
        e.relevance = je.at("relevance").get<double>();
        if (auto it = je.find("keypoints"); it != je.end())
            for (const auto& k : *it) e.keypoints.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
        if (auto it = je.find("change_ratio"); it != je.end()) e.change_ratio = it->get<double>();
        f.entities.push_back(std::move(e));
    }
    if (auto it = j.find("events"); it != j.end())
        for (const auto& ev : *it) {
            const auto kind = ev.at("kind").get<std::string>();
            if (kind != "enter" && kind != "exit") throw TraceError("unknown event kind " + kind);
            f.events.push_back({kind == "enter" ? TraceEventKind::Enter : TraceEventKind::Exit, ev.at("id").get<int>()});
        }
    if (auto it = j.find("raster"); it != j.end())
        f.raster = decode_raster(it->at("width").get<int>(), it->at("height").get<int>(),
                                 it->at("encoding").get<std::string>(), it->at("data").get<std::string>());
    if (auto it = j.find("change"); it != j.end())
        f.change = PrecomputedChange{it->at("background_change_ratio").get<double>(), it->at("histogram_shift").get<double>()};
    return f;
}

}  // namespace

const TraceEntity* TraceFrame::find(int id) const
{
    for (const auto& e : entities)
        if (e.id == id) return &e;
    return nullptr;
}

void Trace::validate() const
{
    if (header.version != trace_schema_version) throw TraceError("unsupported trace schema version");
    if (!(header.frame_period_ms > 0.0)) throw TraceError("frame period must be positive");
    if (!(header.frame_width > 0.0 && header.frame_height > 0.0)) throw TraceError("frame size must be positive");
    if (!(header.raster_scale > 0.0)) throw TraceError("raster scale must be positive");
    if (frames.empty()) throw TraceError("trace holds no frames");
    std::optional<std::pair<int, int>> raster_shape;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (f.stamp.index != static_cast<std::int64_t>(i))
            throw TraceError("frame " + std::to_string(i) + " carries index " + std::to_string(f.stamp.index));
        std::set<int> ids;
        for (const auto& e : f.entities) {
            if (!ids.insert(e.id).second) throw TraceError("duplicate entity id in frame " + std::to_string(i));
            if (!(e.relevance >= 0.0 && e.relevance <= 1.0)) throw TraceError("relevance outside [0, 1]");
            if (!e.box.valid()) throw TraceError("empty entity box in frame " + std::to_string(i));
            if (e.kind == EntityKind::Human) {
                if (static_cast<int>(e.keypoints.size()) != header.keypoint_count)
                    throw TraceError("human keypoint count differs from header in frame " + std::to_string(i));
            } else if (!e.keypoints.empty()) {
                throw TraceError("keypoints on a non-human entity in frame " + std::to_string(i));
            }
        }
        if (f.raster) {
            std::pair<int, int> shape{f.raster->width, f.raster->height};
            if (raster_shape && *raster_shape != shape) throw TraceError("raster shape changes mid-trace");
            raster_shape = shape;
        }
    }
}

PatchRegion Trace::to_raster(const PatchRegion& r) const
{
    const double s = header.raster_scale;
    return {r.x / s, r.y / s, r.w / s, r.h / s};
}

std::string encode_raster(const RgbImage& image)
{
    uLongf bound = compressBound(static_cast<uLong>(image.pixels.size()));
    std::vector<std::uint8_t> buffer(bound);
    if (compress2(buffer.data(), &bound, image.pixels.data(), static_cast<uLong>(image.pixels.size()), 6) != Z_OK)
        throw TraceError("raster compression failed");
    buffer.resize(bound);
    return base64_encode(buffer);
}

RgbImage decode_raster(int width, int height, const std::string& encoding, const std::string& data)
{
    if (width <= 0 || height <= 0) throw TraceError("raster dimensions must be positive");
    RgbImage image(width, height);
    auto bytes = base64_decode(data);
    if (encoding == "base64") {
        if (bytes.size() != image.pixels.size()) throw TraceError("raster payload size mismatch");
        image.pixels = std::move(bytes);
    } else if (encoding == "zlib+base64") {
        uLongf size = static_cast<uLongf>(image.pixels.size());
        if (uncompress(image.pixels.data(), &size, bytes.data(), static_cast<uLong>(bytes.size())) != Z_OK ||
            size != image.pixels.size())
            throw TraceError("raster payload failed to decompress");
    } else {
        throw TraceError("unknown raster encoding " + encoding);
    }
    return image;
}

void write_trace(std::ostream& out, const Trace& trace)
{
    const auto& h = trace.header;
    json header = {{"type", "header"},           {"schema", "psched.trace"},
                   {"version", h.version},       {"archetype", h.archetype},
                   {"seed", h.seed},             {"frame_width", h.frame_width},
                   {"frame_height", h.frame_height}, {"frame_period_ms", h.frame_period_ms},
                   {"keypoint_count", h.keypoint_count}, {"raster_scale", h.raster_scale},
                   {"frames", trace.frames.size()}};
    out << header.dump() << '\n';
    for (const auto& f : trace.frames) out << frame_json(f).dump() << '\n';
}

void write_trace(const std::filesystem::path& path, const Trace& trace)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceError("cannot open " + path.string() + " for writing");
    write_trace(out, trace);
    if (!out) throw TraceError("failed writing " + path.string());
}

Trace read_trace(std::istream& in)
{
    Trace trace;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                if (j.at("schema").get<std::string>() != "psched.trace") throw TraceError("not a psched trace");
                auto& h = trace.header;
                h.version = j.at("version").get<int>();
                if (h.version != trace_schema_version) throw TraceError("unsupported trace schema version");
                h.archetype = j.value("archetype", std::string("custom"));
                h.seed = j.value("seed", std::uint64_t{0});
                h.frame_width = j.at("frame_width").get<double>();
                h.frame_height = j.at("frame_height").get<double>();
                h.frame_period_ms = j.at("frame_period_ms").get<double>();
                h.keypoint_count = j.at("keypoint_count").get<int>();
                h.raster_scale = j.value("raster_scale", 4.0);
                have_header = true;
            } else if (type == "frame") {
                if (!have_header) throw TraceError("frame record before header");
                trace.frames.push_back(frame_from(j, trace.header));
            } else {
                throw TraceError("unknown record type " + type);
            }
        } catch (const json::exception& e) {
            throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const StructuralError& e) {
            throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw TraceError("trace has no header record");
    trace.validate();
    return trace;
}

Trace read_trace(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open trace " + path.string());
    return read_trace(in);
}

}  // namespace psched

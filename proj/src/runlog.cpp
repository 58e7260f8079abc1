#include "psched/runlog.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "output_json.hpp"

namespace psched {

using nlohmann::json;

namespace {

json ids_json(const std::vector<ModuleId>& ids)
{
    json a = json::array();
    for (const auto& id : ids) a.push_back(id.name());
    return a;
}

std::vector<ModuleId> ids_from(const json& j)
{
    std::vector<ModuleId> out;
    for (const auto& v : j) out.emplace_back(v.get<std::string>());
    return out;
}

json frame_json(const FrameLog& f)
{
    json j;
    j["type"] = "frame";
    j["index"] = f.index;
    j["time_ms"] = f.time_ms;
    j["decision_ms"] = f.decision_ms;
    j["requested"] = ids_json(f.requested);
    j["honored"] = ids_json(f.honored);
    j["dropped"] = ids_json(f.dropped);
    json rewards = json::array();
    for (const auto& r : f.rewards)
        rewards.push_back({{"module", r.module.name()},
                           {"gain", r.info_gain},
                           {"penalty", r.cost_penalty},
                           {"net", r.net},
                           {"forced", r.forced}});
    j["rewards"] = std::move(rewards);
    json applied = json::array();
    for (const auto& a : f.applied) {
        json ja = {{"module", a.module.name()}, {"issued", a.issued}, {"ready", a.ready}, {"items", a.items}};
        if (a.payload) ja["output"] = detail::output_to_json(a.module, *a.payload);
        applied.push_back(std::move(ja));
    }
    j["applied"] = std::move(applied);
    json tracks = json::array();
    for (const auto& t : f.tracks)
        tracks.push_back({{"id", t.id},
                          {"kind", std::string(to_string(t.kind))},
                          {"relevance", t.relevance},
                          {"motion", std::string(to_string(t.motion))},
                          {"box", json::array({t.box.x, t.box.y, t.box.w, t.box.h})}});
    j["tracks"] = std::move(tracks);
    json relevance = json::array();
    for (const auto& [id, r] : f.relevance) relevance.push_back(json::array({id, r}));
    j["relevance"] = std::move(relevance);
    j["change"] = {{"background_cr", f.change.background_cr},
                   {"histogram_shift", f.change.histogram_shift},
                   {"composition_change", f.change.composition_change}};
    return j;
}

MotionStatus parse_motion(const std::string& s)
{
    if (s == "moving") return MotionStatus::Moving;
    if (s == "stationary") return MotionStatus::Stationary;
    throw RunLogError("unknown motion status " + s);
}

FrameLog frame_from(const json& j, double period)
{
    FrameLog f;
    f.index = j.at("index").get<std::int64_t>();
    f.time_ms = j.at("time_ms").get<double>();
    f.decision_ms = j.at("decision_ms").get<double>();
    f.requested = ids_from(j.at("requested"));
    f.honored = ids_from(j.at("honored"));
    f.dropped = ids_from(j.at("dropped"));
    for (const auto& r : j.at("rewards"))
        f.rewards.push_back({ModuleId(r.at("module").get<std::string>()), r.at("gain").get<double>(),
                             r.at("penalty").get<double>(), r.at("net").get<double>(), r.at("forced").get<bool>()});
    for (const auto& a : j.at("applied")) {
        AppliedOutput out;
        out.module = ModuleId(a.at("module").get<std::string>());
        out.issued = a.at("issued").get<std::int64_t>();
        out.ready = a.at("ready").get<std::int64_t>();
        out.items = a.at("items").get<int>();
        if (auto it = a.find("output"); it != a.end()) out.payload = detail::output_from_json(*it, period).second;
        f.applied.push_back(std::move(out));
    }
    for (const auto& t : j.at("tracks")) {
        const auto& b = t.at("box");
        f.tracks.push_back({t.at("id").get<int>(), parse_entity_kind(t.at("kind").get<std::string>()),
                            t.at("relevance").get<double>(), parse_motion(t.at("motion").get<std::string>()),
                            {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()}});
    }
    for (const auto& r : j.at("relevance")) f.relevance[r.at(0).get<int>()] = r.at(1).get<double>();
    const auto& c = j.at("change");
    f.change = {c.at("background_cr").get<double>(), c.at("histogram_shift").get<double>(),
                c.at("composition_change").get<bool>()};
    return f;
}

}  // namespace

std::string_view to_string(PolicyKind p)
{
    switch (p) {
    case PolicyKind::Parallel: return "parallel";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Scheduled: return "scheduled";
    }
    return "parallel";
}

PolicyKind parse_policy(std::string_view text)
{
    if (text == "parallel") return PolicyKind::Parallel;
    if (text == "oracle") return PolicyKind::Oracle;
    if (text == "scheduled") return PolicyKind::Scheduled;
    throw StructuralError("unknown policy " + std::string(text));
}

bool FrameLog::was_requested(const ModuleId& m) const
{
    return std::find(requested.begin(), requested.end(), m) != requested.end();
}

bool FrameLog::was_honored(const ModuleId& m) const
{
    return std::find(honored.begin(), honored.end(), m) != honored.end();
}

double RunLog::inference_ms(const ModuleId& m) const
{
    for (const auto& e : modules)
        if (e.id == m) return e.inference_ms;
    throw RunLogError("run log has no module " + m.name());
}

void write_runlog(std::ostream& out, const RunLog& log)
{
    json modules = json::array();
    for (const auto& m : log.modules) modules.push_back({{"id", m.id.name()}, {"inference_ms", m.inference_ms}});
    const json header = {{"type", "runlog"},
                         {"schema", "psched.runlog"},
                         {"version", runlog_schema_version},
                         {"policy", std::string(to_string(log.policy))},
                         {"seed", log.seed},
                         {"archetype", log.archetype},
                         {"frames", log.frames.size()},
                         {"frame_period_ms", log.frame_period_ms},
                         {"modules", modules}};
    out << header.dump() << '\n';
    for (const auto& f : log.frames) out << frame_json(f).dump() << '\n';
}

void write_runlog(const std::filesystem::path& path, const RunLog& log)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RunLogError("cannot open " + path.string() + " for writing");
    write_runlog(out, log);
    if (!out) throw RunLogError("failed writing " + path.string());
}

RunLog read_runlog(std::istream& in)
{
    RunLog log;
    bool have_header = false;
    std::size_t expected = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "runlog") {
                if (j.at("schema").get<std::string>() != "psched.runlog") throw RunLogError("not a psched run log");
                if (j.at("version").get<int>() != runlog_schema_version) throw RunLogError("unsupported run log version");
                log.policy = parse_policy(j.at("policy").get<std::string>());
                log.seed = j.at("seed").get<std::uint64_t>();
                log.archetype = j.at("archetype").get<std::string>();
                log.frame_period_ms = j.at("frame_period_ms").get<double>();
                expected = j.at("frames").get<std::size_t>();
                for (const auto& m : j.at("modules"))
                    log.modules.push_back({ModuleId(m.at("id").get<std::string>()), m.at("inference_ms").get<double>()});
                have_header = true;
            } else if (type == "frame") {
                if (!have_header) throw RunLogError("frame record before header");
                log.frames.push_back(frame_from(j, log.frame_period_ms));
            } else {
                throw RunLogError("unknown record type " + type);
            }
        } catch (const json::exception& e) {
            throw RunLogError("run log line " + std::to_string(line_no) + ": " + e.what());
        } catch (const StructuralError& e) {
            throw RunLogError("run log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw RunLogError("run log has no header");
    if (log.frames.size() != expected) throw RunLogError("run log frame count differs from header");
    return log;
}

RunLog read_runlog(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunLogError("cannot open run log " + path.string());
    return read_runlog(in);
}

}  // namespace psched

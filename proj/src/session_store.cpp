#include "ecoecho/session_store.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <unistd.h>

#include "ecoecho/error.hpp"
#include "ecoecho/game_state.hpp"

namespace ecoecho::store {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 8> kKindNames{
    "PlayerInput", "NpcReply", "IntentDecided", "ItemGranted",
    "StageChanged", "VoteCast", "DecisionMade", "EndingReached",
};

void check_sequence(std::map<std::string, std::uint64_t>& next, const SessionEvent& e) {
    auto it = next.find(e.session_id);
    const std::uint64_t expected = it == next.end() ? 0 : it->second;
    if (e.sequence != expected)
        fail(ErrorCode::SequenceConflict, "session " + e.session_id + ": expected sequence " +
                                              std::to_string(expected) + ", got " +
                                              std::to_string(e.sequence));
}

json without_timestamp(const SessionEvent& e) {
    json j = to_json(e);
    j.erase("ts");
    return j;
}

} // namespace

std::string_view to_string(EventKind k) noexcept { return kKindNames[static_cast<int>(k)]; }

std::optional<EventKind> event_kind_from_string(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<EventKind>(i);
    return std::nullopt;
}

json to_json(const SessionEvent& e) {
    return {{"session_id", e.session_id},
            {"seq", e.sequence},
            {"kind", to_string(e.kind)},
            {"payload", e.payload},
            {"ts", e.timestamp}};
}

SessionEvent event_from_json(const json& j) {
    try {
        SessionEvent e;
        e.session_id = j.at("session_id").get<std::string>();
        e.sequence = j.at("seq").get<std::uint64_t>();
        const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
        if (!kind) fail(ErrorCode::SchemaError, "unknown event kind " + j.at("kind").dump());
        e.kind = *kind;
        e.payload = j.at("payload");
        e.timestamp = j.value("ts", Timestamp{0});
        return e;
    } catch (const json::exception& ex) {
        fail(ErrorCode::SchemaError, std::string("malformed event record: ") + ex.what());
    }
}

std::string to_log_line(const SessionEvent& e) { return to_json(e).dump(); }

bool same_modulo_timestamps(std::span<const SessionEvent> a, std::span<const SessionEvent> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (without_timestamp(a[i]) != without_timestamp(b[i])) return false;
    return true;
}

bool valid_session_id(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
               c == '_';
    });
}

// --- memory log --------------------------------------------------------------

void MemoryEventLog::append(const SessionEvent& e) {
    std::lock_guard lock(mu_);
    check_sequence(next_, e);
    events_.push_back(e);
    next_[e.session_id] = e.sequence + 1;
}

std::vector<SessionEvent> MemoryEventLog::events(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    std::vector<SessionEvent> out;
    for (const auto& e : events_)
        if (e.session_id == session_id) out.push_back(e);
    return out;
}

// --- file store ----------------------------------------------------------------

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    std::error_code ec;
    fs::create_directories(sessions_dir(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + sessions_dir().string() + ": " + ec.message());
    fs::create_directories(surveys_dir(), ec);
}

fs::path SessionStore::log_path(const std::string& session_id) const {
    if (!valid_session_id(session_id)) fail(ErrorCode::BadInput, "invalid session id '" + session_id + "'");
    return sessions_dir() / (session_id + ".log");
}

std::optional<std::uint64_t> SessionStore::last_sequence_on_disk(const std::string& session_id) const {
    const fs::path path = log_path(session_id);
    if (!fs::exists(path)) return std::nullopt;
    auto events = read_log_file(path);
    if (events.empty()) return std::nullopt;
    return events.back().sequence;
}

void SessionStore::append(const SessionEvent& e) {
    const fs::path path = log_path(e.session_id);
    std::lock_guard lock(mu_);
    if (!next_.count(e.session_id)) {
        if (auto last = last_sequence_on_disk(e.session_id)) next_[e.session_id] = *last + 1;
    }
    check_sequence(next_, e);

    const std::string line = to_log_line(e) + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) fail(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string err = std::strerror(errno);
            ::close(fd);
            fail(ErrorCode::IoError, "write to " + path.string() + " failed: " + err);
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd);
        fail(ErrorCode::IoError, "fsync of " + path.string() + " failed: " + err);
    }
    ::close(fd);
    next_[e.session_id] = e.sequence + 1;
}

std::vector<SessionEvent> read_log_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<SessionEvent> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        // A torn final line (crash mid-write) is dropped; anything else is corruption.
        if (j.is_discarded()) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            fail(ErrorCode::SchemaError, "corrupt record in " + path.string());
        }
        out.push_back(event_from_json(j));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SessionEvent& a, const SessionEvent& b) { return a.sequence < b.sequence; });
    return out;
}

std::vector<SessionEvent> SessionStore::load_session_events(const std::string& session_id) const {
    const fs::path path = log_path(session_id);
    if (!fs::exists(path)) fail(ErrorCode::NotFound, "unknown session '" + session_id + "'");
    return read_log_file(path);
}

bool SessionStore::exists(const std::string& session_id) const {
    return valid_session_id(session_id) && fs::exists(log_path(session_id));
}

std::vector<std::string> SessionStore::list_sessions() const {
    std::vector<std::pair<Timestamp, std::string>> found;
    for (const auto& entry : fs::directory_iterator(sessions_dir())) {
        if (entry.path().extension() != ".log") continue;
        const std::string id = entry.path().stem().string();
        if (!valid_session_id(id)) continue;
        auto events = read_log_file(entry.path());
        found.emplace_back(events.empty() ? 0 : events.front().timestamp, id);
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> ids;
    for (auto& [ts, id] : found) ids.push_back(std::move(id));
    return ids;
}

std::vector<std::vector<SessionEvent>> read_session_logs(const fs::path& sessions_dir) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(sessions_dir))
        if (entry.path().extension() == ".log") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    std::vector<std::vector<SessionEvent>> out;
    for (const auto& p : paths) out.push_back(read_log_file(p));
    return out;
}

// --- event-sourced fold ----------------------------------------------------------

SessionState replay_events(std::span<const SessionEvent> events) {
    SessionState s;
    for (const auto& e : events) {
        const json& p = e.payload;
        switch (e.kind) {
        case EventKind::StageChanged: {
            const auto to = stage_from_string(p.at("to").get<std::string>());
            if (!to) fail(ErrorCode::SchemaError, "unknown stage in event " + std::to_string(e.sequence));
            if (p.at("from").is_null()) {
                s = SessionState{};
                s.session_id = e.session_id;
                s.scenario_id = p.value("scenario_id", std::string{});
                s.created_at = e.timestamp;
            }
            enter_stage(s, *to);
            break;
        }
        case EventKind::ItemGranted: {
            const std::string item = p.at("item").get<std::string>();
            if (!s.holds(item)) s.inventory.push_back(item);
            break;
        }
        case EventKind::PlayerInput: {
            const std::string npc = p.at("npc").get<std::string>();
            s.turn_counters[npc] += 1;
            s.transcript.push_back({kPlayerSpeaker, npc, p.at("text").get<std::string>(),
                                    p.at("turn_index").get<int>(), std::nullopt, DecidedLayer::None, {}});
            break;
        }
        case EventKind::NpcReply: {
            const std::string npc = p.at("npc").get<std::string>();
            DialogueTurn t;
            t.speaker = npc;
            t.npc = npc;
            t.text = p.at("text").get<std::string>();
            t.turn_index = p.at("turn_index").get<int>();
            if (p.at("intent").is_string()) t.detected_intent = p.at("intent").get<std::string>();
            t.decided_layer = layer_from_string(p.at("decided_layer").get<std::string>()).value_or(DecidedLayer::None);
            t.granted_items = p.at("granted_items").get<std::vector<std::string>>();
            s.transcript.push_back(std::move(t));
            if (p.contains("predefined_cursor")) s.predefined_cursor[npc] = p.at("predefined_cursor").get<int>();
            for (const auto& a : p.value("actions", json::array())) apply_side_effect(s, action_from_json(a));
            break;
        }
        case EventKind::VoteCast: {
            const auto stage = stage_from_string(p.at("stage").get<std::string>());
            s.votes.push_back({p.at("round").get<int>(), p.at("votes").get<int>(),
                               stage.value_or(Stage::Opening), e.timestamp});
            s.pending_vote.reset();
            break;
        }
        case EventKind::EndingReached:
            s.ending = ending_from_string(p.at("ending").get<std::string>());
            break;
        case EventKind::IntentDecided:
        case EventKind::DecisionMade:
            break;
        }
    }
    return s;
}

} // namespace ecoecho::store

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecoecho/scenario.hpp"
#include "ecoecho/session.hpp"

namespace ecoecho::store {

enum class EventKind {
    PlayerInput,
    NpcReply,
    IntentDecided,
    ItemGranted,
    StageChanged,
    VoteCast,
    DecisionMade,
    EndingReached,
};

std::string_view to_string(EventKind k) noexcept;
std::optional<EventKind> event_kind_from_string(std::string_view s) noexcept;

struct SessionEvent {
    std::string session_id;
    std::uint64_t sequence = 0;
    EventKind kind = EventKind::PlayerInput;
    nlohmann::json payload = nlohmann::json::object();
    Timestamp timestamp = 0;

    bool operator==(const SessionEvent&) const = default;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

/// One self-contained JSON object per line, no trailing newline.
std::string to_log_line(const SessionEvent& e);

/// Compares two event sequences ignoring timestamps.
bool same_modulo_timestamps(std::span<const SessionEvent> a, std::span<const SessionEvent> b);

class EventSink {
public:
    virtual ~EventSink() = default;
    /// Throws SequenceConflict unless e.sequence is the session's last + 1 (0 first).
    virtual void append(const SessionEvent& e) = 0;
};

/// In-memory log, used by tests and dry runs.
class MemoryEventLog final : public EventSink {
public:
    void append(const SessionEvent& e) override;
    std::vector<SessionEvent> events(const std::string& session_id) const;
    const std::vector<SessionEvent>& all() const { return events_; }

private:
    mutable std::mutex mu_;
    std::vector<SessionEvent> events_;
    std::map<std::string, std::uint64_t> next_;
};

/// Line-delimited logs under `<data_dir>/sessions/<id>.log`; survey CSVs live
/// under `<data_dir>/surveys/`. Each append is fsync'ed before returning.
class SessionStore final : public EventSink {
public:
    explicit SessionStore(std::filesystem::path data_dir);

    void append(const SessionEvent& e) override;

    /// Events in sequence order. Throws NotFound for unknown sessions.
    std::vector<SessionEvent> load_session_events(const std::string& session_id) const;

    bool exists(const std::string& session_id) const;
    /// Session ids sorted by creation time of their first event, then id.
    std::vector<std::string> list_sessions() const;

    const std::filesystem::path& data_dir() const { return data_dir_; }
    std::filesystem::path sessions_dir() const { return data_dir_ / "sessions"; }
    std::filesystem::path surveys_dir() const { return data_dir_ / "surveys"; }
    std::filesystem::path log_path(const std::string& session_id) const;

private:
    std::optional<std::uint64_t> last_sequence_on_disk(const std::string& session_id) const;

    std::filesystem::path data_dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::uint64_t> next_;
};

/// Reads every `*.log` file in a directory (no store bookkeeping).
std::vector<std::vector<SessionEvent>> read_session_logs(const std::filesystem::path& sessions_dir);
std::vector<SessionEvent> read_log_file(const std::filesystem::path& path);

bool valid_session_id(std::string_view id);

/// Event-sourced reconstruction: folding a session's log yields the live state.
SessionState replay_events(std::span<const SessionEvent> events);

} // namespace ecoecho::store

#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "dlcz/sequencer.hpp"

namespace dlcz::event_log {

inline constexpr const char* format_version = "1";

// Streams per-trial records to a tab-separated file: '#' metadata lines, one
// record per line in deterministic trial order, and a trailing record-count
// footer that exposes truncated files on read-back.
class LogWriter final : public sequencer::RecordSink {
public:
    explicit LogWriter(const std::string& path);

    void begin(const sequencer::EventLog& header) override;
    void record(std::size_t entry_index, const sequencer::TrialRecord& rec) override;
    void finish(const sequencer::EventLog& log) override;

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::uint64_t records_ = 0;
    bool begun_ = false;
    bool finished_ = false;
};

// Rebuilds the campaign log from a file written by LogWriter, re-aggregating
// the per-trial records into the per-entry counters.
sequencer::EventLog read_event_log(const std::string& path);

} // namespace dlcz::event_log

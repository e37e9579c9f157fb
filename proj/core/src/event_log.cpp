#include "dlcz/event_log.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "dlcz/errors.hpp"

namespace dlcz::event_log {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_cell(model::CellIndex c) {
    return std::to_string(c.x) + "," + std::to_string(c.y);
}

std::string sanitize_label(const std::string& label) {
    std::string out = label;
    for (char& c : out) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

double parse_double(const std::string& token, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw IoError("event log: malformed " + what + " '" + token + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& token, const std::string& what) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0')
        throw IoError("event log: malformed " + what + " '" + token + "'");
    return static_cast<std::uint64_t>(v);
}

int parse_int(const std::string& token, const std::string& what) {
    char* end = nullptr;
    const long v = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0')
        throw IoError("event log: malformed " + what + " '" + token + "'");
    return static_cast<int>(v);
}

model::CellIndex parse_cell_token(const std::string& token) {
    const std::size_t comma = token.find(',');
    if (comma == std::string::npos)
        throw IoError("event log: malformed cell '" + token + "'");
    return {parse_int(token.substr(0, comma), "cell x"),
            parse_int(token.substr(comma + 1), "cell y")};
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Mirrors the campaign executor's per-record accumulation so a read-back log
// reproduces the in-memory aggregates.
void accumulate(sequencer::EntryResult& entry, const sequencer::TrialRecord& rec) {
    ++entry.trials;
    entry.attempts += rec.attempts;
    if (rec.heralded) ++entry.heralds;
    if (rec.outcome) {
        const sampler::TrialOutcome& o = *rec.outcome;
        if (o.signal_click) ++entry.c_s;
        if (o.idler_click) ++entry.c_i;
        if (o.signal_click && o.idler_click) ++entry.c_si;
        const bool plus_port = o.pair_basis_outcome
                                   ? (*o.pair_basis_outcome == 1 || *o.pair_basis_outcome == 2)
                                   : o.signal_click;
        if (plus_port && o.idler_click) ++entry.coincidences;
    }
    const std::size_t k = static_cast<std::size_t>(rec.attempts);
    if (entry.attempts_histogram.size() <= k) entry.attempts_histogram.resize(k + 1, 0);
    ++entry.attempts_histogram[k];
}

} // namespace

LogWriter::LogWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open event log '" + path + "' for writing");
}

void LogWriter::begin(const sequencer::EventLog& header) {
    if (begun_) throw IoError("event log '" + path_ + "' already begun");
    begun_ = true;
    out_ << "# format " << format_version << "\n";
    out_ << "# seed " << header.seed << "\n";
    out_ << "# config " << (header.config_hash.empty() ? "-" : header.config_hash) << "\n";
    out_ << "# convention " << header.convention << "\n";
    out_ << "# entries " << header.entries.size() << "\n";
    for (std::size_t i = 0; i < header.entries.size(); ++i) {
        const sequencer::PlanEntry& plan = header.entries[i].plan;
        out_ << "# entry " << i << " mode="
             << (plan.mode == sequencer::TrialMode::open ? "open" : "heralded");
        out_ << " cells=";
        for (std::size_t c = 0; c < plan.cells.size(); ++c) {
            if (c != 0) out_ << ";";
            out_ << fmt_cell(plan.cells[c]);
        }
        out_ << " n_heralds=" << plan.n_heralds << " n_attempts=" << plan.n_attempts;
        out_ << " storage_us=" << fmt_double(plan.storage_time_us);
        if (plan.setting) {
            out_ << " setting=" << fmt_double(plan.setting->signal.theta) << ","
                 << fmt_double(plan.setting->signal.phi) << ","
                 << fmt_double(plan.setting->idler.theta) << ","
                 << fmt_double(plan.setting->idler.phi);
        }
        if (plan.scanned) out_ << " scanned=" << fmt_cell(*plan.scanned);
        if (plan.scan_channel)
            out_ << " channel=" << sampler::scan_channel_name(*plan.scan_channel);
        out_ << " label=" << sanitize_label(plan.label) << "\n";
    }
    out_ << "# columns entry trial attempts heralded herald_us signal idler pair_outcome\n";
    if (!out_) throw IoError("failed writing event log header to '" + path_ + "'");
}

void LogWriter::record(std::size_t entry_index, const sequencer::TrialRecord& rec) {
    if (!begun_ || finished_)
        throw IoError("event log '" + path_ + "' received a record outside begin/finish");
    char buf[160];
    const sampler::TrialOutcome* o = rec.outcome ? &*rec.outcome : nullptr;
    char pair_token[4] = "-";
    if (o && o->pair_basis_outcome) {
        pair_token[0] = static_cast<char>('0' + *o->pair_basis_outcome);
        pair_token[1] = '\0';
    }
    const int written = std::snprintf(
        buf, sizeof(buf), "%zu\t%llu\t%llu\t%d\t%.17g\t%s\t%s\t%s\n", entry_index,
        static_cast<unsigned long long>(rec.trial_id),
        static_cast<unsigned long long>(rec.attempts), rec.heralded ? 1 : 0, rec.herald_time_us,
        o ? (o->signal_click ? "1" : "0") : "-", o ? (o->idler_click ? "1" : "0") : "-",
        pair_token);
    if (written <= 0 || written >= static_cast<int>(sizeof(buf)))
        throw IoError("event log record formatting overflow");
    out_.write(buf, written);
    ++records_;
}

void LogWriter::finish(const sequencer::EventLog&) {
    if (!begun_ || finished_) throw IoError("event log '" + path_ + "' finish out of order");
    finished_ = true;
    out_ << "# records " << records_ << "\n";
    out_.flush();
    if (!out_) throw IoError("failed writing event log '" + path_ + "'");
}

sequencer::EventLog read_event_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open event log '" + path + "'");

    sequencer::EventLog log;
    std::uint64_t declared_entries = 0;
    std::uint64_t record_count = 0;
    bool saw_footer = false;
    std::uint64_t footer_records = 0;

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# format ", 0) == 0) {
                if (line.substr(9) != format_version)
                    throw IoError("event log '" + path + "': unsupported format '" +
                                  line.substr(9) + "'");
            } else if (line.rfind("# seed ", 0) == 0) {
                log.seed = parse_u64(line.substr(7), "seed");
            } else if (line.rfind("# config ", 0) == 0) {
                log.config_hash = line.substr(9);
                if (log.config_hash == "-") log.config_hash.clear();
            } else if (line.rfind("# convention ", 0) == 0) {
                log.convention = line.substr(13);
            } else if (line.rfind("# entries ", 0) == 0) {
                declared_entries = parse_u64(line.substr(10), "entry count");
                log.entries.resize(declared_entries);
            } else if (line.rfind("# entry ", 0) == 0) {
                std::string rest = line.substr(8);
                const std::size_t sp = rest.find(' ');
                if (sp == std::string::npos) throw IoError("event log: malformed entry line");
                const std::uint64_t idx = parse_u64(rest.substr(0, sp), "entry index");
                if (idx >= log.entries.size())
                    throw IoError("event log: entry index out of range");
                sequencer::PlanEntry& plan = log.entries[idx].plan;
                rest = rest.substr(sp + 1);
                // The label consumes everything after "label=", so cut it out
                // first and token-split the rest.
                const std::size_t label_pos = rest.find("label=");
                if (label_pos == std::string::npos)
                    throw IoError("event log: entry line lacks a label");
                plan.label = rest.substr(label_pos + 6);
                std::string head = rest.substr(0, label_pos);
                for (const std::string& token : split(head, ' ')) {
                    if (token.empty()) continue;
                    const std::size_t eq = token.find('=');
                    if (eq == std::string::npos)
                        throw IoError("event log: malformed entry token '" + token + "'");
                    const std::string key = token.substr(0, eq);
                    const std::string value = token.substr(eq + 1);
                    if (key == "mode") {
                        if (value == "open") plan.mode = sequencer::TrialMode::open;
                        else if (value == "heralded") plan.mode = sequencer::TrialMode::heralded;
                        else throw IoError("event log: unknown mode '" + value + "'");
                    } else if (key == "cells") {
                        plan.cells.clear();
                        for (const std::string& cell : split(value, ';'))
                            plan.cells.push_back(parse_cell_token(cell));
                    } else if (key == "n_heralds") {
                        plan.n_heralds = parse_u64(value, "n_heralds");
                    } else if (key == "n_attempts") {
                        plan.n_attempts = parse_u64(value, "n_attempts");
                    } else if (key == "storage_us") {
                        plan.storage_time_us = parse_double(value, "storage_us");
                    } else if (key == "setting") {
                        const std::vector<std::string> parts = split(value, ',');
                        if (parts.size() != 4)
                            throw IoError("event log: malformed setting '" + value + "'");
                        quantum::BasisPair setting;
                        setting.signal.theta = parse_double(parts[0], "setting");
                        setting.signal.phi = parse_double(parts[1], "setting");
                        setting.idler.theta = parse_double(parts[2], "setting");
                        setting.idler.phi = parse_double(parts[3], "setting");
                        plan.setting = setting;
                    } else if (key == "scanned") {
                        plan.scanned = parse_cell_token(value);
                    } else if (key == "channel") {
                        if (value == "read") plan.scan_channel = sampler::ScanChannel::read;
                        else if (value == "write") plan.scan_channel = sampler::ScanChannel::write;
                        else throw IoError("event log: unknown channel '" + value + "'");
                    } else {
                        throw IoError("event log: unknown entry key '" + key + "'");
                    }
                }
            } else if (line.rfind("# records ", 0) == 0) {
                saw_footer = true;
                footer_records = parse_u64(line.substr(10), "record count");
            } else if (line.rfind("# columns ", 0) == 0) {
                // informational only
            } else {
                throw IoError("event log: unknown header line '" + line + "'");
            }
            continue;
        }

        if (saw_footer) throw IoError("event log '" + path + "': records after the footer");
        const std::vector<std::string> fields = split(line, '\t');
        if (fields.size() != 8)
            throw IoError("event log '" + path + "': malformed record line '" + line + "'");
        const std::uint64_t entry_index = parse_u64(fields[0], "entry index");
        if (entry_index >= log.entries.size())
            throw IoError("event log '" + path + "': record entry index out of range");
        sequencer::TrialRecord rec;
        rec.trial_id = parse_u64(fields[1], "trial id");
        rec.attempts = parse_u64(fields[2], "attempts");
        rec.heralded = parse_u64(fields[3], "heralded flag") != 0;
        rec.herald_time_us = parse_double(fields[4], "herald time");
        rec.storage_time_us = log.entries[entry_index].plan.storage_time_us;
        if (fields[5] != "-") {
            sampler::TrialOutcome outcome;
            outcome.signal_click = parse_u64(fields[5], "signal flag") != 0;
            outcome.idler_click = parse_u64(fields[6], "idler flag") != 0;
            if (fields[7] != "-") outcome.pair_basis_outcome = parse_int(fields[7], "outcome");
            rec.outcome = outcome;
        }
        accumulate(log.entries[entry_index], rec);
        ++record_count;
    }
    if (in.bad()) throw IoError("failed while reading event log '" + path + "'");
    if (!saw_footer)
        throw IoError("event log '" + path + "' lacks the record-count footer (truncated?)");
    if (footer_records != record_count)
        throw IoError("event log '" + path + "' is truncated: footer declares " +
                      std::to_string(footer_records) + " records, found " +
                      std::to_string(record_count));
    return log;
}

} // namespace dlcz::event_log

#include "mpq/trace.hpp"

#include <cinttypes>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

namespace mpq {

namespace {

struct Fields {
  bool side = true, path = false, space = false, pn = false, bytes = false;
  const char* bytes_name = "bytes";
  bool offset = false, length = false;
  const char* count_name = nullptr;
  const char* flag_name = nullptr;
  const char* value_name = nullptr;
  const char* value2_name = nullptr;
  const char* text_name = nullptr;
};

Fields fields_for(EventType t) {
  Fields f;
  switch (t) {
    case EventType::kTransferStarted:
      f.bytes = true;
      f.bytes_name = "size";
      break;
    case EventType::kHandshakeComplete:
      f.text_name = "design";
      break;
    case EventType::kPacketSent:
      f.path = f.space = f.pn = f.bytes = true;
      f.flag_name = "ack_eliciting";
      break;
    case EventType::kPacketReceived:
      f.path = f.space = f.pn = f.bytes = true;
      break;
    case EventType::kDuplicateReceived:
      f.path = f.space = f.pn = true;
      break;
    case EventType::kStreamFrameSent:
      f.path = f.space = f.pn = f.offset = f.length = true;
      f.flag_name = "fin";
      break;
    case EventType::kAckGenerated:
      f.path = f.space = f.bytes = true;
      f.count_name = "n_ranges";
      f.flag_name = "at_limit";
      break;
    case EventType::kRttSample:
      f.path = true;
      f.value_name = "latest_ms";
      f.value2_name = "srtt_ms";
      break;
    case EventType::kPacketLost:
      f.path = f.space = f.pn = true;
      f.text_name = "trigger";
      break;
    case EventType::kSpuriousLoss:
      f.path = f.space = f.pn = true;
      break;
    case EventType::kStreamRetransmit:
      f.offset = f.length = true;
      f.count_name = "nth_time";
      break;
    case EventType::kCcState:
      f.path = true;
      f.count_name = "cwnd";
      f.value_name = "pacing_rate";
      f.text_name = "mode";
      break;
    case EventType::kPathChallengeSent:
    case EventType::kPathValidated:
    case EventType::kCloseReceived:
      f.path = true;
      break;
    case EventType::kLinkEnqueue:
    case EventType::kLinkDeliver:
    case EventType::kBufferDrop:
      f.side = false;
      f.path = f.bytes = true;
      f.text_name = "dir";
      break;
    case EventType::kMaxDataSent:
      f.count_name = "limit";
      break;
    case EventType::kAckFrequencySent:
      f.count_name = "threshold";
      f.flag_name = "ignore_reorder";
      break;
    case EventType::kTransferComplete:
      f.value_name = "seconds";
      break;
  }
  return f;
}

const std::map<std::string, EventType>& event_names() {
  static const std::map<std::string, EventType> m = [] {
    std::map<std::string, EventType> out;
    for (int i = 0; i <= static_cast<int>(EventType::kTransferComplete); ++i) {
      const auto t = static_cast<EventType>(i);
      out.emplace(to_string(t), t);
    }
    return out;
  }();
  return m;
}

void append_double(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

void append_u64(std::string& s, std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%" PRIu64, v);
  s += buf;
}

void append_i64(std::string& s, std::int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%" PRId64, v);
  s += buf;
}

}  // namespace

std::string to_string(Side s) {
  switch (s) {
    case Side::kClient: return "client";
    case Side::kServer: return "server";
    case Side::kNetwork: return "network";
  }
  return "?";
}

std::string to_string(EventType t) {
  switch (t) {
    case EventType::kTransferStarted: return "transfer_started";
    case EventType::kHandshakeComplete: return "handshake_complete";
    case EventType::kPacketSent: return "packet_sent";
    case EventType::kPacketReceived: return "packet_received";
    case EventType::kDuplicateReceived: return "duplicate_received";
    case EventType::kStreamFrameSent: return "stream_frame_sent";
    case EventType::kAckGenerated: return "ack_generated";
    case EventType::kRttSample: return "rtt_sample";
    case EventType::kPacketLost: return "packet_lost";
    case EventType::kSpuriousLoss: return "spurious_loss";
    case EventType::kStreamRetransmit: return "stream_retransmit";
    case EventType::kCcState: return "cc_state";
    case EventType::kPathChallengeSent: return "path_challenge_sent";
    case EventType::kPathValidated: return "path_validated";
    case EventType::kLinkEnqueue: return "link_enqueue";
    case EventType::kLinkDeliver: return "link_deliver";
    case EventType::kBufferDrop: return "buffer_drop";
    case EventType::kMaxDataSent: return "max_data_sent";
    case EventType::kAckFrequencySent: return "ack_frequency_sent";
    case EventType::kCloseReceived: return "close_received";
    case EventType::kTransferComplete: return "transfer_complete";
  }
  return "?";
}

std::string to_jsonl_line(const TraceEvent& e) {
  const Fields f = fields_for(e.type);
  std::string s;
  s.reserve(128);
  const std::int64_t ns = e.time.time_since_epoch().count();
  char buf[48];
  std::snprintf(buf, sizeof buf, "{\"time_us\":%" PRId64 ".%03" PRId64, ns / 1000, ns % 1000);
  s += buf;
  s += ",\"event\":\"";
  s += to_string(e.type);
  s += '"';
  if (f.side) {
    s += ",\"side\":\"";
    s += to_string(e.side);
    s += '"';
  }
  if (f.path) {
    s += ",\"path\":";
    append_i64(s, e.path);
  }
  if (f.space) {
    s += ",\"space\":";
    append_i64(s, e.space);
  }
  if (f.pn) {
    s += ",\"pn\":";
    append_u64(s, e.pn);
  }
  if (f.bytes) {
    s += ",\"";
    s += f.bytes_name;
    s += "\":";
    append_u64(s, e.bytes);
  }
  if (f.offset) {
    s += ",\"offset\":";
    append_u64(s, e.offset);
  }
  if (f.length) {
    s += ",\"len\":";
    append_u64(s, e.length);
  }
  if (f.count_name) {
    s += ",\"";
    s += f.count_name;
    s += "\":";
    append_u64(s, e.count);
  }
  if (f.flag_name) {
    s += ",\"";
    s += f.flag_name;
    s += e.flag ? "\":true" : "\":false";
  }
  if (f.value_name) {
    s += ",\"";
    s += f.value_name;
    s += "\":";
    append_double(s, e.value);
  }
  if (f.value2_name) {
    s += ",\"";
    s += f.value2_name;
    s += "\":";
    append_double(s, e.value2);
  }
  if (f.text_name) {
    s += ",\"";
    s += f.text_name;
    s += "\":\"";
    s += e.text;
    s += '"';
  }
  s += '}';
  return s;
}

void Trace::write_jsonl(std::ostream& out) const {
  for (const auto& e : events_) out << to_jsonl_line(e) << '\n';
}

Trace Trace::read_jsonl(std::istream& in) {
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceEvent e;
    const auto name = j.at("event").get<std::string>();
    auto it = event_names().find(name);
    if (it == event_names().end()) throw Error("unknown trace event '" + name + "'");
    e.type = it->second;
    // time_us carries exactly three decimals, so this is lossless.
    const std::string t = j.at("time_us").dump();
    const auto dot = t.find('.');
    std::int64_t ns = std::stoll(t.substr(0, dot)) * 1000;
    if (dot != std::string::npos) {
      std::string frac = t.substr(dot + 1);
      frac.resize(3, '0');
      ns += std::stoll(frac);
    }
    e.time = Time(Duration(ns));
    const Fields f = fields_for(e.type);
    if (f.side) {
      const auto side = j.at("side").get<std::string>();
      e.side = side == "client" ? Side::kClient : side == "server" ? Side::kServer : Side::kNetwork;
    }
    if (f.path) e.path = j.at("path").get<std::int64_t>();
    if (f.space) e.space = j.at("space").get<std::int64_t>();
    if (f.pn) e.pn = j.at("pn").get<std::uint64_t>();
    if (f.bytes) e.bytes = j.at(f.bytes_name).get<std::uint64_t>();
    if (f.offset) e.offset = j.at("offset").get<std::uint64_t>();
    if (f.length) e.length = j.at("len").get<std::uint64_t>();
    if (f.count_name) e.count = j.at(f.count_name).get<std::uint64_t>();
    if (f.flag_name) e.flag = j.at(f.flag_name).get<bool>();
    if (f.value_name) e.value = j.at(f.value_name).get<double>();
    if (f.value2_name) e.value2 = j.at(f.value2_name).get<double>();
    if (f.text_name) e.text = j.at(f.text_name).get<std::string>();
    trace.events_.push_back(std::move(e));
  }
  return trace;
}

}  // namespace mpq

#include "mpq/netsim.hpp"

#include <cmath>

namespace mpq::netsim {

void EventQueue::push(Time at, Callback cb) {
  heap_.push(Entry{at, next_seq_++, std::move(cb)});
}

EventQueue::Popped EventQueue::pop() {
  // priority_queue::top is const; the callback is moved out before pop.
  auto& top = const_cast<Entry&>(heap_.top());
  Popped p{top.at, top.seq, std::move(top.cb)};
  heap_.pop();
  return p;
}

std::uint64_t LinkConfig::buffer_for(double bandwidth_bps, Duration rtt) {
  return static_cast<std::uint64_t>(std::llround(1.5 * bandwidth_bps * to_seconds(rtt) / 8.0));
}

LinkConfig LinkConfig::for_path(double bandwidth_bps, Duration rtt) {
  LinkConfig c;
  c.bandwidth_bps = bandwidth_bps;
  c.one_way_delay = rtt / 2;
  c.capacity_bytes = buffer_for(bandwidth_bps, rtt);
  return c;
}

Duration Link::serialization_time(std::size_t bytes) const {
  return from_seconds(static_cast<double>(bytes) * 8.0 / cfg_.bandwidth_bps);
}

void Link::drain(Time now) {
  while (!queue_.empty() && queue_.front().depart <= now) {
    queued_bytes_ -= queue_.front().bytes;
    queue_.pop_front();
  }
}

std::uint64_t Link::queued_bytes(Time now) {
  drain(now);
  return queued_bytes_;
}

EnqueueResult Link::enqueue(std::size_t bytes, Time now) {
  drain(now);
  ++enqueued_;
  EnqueueResult r;
  if (queued_bytes_ + bytes > cfg_.capacity_bytes) {
    ++dropped_;
    r.dropped = true;
    return r;
  }
  const Time start = std::max(now, busy_until_);
  r.depart = start + serialization_time(bytes);
  r.arrival = r.depart + cfg_.one_way_delay;
  busy_until_ = r.depart;
  queue_.push_back({r.depart, bytes});
  queued_bytes_ += bytes;
  return r;
}

void Simulator::schedule(Time at, EventQueue::Callback cb) {
  if (at < now_) at = now_;
  queue_.push(at, std::move(cb));
}

Time Simulator::run_until_idle(std::optional<Time> deadline) {
  while (!stopped_ && !queue_.empty()) {
    if (deadline && queue_.next_time() > *deadline) {
      now_ = *deadline;
      break;
    }
    auto ev = queue_.pop();
    now_ = ev.at;
    ++processed_;
    ev.cb();
  }
  return now_;
}

}  // namespace mpq::netsim

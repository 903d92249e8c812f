#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

#include "mpq/types.hpp"

namespace mpq::netsim {

// Min-queue of timed callbacks; equal times pop in insertion order.
class EventQueue {
 public:
  using Callback = std::function<void()>;

  void push(Time at, Callback cb);
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  Time next_time() const { return heap_.top().at; }

  struct Popped {
    Time at;
    std::uint64_t seq;
    Callback cb;
  };
  Popped pop();

 private:
  struct Entry {
    Time at;
    std::uint64_t seq;
    Callback cb;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

struct LinkConfig {
  double bandwidth_bps = 10e6;
  Duration one_way_delay = std::chrono::milliseconds(20);
  std::uint64_t capacity_bytes = 75000;

  // Drop-tail capacity of 1.5 x bandwidth x RTT, in bytes.
  static std::uint64_t buffer_for(double bandwidth_bps, Duration rtt);
  static LinkConfig for_path(double bandwidth_bps, Duration rtt);
};

struct EnqueueResult {
  bool dropped = false;
  Time depart{};   // end of serialization
  Time arrival{};  // depart + propagation delay
};

// Point-to-point link with a byte-counted FIFO bottleneck buffer.
class Link {
 public:
  explicit Link(LinkConfig cfg) : cfg_(cfg) {}

  EnqueueResult enqueue(std::size_t bytes, Time now);

  Duration serialization_time(std::size_t bytes) const;
  std::uint64_t queued_bytes(Time now);
  const LinkConfig& config() const { return cfg_; }

  std::uint64_t enqueued() const { return enqueued_; }
  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t delivered() const { return delivered_; }
  void on_delivered() { ++delivered_; }

 private:
  void drain(Time now);

  LinkConfig cfg_;
  struct InQueue {
    Time depart;
    std::size_t bytes;
  };
  std::deque<InQueue> queue_;
  std::uint64_t queued_bytes_ = 0;
  Time busy_until_{};
  std::uint64_t enqueued_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t delivered_ = 0;
};

// Single-threaded discrete-event driver.
class Simulator {
 public:
  Time now() const { return now_; }
  void schedule(Time at, EventQueue::Callback cb);
  void schedule_in(Duration d, EventQueue::Callback cb) { schedule(now_ + d, std::move(cb)); }

  // Runs until the queue drains, `stop()` is called or `deadline` passes.
  Time run_until_idle(std::optional<Time> deadline = std::nullopt);
  void stop() { stopped_ = true; }
  bool stopped() const { return stopped_; }
  std::uint64_t processed() const { return processed_; }

 private:
  EventQueue queue_;
  Time now_{};
  bool stopped_ = false;
  std::uint64_t processed_ = 0;
};

}  // namespace mpq::netsim

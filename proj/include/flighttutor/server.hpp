// TCP session server speaking the line protocol, plus the UDP telemetry
// listener used by telemetry-only sessions.
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "flighttutor/bc.hpp"
#include "flighttutor/config.hpp"
#include "flighttutor/protocol.hpp"
#include "flighttutor/session.hpp"

namespace ftutor {

/// Bounded FIFO that never blocks the producer: when full, the oldest
/// element is discarded and counted.
template <typename T>
class DropOldestQueue {
 public:
  explicit DropOldestQueue(std::size_t capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

  void push(T value) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_) return;
      if (items_.size() >= capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  /// Waits up to `timeout`; returns nothing on timeout or once closed and drained.
  template <typename Rep, typename Period>
  std::optional<T> pop(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed_and_empty() const {
    std::lock_guard<std::mutex> lock(mu_);
    return closed_ && items_.empty();
  }

  std::uint64_t dropped() const {
    std::lock_guard<std::mutex> lock(mu_);
    return dropped_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return items_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

/// Task a server session flies: sampled from the seed, then overridden by
/// any fields the start message carries.
TaskSpec session_task(const protocol::Start& start, const SessionSettings& settings,
                      const SimParams& sim);

class Server {
 public:
  Server(Config config, std::shared_ptr<const Policy> policy);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening sockets. Throws Error(Network) on bind failure.
  void start();
  /// Closes all sockets and joins every session.
  void stop();

  /// Bound ports, valid after start(); useful when port 0 was requested.
  int port() const { return port_; }
  int telemetry_port() const { return telemetry_port_; }

  std::uint64_t sessions_started() const { return sessions_started_; }
  std::uint64_t sessions_finished() const { return sessions_finished_; }

 private:
  struct Connection;

  void accept_loop();
  void telemetry_loop();
  void serve_connection(std::shared_ptr<Connection> conn, std::uint64_t index);
  void reap_finished();

  Config config_;
  std::shared_ptr<const Policy> policy_;
  std::string fingerprint_;
  int listen_fd_ = -1;
  int udp_fd_ = -1;
  int port_ = 0;
  int telemetry_port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> sessions_started_{0};
  std::atomic<std::uint64_t> sessions_finished_{0};
  std::thread accept_thread_;
  std::thread telemetry_thread_;
  std::mutex conns_mu_;
  std::list<std::shared_ptr<Connection>> conns_;
};

}  // namespace ftutor

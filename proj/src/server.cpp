#include "flighttutor/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <filesystem>

#include "flighttutor/error.hpp"
#include "flighttutor/rng.hpp"

namespace ftutor {

TaskSpec session_task(const protocol::Start& start, const SessionSettings& settings,
                      const SimParams& sim) {
  const double duration = start.duration.value_or(settings.duration);
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "start: duration must be > 0");
  TaskSpec task = sample_trial_task(start.seed.value_or(settings.task_seed), SeedStream::Session,
                                    0, sim, duration);
  if (start.initial_heading) {
    const double offset = heading_error(task.target_heading, task.initial_heading);
    task.initial_heading = wrap_360(*start.initial_heading);
    task.target_heading = wrap_360(task.initial_heading - offset);
  }
  if (start.target_heading) task.target_heading = wrap_360(*start.target_heading);
  if (start.target_altitude) task.target_altitude = *start.target_altitude;
  if (start.target_airspeed) task.target_airspeed = *start.target_airspeed;
  return task;
}

namespace {

constexpr auto kPollSlice = std::chrono::milliseconds(50);

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw Error(ErrorCode::Network, "invalid IPv4 address '" + host + "'");
  return addr;
}

int bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

std::string log_file_name(std::uint64_t index) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return "session-" + std::string(buf) + "-" + std::to_string(index) + ".jsonl";
}

}  // namespace

struct Server::Connection {
  explicit Connection(int fd_, std::size_t queue) : fd(fd_), out(queue), telemetry(4096) {}

  int fd;
  std::thread thread;
  std::atomic<bool> closed{false};
  std::atomic<bool> finished{false};
  std::atomic<bool> wants_telemetry{false};
  DropOldestQueue<std::string> out;
  DropOldestQueue<TelemetrySample> telemetry;
  std::mutex control_mu;
  std::optional<ControlInput> control;
};

namespace {

class ConnectionInput : public InputSource {
 public:
  ConnectionInput(std::atomic<bool>& closed, std::mutex& mu, std::optional<ControlInput>& control,
                  DropOldestQueue<TelemetrySample>& telemetry)
      : closed_(closed), mu_(mu), control_(control), telemetry_(telemetry) {}

  std::optional<ControlInput> poll_control() override {
    std::lock_guard<std::mutex> lock(mu_);
    auto c = control_;
    control_.reset();
    return c;
  }

  std::optional<TelemetrySample> next_telemetry(std::chrono::duration<double> timeout) override {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
    while (!closed_) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) break;
      if (auto s = telemetry_.pop(std::min<std::chrono::steady_clock::duration>(
              kPollSlice, deadline - now)))
        return s;
    }
    return std::nullopt;
  }

  bool closed() const override { return closed_; }

 private:
  std::atomic<bool>& closed_;
  std::mutex& mu_;
  std::optional<ControlInput>& control_;
  DropOldestQueue<TelemetrySample>& telemetry_;
};

class QueueSink : public EventSink {
 public:
  explicit QueueSink(DropOldestQueue<std::string>& out) : out_(out) {}
  void emit(const protocol::Message& m) override { out_.push(protocol::encode(m) + "\n"); }
  std::uint64_t dropped() const override { return out_.dropped(); }

 private:
  DropOldestQueue<std::string>& out_;
};

}  // namespace

Server::Server(Config config, std::shared_ptr<const Policy> policy)
    : config_(std::move(config)), policy_(std::move(policy)) {
  if (!policy_) throw Error(ErrorCode::InvalidArgument, "server requires a policy");
  config_.validate();
  // Fails early on a feature schema mismatch.
  Tutor probe(policy_, config_.tutor, config_.sim);
  fingerprint_ = fingerprint(*policy_);
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) return;
  const SessionSettings& s = config_.session;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::Network, sys_error("socket"));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = make_addr(s.host, s.port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    const std::string msg = sys_error("cannot listen on " + s.host + ":" + std::to_string(s.port));
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::Network, msg);
  }
  port_ = bound_port(listen_fd_);

  if (s.mode == SessionMode::TelemetryOnly) {
    udp_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    sockaddr_in uaddr = make_addr(s.host, s.telemetry_port);
    if (udp_fd_ < 0 || ::bind(udp_fd_, reinterpret_cast<sockaddr*>(&uaddr), sizeof uaddr) < 0) {
      const std::string msg =
          sys_error("cannot bind telemetry port " + std::to_string(s.telemetry_port));
      if (udp_fd_ >= 0) ::close(udp_fd_);
      ::close(listen_fd_);
      udp_fd_ = listen_fd_ = -1;
      throw Error(ErrorCode::Network, msg);
    }
    telemetry_port_ = bound_port(udp_fd_);
  }

  if (!s.log_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(s.log_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create log directory " + s.log_dir);
  }

  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  if (udp_fd_ >= 0) telemetry_thread_ = std::thread([this] { telemetry_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  if (telemetry_thread_.joinable()) telemetry_thread_.join();
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard<std::mutex> lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) {
    c->closed = true;
    ::shutdown(c->fd, SHUT_RDWR);
  }
  for (auto& c : conns)
    if (c->thread.joinable()) c->thread.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  if (udp_fd_ >= 0) ::close(udp_fd_);
  listen_fd_ = udp_fd_ = -1;
}

void Server::reap_finished() {
  std::lock_guard<std::mutex> lock(conns_mu_);
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->finished) {
      if ((*it)->thread.joinable()) (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::accept_loop() {
  std::uint64_t index = 0;
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(kPollSlice.count()));
    reap_finished();
    if (r <= 0 || !(pfd.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto conn = std::make_shared<Connection>(
        fd, static_cast<std::size_t>(config_.session.event_queue));
    std::lock_guard<std::mutex> lock(conns_mu_);
    conns_.push_back(conn);
    conn->thread = std::thread([this, conn, i = index++] { serve_connection(conn, i); });
  }
}

void Server::telemetry_loop() {
  char buf[1024];
  while (running_) {
    pollfd pfd{udp_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(kPollSlice.count())) <= 0) continue;
    const ssize_t n = ::recv(udp_fd_, buf, sizeof buf - 1, 0);
    if (n <= 0) continue;
    TelemetrySample sample;
    try {
      sample = parse_telemetry(std::string(buf, static_cast<std::size_t>(n)));
    } catch (const Error&) {
      continue;  // malformed datagrams are dropped
    }
    std::lock_guard<std::mutex> lock(conns_mu_);
    for (auto& c : conns_)
      if (c->wants_telemetry) c->telemetry.push(sample);
  }
}

void Server::serve_connection(std::shared_ptr<Connection> conn, std::uint64_t index) {
  Connection& c = *conn;
  std::thread writer([&c] {
    while (!c.out.closed_and_empty()) {
      if (auto line = c.out.pop(kPollSlice)) {
        if (!send_all(c.fd, *line)) {
          c.closed = true;
          break;
        }
      }
    }
  });

  QueueSink sink(c.out);
  ConnectionInput input(c.closed, c.control_mu, c.control, c.telemetry);
  std::thread session;
  std::atomic<bool> session_done{false};

  auto start_session = [&](const protocol::Start& start) {
    SessionConfig cfg;
    cfg.mode = config_.session.mode;
    cfg.tick_hz = config_.session.tick_hz;
    cfg.task = session_task(start, config_.session, config_.sim);
    cfg.thresholds = config_.tutor;
    cfg.sim = config_.sim;
    cfg.policy_path = config_.session.policy_path;
    cfg.policy_fingerprint = fingerprint_;
    cfg.realtime = config_.session.realtime;
    cfg.telemetry_timeout = config_.session.telemetry_timeout;
    cfg.replay_path = config_.session.replay_path;
    if (!config_.session.log_dir.empty())
      cfg.log_path = (std::filesystem::path(config_.session.log_dir) / log_file_name(index)).string();
    c.wants_telemetry = cfg.mode == SessionMode::TelemetryOnly;
    ++sessions_started_;
    session = std::thread([this, cfg, &sink, &input, &c, &session_done] {
      try {
        run_session(cfg, policy_, input, sink);
      } catch (const std::exception& e) {
        sink.emit(protocol::ErrorMessage{std::string("session failed: ") + e.what()});
      }
      c.wants_telemetry = false;
      ++sessions_finished_;
      session_done = true;
    });
  };

  std::string pending;
  char buf[4096];
  while (running_ && !session_done) {
    pollfd pfd{c.fd, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(kPollSlice.count()));
    if (r <= 0) continue;
    const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n <= 0) {
      c.closed = true;
      break;
    }
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = pending.find('\n')) != std::string::npos) {
      std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      try {
        const protocol::Message m = protocol::decode(line);
        if (auto* ctl = std::get_if<protocol::Control>(&m)) {
          std::lock_guard<std::mutex> lock(c.control_mu);
          c.control = ControlInput(ctl->yp, ctl->yr);
        } else if (auto* st = std::get_if<protocol::Start>(&m)) {
          if (session.joinable())
            sink.emit(protocol::ErrorMessage{"session already running"});
          else
            start_session(*st);
        } else if (std::holds_alternative<protocol::Stop>(m)) {
          c.closed = true;
        } else {
          sink.emit(protocol::ErrorMessage{"unexpected client message type '" +
                                           protocol::type_name(m) + "'"});
        }
      } catch (const Error& e) {
        sink.emit(protocol::ErrorMessage{e.what()});
      }
    }
    if (c.closed && !session.joinable()) break;
  }
  c.closed = true;
  if (session.joinable()) session.join();
  c.out.close();
  writer.join();
  ::shutdown(c.fd, SHUT_RDWR);
  ::close(c.fd);
  c.finished = true;
}

}  // namespace ftutor

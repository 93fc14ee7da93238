#include "core/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "httplib.h"
#include "json.hpp"

namespace rhombot {

using nlohmann::json;

namespace {

[[noreturn]] void sys_error(const std::string& what) {
  throw Error(ErrorCode::Io, what + ": " + std::strerror(errno));
}

bool read_exact(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::Io, "connection closed mid-message");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      sys_error("recv");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

sockaddr_in resolve(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::Usage, "not an IPv4 address: " + host);
  }
  return addr;
}

std::string error_response(const json& id, ErrorCode code, const std::string& message) {
  return json{{"v", kProtocolVersion},
              {"id", id},
              {"kind", "attach"},
              {"ok", false},
              {"error", {{"code", static_cast<int>(code)}, {"name", error_code_name(code)}, {"message", message},
                         {"details", json::object()}}}}
      .dump();
}

}  // namespace

std::string encode_message(const std::string& text) {
  if (text.size() > kMaxMessageBytes) throw Error(ErrorCode::Usage, "message too large");
  const auto n = static_cast<std::uint32_t>(text.size());
  std::string out;
  out.reserve(text.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += text;
  return out;
}

bool read_message(int fd, std::string& out) {
  unsigned char header[4];
  if (!read_exact(fd, reinterpret_cast<char*>(header), 4)) return false;
  const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                          (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (n > kMaxMessageBytes) throw Error(ErrorCode::Parse, "message length " + std::to_string(n) + " exceeds limit");
  out.assign(n, '\0');
  if (n > 0 && !read_exact(fd, out.data(), n)) throw Error(ErrorCode::Io, "connection closed mid-message");
  return true;
}

void write_all(int fd, const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      sys_error("send");
    }
    sent += static_cast<std::size_t>(r);
  }
}

std::pair<std::string, int> parse_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : address.substr(0, colon);
  const std::string port = colon == std::string::npos ? address : address.substr(colon + 1);
  std::size_t used = 0;
  int p = -1;
  try {
    p = std::stoi(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != port.size() || p < 0 || p > 65535) {
    throw Error(ErrorCode::Usage, "bad listen address '" + address + "', expected host:port");
  }
  return {host.empty() ? "127.0.0.1" : host, p};
}

void Server::Connection::send(const std::string& text) {
  std::lock_guard<std::mutex> lock(write_mutex);
  if (fd >= 0) write_all(fd, encode_message(text));
}

Server::Server(ServerOptions options) : options_(std::move(options)) {}

Server::~Server() { stop(); }

std::shared_ptr<Server::Host> Server::new_host() {
  auto host = std::make_shared<Host>();
  std::lock_guard<std::mutex> lock(mutex_);
  host->id = "s-" + std::to_string(next_host_++);
  hosts_[host->id] = host;
  return host;
}

void Server::start() {
  if (running_) return;
  const sockaddr_in addr = resolve(options_.host, options_.port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) sys_error("socket");
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    const std::string where = options_.host + ":" + std::to_string(options_.port);
    ::close(listen_fd_);
    listen_fd_ = -1;
    sys_error("bind " + where);
  }
  if (::listen(listen_fd_, 16) < 0) sys_error("listen");
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  if (options_.http_port >= 0) {
    http_ = std::make_unique<httplib::Server>();
    if (!options_.static_dir.empty() && !http_->set_mount_point("/", options_.static_dir)) {
      throw Error(ErrorCode::Io, "cannot serve static assets from " + options_.static_dir);
    }
    const int session_port = port_;
    http_->Get("/api/info", [session_port](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"protocol", kProtocolVersion}, {"session_port", session_port}}.dump(), "application/json");
    });
    if (options_.http_port == 0) {
      http_port_ = http_->bind_to_any_port(options_.host);
    } else {
      http_port_ = http_->bind_to_port(options_.host, options_.http_port) ? options_.http_port : -1;
    }
    if (http_port_ < 0) throw Error(ErrorCode::Io, "cannot bind HTTP port " + std::to_string(options_.http_port));
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  }
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    conn->host = new_host();
    conn->host->members.push_back(conn);
    std::lock_guard<std::mutex> lock(mutex_);
    // Reap finished connections so long-running servers do not accumulate them.
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->done) {
        if ((*it)->thread.joinable()) (*it)->thread.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
    connections_.push_back(conn);
    conn->thread = std::thread([this, conn] { serve(conn); });
  }
}

std::string Server::attach(const std::shared_ptr<Connection>& conn, const std::string& message, bool& handled) {
  handled = false;
  json msg;
  try {
    msg = json::parse(message);
  } catch (const json::parse_error&) {
    return {};
  }
  if (!msg.is_object() || msg.value("kind", "") != "attach") return {};
  handled = true;
  const json id = msg.value("id", json());
  if (msg.value("v", 0) != kProtocolVersion) return error_response(id, ErrorCode::Usage, "unsupported protocol version");
  const json payload = msg.value("payload", json::object());
  if (payload.is_object() && payload.contains("session")) {
    if (!payload.at("session").is_string()) return error_response(id, ErrorCode::Usage, "session must be a string");
    std::shared_ptr<Host> target;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = hosts_.find(payload.at("session").get<std::string>());
      if (it != hosts_.end()) target = it->second.lock();
    }
    if (!target) return error_response(id, ErrorCode::Usage, "no such session " + payload.at("session").dump());
    std::lock_guard<std::mutex> lock(target->mutex);
    target->members.push_back(conn);
    conn->host = target;
  }
  return json{{"v", kProtocolVersion},
              {"id", id},
              {"kind", "attach"},
              {"ok", true},
              {"payload", {{"session", conn->host->id}}}}
      .dump();
}

void Server::serve(const std::shared_ptr<Connection>& conn) {
  try {
    std::string message;
    while (running_ && read_message(conn->fd, message)) {
      bool handled = false;
      const std::string attached = attach(conn, message, handled);
      if (handled) {
        conn->send(attached);
        continue;
      }
      std::shared_ptr<Host> host = conn->host;
      SessionReply reply;
      std::vector<std::shared_ptr<Connection>> members;
      {
        std::lock_guard<std::mutex> lock(host->mutex);
        reply = host->session.handle(message);
        for (auto it = host->members.begin(); it != host->members.end();) {
          if (auto m = it->lock()) {
            members.push_back(std::move(m));
            ++it;
          } else {
            it = host->members.erase(it);
          }
        }
      }
      for (const std::string& f : reply.frames) {
        for (const auto& m : members) {
          try {
            m->send(f);
          } catch (const Error&) {
            // A dead subscriber must not stall the writer.
          }
        }
      }
      conn->send(reply.response);
    }
  } catch (const Error&) {
  }
  {
    std::lock_guard<std::mutex> lock(conn->write_mutex);
    ::close(conn->fd);
    conn->fd = -1;
  }
  conn->done = true;
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    conns.swap(connections_);
  }
  for (const auto& c : conns) {
    {
      std::lock_guard<std::mutex> lock(c->write_mutex);
      if (c->fd >= 0) ::shutdown(c->fd, SHUT_RDWR);
    }
    if (c->thread.joinable()) c->thread.join();
  }
  if (http_) {
    http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
    http_.reset();
  }
}

void Server::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

WireClient::WireClient(const std::string& host, int port) {
  const sockaddr_in addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_error("socket");
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd_);
    fd_ = -1;
    sys_error("connect " + host + ":" + std::to_string(port));
  }
  const int yes = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
}

WireClient::~WireClient() {
  if (fd_ >= 0) ::close(fd_);
}

void WireClient::send(const std::string& text) { write_all(fd_, encode_message(text)); }

std::string WireClient::receive(int timeout_ms) {
  pollfd p{fd_, POLLIN, 0};
  const int r = ::poll(&p, 1, timeout_ms);
  if (r == 0) throw Error(ErrorCode::Io, "timed out waiting for a message");
  if (r < 0) sys_error("poll");
  std::string out;
  if (!read_message(fd_, out)) throw Error(ErrorCode::Io, "server closed the connection");
  return out;
}

std::string WireClient::request(const std::string& text, std::vector<std::string>* frames, int timeout_ms) {
  send(text);
  while (true) {
    std::string msg = receive(timeout_ms);
    const json j = json::parse(msg);
    if (j.value("kind", "") == "frame") {
      if (frames) frames->push_back(std::move(msg));
      continue;
    }
    return msg;
  }
}

}  // namespace rhombot

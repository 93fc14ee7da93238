#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "core/session.hpp"

namespace httplib {
class Server;
}

namespace rhombot {

inline constexpr std::uint32_t kMaxMessageBytes = 16u << 20;

/// Length-prefixed framing: 4-byte big-endian length, then the message text.
std::string encode_message(const std::string& text);
/// Blocking exact read of one message; false on orderly close.
bool read_message(int fd, std::string& out);
void write_all(int fd, const std::string& bytes);

/// "host:port" into its parts; a bare port means 127.0.0.1.
std::pair<std::string, int> parse_listen_address(const std::string& address);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;         ///< session protocol, 0 picks a free port
  int http_port = -1;   ///< static assets, -1 disables, 0 picks a free port
  std::string static_dir;
};

/// Session host. Each connection starts with its own session; the "attach"
/// message joins another connection's session (payload {session}) or, with
/// an empty payload, reports the current session id. Requests on one session
/// are serialized; frame broadcasts go to every connection on that session.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  int port() const { return port_; }
  int http_port() const { return http_port_; }

 private:
  struct Connection;
  struct Host {
    std::string id;
    std::mutex mutex;
    Session session;
    std::vector<std::weak_ptr<Connection>> members;
  };
  struct Connection {
    int fd = -1;
    std::mutex write_mutex;
    std::shared_ptr<Host> host;
    std::thread thread;
    std::atomic<bool> done{false};
    void send(const std::string& text);
  };

  void accept_loop();
  void serve(const std::shared_ptr<Connection>& conn);
  std::string attach(const std::shared_ptr<Connection>& conn, const std::string& message, bool& handled);
  std::shared_ptr<Host> new_host();

  ServerOptions options_;
  int listen_fd_ = -1;
  int port_ = 0;
  int http_port_ = -1;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread http_thread_;
  std::unique_ptr<httplib::Server> http_;
  std::mutex mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::map<std::string, std::weak_ptr<Host>> hosts_;
  std::uint64_t next_host_ = 1;
};

/// Minimal blocking client for the session protocol.
class WireClient {
 public:
  WireClient(const std::string& host, int port);
  ~WireClient();
  WireClient(const WireClient&) = delete;
  WireClient& operator=(const WireClient&) = delete;

  void send(const std::string& text);
  /// Next message; throws Error(Io) on close or after timeout_ms.
  std::string receive(int timeout_ms = 10000);
  /// Sends a request and returns its response, collecting frames that arrive first or until then.
  std::string request(const std::string& text, std::vector<std::string>* frames = nullptr, int timeout_ms = 10000);

 private:
  int fd_ = -1;
};

}  // namespace rhombot

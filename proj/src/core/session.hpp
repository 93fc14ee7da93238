#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/scenario.hpp"

namespace rhombot {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kUndoDepth = 64;

/// Output of one request: exactly one response plus any frame broadcasts.
struct SessionReply {
  std::string response;
  std::vector<std::string> frames;
};

/// Planning session driven by protocol messages {v, id, kind, payload}.
/// Kinds: load, get_state, propose, commit, set_theta, undo, subscribe_frames.
/// Only load, commit, set_theta and undo change the state; each bumps the
/// state version once. Not thread-safe; the server serializes access.
class Session {
 public:
  SessionReply handle(const std::string& message);

  bool loaded() const { return tree_.has_value(); }
  std::uint64_t version() const { return version_; }
  const KTree& tree() const;
  bool subscribed() const { return subscribed_; }
  /// Every message handled so far, in order.
  const std::vector<std::string>& log() const { return log_; }
  /// Canonical text of the current state (same as the get_state payload).
  std::string state_text() const;

  static Session replay(const std::vector<std::string>& log);

 private:
  struct Proposal {
    std::uint64_t version = 0;
    MorphPivotResult result;
  };

  std::optional<KTree> tree_;
  ScenarioDefaults defaults_;
  std::uint64_t version_ = 0;
  std::uint64_t next_op_ = 1;
  std::map<std::string, Proposal> proposals_;
  std::deque<KTree> history_;
  bool subscribed_ = false;
  std::vector<std::string> log_;

  void install(KTree next);
};

/// The frame broadcast for one simulation frame.
std::string frame_message(const SimFrame& frame);

}  // namespace rhombot

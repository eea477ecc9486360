#pragma once

#include "mpmsim/scenarios.hpp"
#include "mpmsim/simulation.hpp"
#include "mpmsim/wire.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mpmsim {

/// Single-value mailbox: a put replaces whatever has not been taken yet.
template <typename T>
class LatestSlot {
 public:
  void put(T value) {
    {
      std::lock_guard lock(mutex_);
      value_ = std::move(value);
      ++puts_;
    }
    ready_.notify_one();
  }
  std::optional<T> take() {
    std::lock_guard lock(mutex_);
    return std::exchange(value_, std::nullopt);
  }
  /// Waits until a value is present or `stop` returns true.
  template <typename Stop>
  std::optional<T> wait_take(Stop&& stop) {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return value_.has_value() || stop(); });
    return std::exchange(value_, std::nullopt);
  }
  void notify() { ready_.notify_all(); }
  std::size_t puts() const {
    std::lock_guard lock(mutex_);
    return puts_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::optional<T> value_;
  std::size_t puts_ = 0;
};

struct SessionOptions {
  Real frames_per_second = 20;
  Real max_speed = 0.5;  // m/s, tool translation clamp
  bool produce_mesh = true;
};

struct SessionFrame {
  std::uint32_t frame_index = 0;
  std::vector<std::uint8_t> bytes;  // empty when the encoder skipped the frame
  StepReport report;
};

/// Transport-independent interactive session. Network threads call post();
/// the physics thread calls tick() once per frame. Tool targets are kept per
/// collider group with freshest-wins semantics; pause/resume/reset/material
/// commands are applied in arrival order at the start of the next tick.
class Session {
 public:
  using SceneFactory = std::function<SceneConfig(const std::optional<std::string>& scenario)>;
  using Logger = std::function<void(const std::string&)>;

  Session(SceneFactory factory, std::filesystem::path base_dir = {}, SessionOptions options = {},
          Logger warn = {})
      : factory_(std::move(factory)), base_dir_(std::move(base_dir)), options_(options), warn_(std::move(warn)) {
    load(std::nullopt);
  }

  /// Thread-safe. Returns false (and logs) for malformed messages.
  bool post(std::string_view text) {
    ControlMsg msg;
    try {
      msg = parse_control(text);
    } catch (const ControlError& e) {
      if (warn_) warn_(std::string("ignored control message: ") + e.what());
      return false;
    }
    std::lock_guard lock(mutex_);
    if (auto* target = std::get_if<SetToolTarget>(&msg)) {
      targets_[target->collider_group] = *target;
    } else {
      commands_.push_back(std::move(msg));
    }
    return true;
  }

  /// Runs one frame unless paused. Returns nullopt while paused.
  std::optional<SessionFrame> tick() {
    std::map<std::string, SetToolTarget> targets;
    std::deque<ControlMsg> commands;
    {
      std::lock_guard lock(mutex_);
      targets = targets_;
      commands.swap(commands_);
    }
    for (auto& cmd : commands) apply(cmd, targets);
    if (paused_) return std::nullopt;

    const auto start = detail::Clock::now();
    sim_->command(steer(targets));
    SessionFrame out;
    out.report = sim_->advance();
    out.frame_index = static_cast<std::uint32_t>(sim_->frame_index() - 1);
    if (options_.produce_mesh) {
      const auto mesh = sim_->surface();
      const auto frame = make_wire_frame(mesh, sim_->colliders(), sim_->jaws(), out.frame_index, sim_->state().time);
      if (auto bytes = encode_frame(frame)) {
        out.bytes = std::move(*bytes);
      } else if (warn_) {
        warn_("frame " + std::to_string(out.frame_index) + " skipped: mesh exceeds the vertex limit");
      }
    }
    out.report.total_ms = detail::elapsed_ms(start);
    return out;
  }

  Real frame_dt() const { return sim_->scene().frame_dt(); }
  bool paused() const { return paused_; }
  const Simulation& simulation() const { return *sim_; }
  const SessionOptions& options() const { return options_; }

 private:
  void load(const std::optional<std::string>& scenario) {
    sim_ = std::make_unique<Simulation>(factory_(scenario), base_dir_);
    std::vector<ColliderCommand> hold(sim_->colliders().size());
    for (std::size_t c = 0; c < hold.size(); ++c) hold[c].jaw = sim_->jaws()[c];
    sim_->command(std::move(hold));
  }

  void apply(const ControlMsg& cmd, std::map<std::string, SetToolTarget>& targets) {
    if (std::holds_alternative<Pause>(cmd)) {
      paused_ = true;
    } else if (std::holds_alternative<Resume>(cmd)) {
      paused_ = false;
    } else if (const auto* reset = std::get_if<Reset>(&cmd)) {
      try {
        load(reset->scenario);
        std::lock_guard lock(mutex_);
        targets_.clear();
        targets.clear();
      } catch (const Error& e) {
        if (warn_) warn_(std::string("reset failed: ") + e.what());
      }
    } else if (const auto* mat = std::get_if<SetMaterial>(&cmd)) {
      try {
        sim_->set_material(mat->young_modulus, mat->poisson_ratio);
      } catch (const Error& e) {
        if (warn_) warn_(std::string("set_material rejected: ") + e.what());
      }
    }
  }

  /// Per-collider velocities that move each targeted group toward its target
  /// within one frame, translation limited to max_speed. Group members keep
  /// their offsets from the group centroid.
  std::vector<ColliderCommand> steer(const std::map<std::string, SetToolTarget>& targets) {
    auto& colliders = sim_->colliders();
    std::vector<ColliderCommand> out(colliders.size());
    for (std::size_t c = 0; c < colliders.size(); ++c) out[c].jaw = sim_->jaws()[c];
    const Real h = frame_dt();
    for (const auto& [group, target] : targets) {
      std::vector<std::size_t> members;
      for (std::size_t c = 0; c < colliders.size(); ++c)
        if (colliders[c].group == group) members.push_back(c);
      if (members.empty()) {
        if (warn_ && unknown_groups_.insert(group).second) warn_("no collider group named '" + group + "'");
        continue;
      }
      Vec3 centroid = Vec3::Zero();
      for (auto c : members) centroid += colliders[c].translation;
      centroid /= static_cast<Real>(members.size());
      Vec3 step = target.position - centroid;
      const Real limit = options_.max_speed * h;
      if (step.norm() > limit) step *= limit / step.norm();
      const Quat current(colliders[members.front()].rotation);
      const Vec3 omega = angular_velocity_between(current, target.orientation, h);
      for (auto c : members) {
        out[c].linear_velocity = step / h + omega.cross(colliders[c].translation - centroid);
        out[c].angular_velocity = omega;
        out[c].jaw = target.jaw;
      }
    }
    return out;
  }

  SceneFactory factory_;
  std::filesystem::path base_dir_;
  SessionOptions options_;
  Logger warn_;
  std::unique_ptr<Simulation> sim_;
  bool paused_ = false;
  std::set<std::string> unknown_groups_;

  std::mutex mutex_;
  std::map<std::string, SetToolTarget> targets_;
  std::deque<ControlMsg> commands_;
};

/// Fixed-rate driver: calls tick() every 1/fps seconds of wall clock and hands
/// each frame to `publish`. Ticks missed because a frame ran long are dropped
/// rather than replayed.
template <typename Publish, typename Stop>
void run_session(Session& session, Publish&& publish, Stop&& stop) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<Real>(1.0 / session.options().frames_per_second));
  auto next = clock::now();
  while (!stop()) {
    if (auto frame = session.tick()) publish(std::move(*frame));
    next += period;
    const auto now = clock::now();
    if (now > next) next = now;
    std::this_thread::sleep_until(next);
  }
}

}  // namespace mpmsim

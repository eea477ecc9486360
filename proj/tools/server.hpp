#pragma once

#include "mpmsim/session.hpp"

#include <cstddef>
#include <filesystem>
#include <string>

struct ServeOptions {
  std::string bind = "127.0.0.1:8765";
  mpmsim::SessionOptions session;
  std::size_t max_frames = 0;  // 0: until interrupted
  std::filesystem::path base_dir;
};

/// Runs an interactive session over WebSocket until interrupted. Returns a
/// process exit code.
int serve_scene(mpmsim::Session::SceneFactory factory, const ServeOptions& options);

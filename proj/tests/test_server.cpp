#include "mpmsim/wire.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <regex>
#include <thread>

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
namespace fs = std::filesystem;
using namespace mpmsim;

namespace {

/// `mpmsim serve` child process listening on an ephemeral port.
class ServerProcess {
 public:
  explicit ServerProcess(std::vector<std::string> args) {
    log_ = fs::temp_directory_path() / ("mpmsim_serve_" + std::to_string(::getpid()) + ".log");
    fs::remove(log_);
    pid_ = ::fork();
    if (pid_ == 0) {
      const int fd = ::open(log_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      ::dup2(fd, STDERR_FILENO);
      ::dup2(fd, STDOUT_FILENO);
      std::vector<char*> argv{const_cast<char*>(MPMSIM_CLI)};
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(MPMSIM_CLI, argv.data());
      ::_exit(127);
    }
    const std::regex listening(R"(listening on ws://[0-9.]+:([0-9]+))");
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
    while (std::chrono::steady_clock::now() < deadline) {
      std::smatch m;
      const std::string text = log();
      if (std::regex_search(text, m, listening)) {
        port_ = static_cast<unsigned short>(std::stoi(m[1]));
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  ~ServerProcess() {
    if (pid_ > 0 && !exited_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
    fs::remove(log_);
  }

  unsigned short port() const { return port_; }
  std::string log() const {
    std::ifstream in(log_);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  /// Sends SIGTERM and returns the exit status.
  int terminate() {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    exited_ = true;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

 private:
  pid_t pid_ = -1;
  fs::path log_;
  unsigned short port_ = 0;
  bool exited_ = false;
};

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  WireFrame read_frame() {
    beast::flat_buffer buffer;
    for (;;) {
      ws_.read(buffer);
      if (ws_.got_binary()) break;
      buffer.clear();
    }
    const auto data = buffer.data();
    const auto* p = static_cast<const std::uint8_t*>(data.data());
    return decode_frame(std::span(p, data.size()));
  }
  void send_text(const std::string& text) {
    ws_.text(true);
    ws_.write(net::buffer(text));
  }
  void send_binary(const std::vector<std::uint8_t>& bytes) {
    ws_.binary(true);
    ws_.write(net::buffer(bytes));
  }
  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

constexpr double kDx = 2.0 / 64;

/// Highest mesh vertex inside the square xz footprint around (cx, cz).
float top_under(const WireFrame& f, float cx, float cz, float half) {
  float top = -1;
  for (const auto& v : f.vertices)
    if (std::abs(v[0] - cx) < half && std::abs(v[2] - cz) < half) top = std::max(top, v[1]);
  return top;
}

}  // namespace

TEST(Server, StreamsFramesAndFollowsSteering) {
  ServerProcess server({"serve", "--scenario", "push", "--particles", "3000", "--bind", "127.0.0.1:0", "--max-speed",
                        "5"});
  ASSERT_NE(server.port(), 0) << server.log();
  Client client(server.port());

  WireFrame first = client.read_frame();
  ASSERT_FALSE(first.vertices.empty());
  ASSERT_EQ(first.colliders.size(), 1u);
  EXPECT_EQ(first.normals.size(), first.vertices.size());
  const auto pose = first.colliders[0].translation;
  const float cx = pose[0], cz = pose[2];
  WireFrame latest = client.read_frame();
  EXPECT_GT(latest.frame_index, first.frame_index);
  const float rest_top = top_under(latest, cx, cz, 3 * kDx);
  ASSERT_GT(rest_top, 0);

  // Press the tool 7 cells down, into the slab.
  SetToolTarget target;
  target.collider_group = "tool";
  target.position = Vec3(pose[0], pose[1] - 7 * kDx, pose[2]);
  client.send_text(to_json_text(target));
  const std::uint32_t sent_after = latest.frame_index;

  bool dented = false;
  float lowest_tool = pose[1];
  while (latest.frame_index <= sent_after + 6) {
    latest = client.read_frame();
    lowest_tool = std::min(lowest_tool, latest.colliders[0].translation[1]);
    if (latest.frame_index <= sent_after + 6 && top_under(latest, cx, cz, 3 * kDx) < rest_top - kDx) dented = true;
  }
  EXPECT_LT(lowest_tool, pose[1] - 5 * kDx);
  EXPECT_TRUE(dented) << "mesh under the tool did not move within 5 frames";

  // Malformed input is logged and ignored; the stream keeps flowing.
  client.send_text("{not json");
  client.send_binary({1, 2, 3});
  const auto before = client.read_frame().frame_index;
  EXPECT_GT(client.read_frame().frame_index, before);
  client.close();

  // A later client still gets frames.
  Client again(server.port());
  EXPECT_FALSE(again.read_frame().vertices.empty());
  again.close();

  const std::string log = server.log();
  EXPECT_NE(log.find("ignored control message"), std::string::npos) << log;
  EXPECT_EQ(server.terminate(), 0) << server.log();
}

TEST(Server, ResetWhilePausedRestartsFrameCounter) {
  ServerProcess server({"serve", "--scenario", "push", "--particles", "1000", "--bind", "127.0.0.1:0"});
  ASSERT_NE(server.port(), 0) << server.log();
  Client client(server.port());
  client.read_frame();
  client.send_text(R"({"type":"pause"})");
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  client.send_text(R"({"type":"reset"})");
  client.send_text(R"({"type":"resume"})");
  // After the reset the frame counter restarts; drain anything sent before the pause.
  for (int k = 0; k < 10; ++k) {
    if (client.read_frame().frame_index == 0) {
      SUCCEED();
      client.close();
      server.terminate();
      return;
    }
  }
  ADD_FAILURE() << "no frame 0 after reset";
}

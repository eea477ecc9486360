#include "server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <memory>
#include <set>
#include <thread>

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

void log_line(const std::string& msg) { std::fprintf(stderr, "[serve] %s\n", msg.c_str()); }

using Payload = std::shared_ptr<const std::vector<std::uint8_t>>;

class Client;

/// Connected clients. Lives on the io thread only.
struct Hub {
  std::set<std::shared_ptr<Client>> clients;
};

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, Hub& hub, mpmsim::Session& session)
      : ws_(std::move(socket)), hub_(hub), session_(session) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return log_line("handshake failed: " + ec.message());
      self->hub_.clients.insert(self);
      log_line("client connected");
      self->read();
    });
  }

  /// Keeps only the newest unsent frame; an older pending one is dropped.
  void offer(Payload frame) {
    if (writing_) {
      pending_ = std::move(frame);
      return;
    }
    write(std::move(frame));
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close(ec);
      if (self->ws_.got_text()) {
        self->session_.post(beast::buffers_to_string(self->buffer_.data()));
      } else {
        log_line("ignored binary message from client");
      }
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write(Payload frame) {
    writing_ = true;
    current_ = std::move(frame);
    ws_.binary(true);
    ws_.async_write(net::buffer(*current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close(ec);
      if (self->pending_) self->write(std::exchange(self->pending_, nullptr));
    });
  }

  void close(beast::error_code ec) {
    if (hub_.clients.erase(shared_from_this()))
      log_line(ec == websocket::error::closed ? "client disconnected" : "client dropped: " + ec.message());
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Hub& hub_;
  mpmsim::Session& session_;
  bool writing_ = false;
  Payload current_, pending_;
};

void accept_loop(tcp::acceptor& acceptor, Hub& hub, mpmsim::Session& session) {
  acceptor.async_accept([&](beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted) return;
    if (!ec) std::make_shared<Client>(std::move(socket), hub, session)->start();
    accept_loop(acceptor, hub, session);
  });
}

std::atomic<bool> g_interrupted{false};

}  // namespace

int serve_scene(mpmsim::Session::SceneFactory factory, const ServeOptions& options) {
  const auto colon = options.bind.rfind(':');
  if (colon == std::string::npos) {
    log_line("--bind must be HOST:PORT");
    return 2;
  }
  const std::string host = options.bind.substr(0, colon);
  unsigned short port = 0;
  try {
    port = static_cast<unsigned short>(std::stoi(options.bind.substr(colon + 1)));
  } catch (const std::exception&) {
    log_line("bad port in --bind");
    return 2;
  }

  mpmsim::Session session(std::move(factory), options.base_dir, options.session, log_line);

  net::io_context ioc;
  tcp::acceptor acceptor(ioc);
  try {
    const tcp::endpoint endpoint(net::ip::make_address(host), port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen();
  } catch (const std::exception& e) {
    log_line(std::string("cannot listen on ") + options.bind + ": " + e.what());
    return 2;
  }
  log_line("listening on ws://" + host + ":" + std::to_string(acceptor.local_endpoint().port()));

  Hub hub;
  accept_loop(acceptor, hub, session);
  auto guard = net::make_work_guard(ioc);
  std::thread io([&] { ioc.run(); });

  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });

  std::size_t frames = 0;
  int code = 0;
  try {
    mpmsim::run_session(
        session,
        [&](mpmsim::SessionFrame frame) {
          ++frames;
          if (frame.bytes.empty()) return;
          auto payload = std::make_shared<const std::vector<std::uint8_t>>(std::move(frame.bytes));
          net::post(ioc, [&hub, payload] {
            for (const auto& c : hub.clients) c->offer(payload);
          });
        },
        [&] { return g_interrupted.load() || (options.max_frames && frames >= options.max_frames); });
  } catch (const mpmsim::NumericalError& e) {
    log_line(std::string("numerical failure: ") + e.what());
    code = 3;
  }

  net::post(ioc, [&] {
    acceptor.close();
    hub.clients.clear();
  });
  guard.reset();
  ioc.stop();
  io.join();
  log_line("stopped after " + std::to_string(frames) + " frames");
  return code;
}

#include "todsim/gateway.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "todsim/simulation.hpp"
#include "todsim/stability.hpp"

namespace todsim {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

void GatewayOptions::validate() const {
  if (!(speed > 0.0) || !std::isfinite(speed)) throw ScenarioError("bad_option", "speed must be positive");
  if (!(publish_hz > 0.0) || !std::isfinite(publish_hz)) throw ScenarioError("bad_option", "publish-hz must be positive");
  if (!(spring_stiffness >= 0.0)) throw ScenarioError("bad_option", "spring stiffness must be non-negative");
  if (client_queue == 0 || inbox_capacity == 0) throw ScenarioError("bad_option", "queue sizes must be positive");
}

void parse_bind(const std::string& text, GatewayOptions& options) {
  std::string host = options.address;
  std::string port = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
    if (host.empty()) host = "0.0.0.0";
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    options.port = static_cast<unsigned short>(p);
  } catch (const std::exception&) {
    throw ScenarioError("bad_option", "invalid bind address '" + text + "'");
  }
  options.address = host;
}

namespace {

class WsSession;

struct Pending {
  Command command;
  std::weak_ptr<WsSession> origin;
};

/// State touched from the network thread and the simulation thread.
struct Shared {
  net::io_context ioc{1};
  std::set<std::shared_ptr<WsSession>> sessions;  // network thread only
  std::mutex inbox_mutex;
  std::deque<Pending> inbox;
  std::size_t inbox_capacity = 256;
  std::size_t client_queue = 8;
  std::atomic<std::size_t> dropped{0};
  std::string health;
  std::string hello;
};

/// Replaces the gain named by path ("master.x", "slave.x" or "x") in a scenario copy.
void apply_gain(Scenario& sc, const std::string& path, double value) {
  std::string who = "both";
  std::string name = path;
  if (const auto dot = path.find('.'); dot != std::string::npos) {
    who = path.substr(0, dot);
    name = path.substr(dot + 1);
  }
  if (who != "both" && who != "master" && who != "slave") throw ScenarioError("bad_gain", "unknown gain target '" + who + "'");
  auto set = [&](ManipulatorGains& g) {
    if (name == "alpha") g.alpha = value;
    else if (name == "beta") g.beta = value;
    else if (name == "kappa") g.kappa = value;
    else if (name == "lambda") g.lambda = value;
    else if (name == "gamma") g.gamma = value;
    else if (name == "c") g.c = value;
    else throw ScenarioError("bad_gain", "unknown gain '" + name + "'");
  };
  if (who != "slave") set(sc.master.gains);
  if (who != "master") {
    for (auto& s : sc.slave) set(s.gains);
  }
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Shared& shared) : ws_(std::move(socket)), shared_(shared) {}

  void accept(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->shared_.sessions.insert(self);
      self->send(std::make_shared<const std::string>(self->shared_.hello), false);
      self->read();
    });
  }

  /// Network thread only. Snapshots are droppable; replies are not.
  void send(std::shared_ptr<const std::string> text, bool droppable) {
    if (closed_) return;
    if (droppable) {
      std::size_t count = 0;
      for (std::size_t k = writing_ ? 1 : 0; k < queue_.size(); ++k) count += queue_[k].droppable ? 1 : 0;
      if (count >= shared_.client_queue) {
        for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it) {
          if (it->droppable) {
            queue_.erase(it);
            ++shared_.dropped;
            break;
          }
        }
      }
    }
    queue_.push_back({std::move(text), droppable});
    if (!writing_) write();
  }

 private:
  struct Out {
    std::shared_ptr<const std::string> text;
    bool droppable = false;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read();
    });
  }

  void handle(const std::string& text) {
    try {
      Command cmd = parse_command(text);
      std::lock_guard lock(shared_.inbox_mutex);
      if (shared_.inbox.size() >= shared_.inbox_capacity) {
        send(std::make_shared<const std::string>(encode_error(to_string(cmd.kind), "command inbox full")), false);
        return;
      }
      shared_.inbox.push_back({std::move(cmd), weak_from_this()});
    } catch (const WireError& e) {
      send(std::make_shared<const std::string>(encode_error(e.command(), e.what())), false);
    }
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      self->writing_ = false;
      if (ec) self->close();
      if (self->closed_) {
        self->queue_.clear();
        return;
      }
      if (!self->queue_.empty()) self->write();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (!writing_) queue_.clear();
    shared_.sessions.erase(shared_from_this());
  }

  websocket::stream<beast::tcp_stream> ws_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  std::deque<Out> queue_;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Shared& shared) : stream_(std::move(socket)), shared_(shared) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) self->route();
    });
  }

 private:
  void route() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), shared_)->accept(std::move(req_));
        return;
      }
      respond(http::status::not_found, "text/plain", "not found\n");
      return;
    }
    if (req_.method() == http::verb::get && req_.target() == "/healthz") {
      respond(http::status::ok, "application/json", shared_.health);
    } else {
      respond(http::status::not_found, "text/plain", "not found\n");
    }
  }

  void respond(http::status status, const char* type, const std::string& body) {
    res_ = {};
    res_.result(status);
    res_.version(req_.version());
    res_.set(http::field::server, "todsim");
    res_.set(http::field::content_type, type);
    res_.keep_alive(false);
    res_.body() = body;
    res_.prepare_payload();
    http::async_write(stream_, res_, [self = shared_from_this()](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  http::response<http::string_body> res_;
};

}  // namespace

struct Gateway::Impl {
  Scenario scenario;
  GatewayOptions options;
  Shared shared;
  tcp::acceptor acceptor{shared.ioc};
  std::thread io_thread;
  std::thread sim_thread;
  std::atomic<bool> running{false};
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  unsigned short bound_port = 0;

  // Simulation thread only.
  std::unique_ptr<Simulation> sim;
  bool paused = false;
  bool certificate_violated = false;
  std::future<bool> certificate_job;
  bool certificate_stale = false;
  Clock::time_point wall_anchor;
  double sim_anchor = 0.0;

  void accept() {
    acceptor.async_accept(net::make_strand(shared.ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpSession>(std::move(socket), shared)->run();
      accept();
    });
  }

  void post(std::function<void()> fn) { net::post(shared.ioc, std::move(fn)); }

  void reply(const std::weak_ptr<WsSession>& origin, std::string text) {
    post([origin, msg = std::make_shared<const std::string>(std::move(text))] {
      if (auto s = origin.lock()) s->send(msg, false);
    });
  }

  void broadcast(std::string text, bool droppable) {
    post([this, droppable, msg = std::make_shared<const std::string>(std::move(text))] {
      const auto sessions = shared.sessions;
      for (const auto& s : sessions) s->send(msg, droppable);
    });
  }

  void reanchor() {
    wall_anchor = Clock::now();
    sim_anchor = sim->time();
  }

  void recheck_certificate() {
    if (certificate_job.valid()) {
      certificate_stale = true;
      return;
    }
    const StabilityProblem problem = problem_from_scenario(sim->scenario());
    certificate_job = std::async(std::launch::async, [problem] { return feasibility_search(problem).feasible; });
  }

  void poll_certificate() {
    if (!certificate_job.valid() || certificate_job.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
    certificate_violated = !certificate_job.get();
    if (certificate_stale) {
      certificate_stale = false;
      recheck_certificate();
    }
  }

  void publish() {
    Snapshot s = sim->snapshot();
    s.paused = paused;
    s.certificate_violated = certificate_violated;
    broadcast(encode_snapshot(s), true);
  }

  /// Returns true when the state was replaced and should be published at once.
  bool apply(const Command& cmd) {
    switch (cmd.kind) {
      case CommandKind::SetTarget: {
        ForceProfile f;
        f.kind = ForceKind::SpringToTarget;
        f.stiffness = options.spring_stiffness;
        f.target = cmd.target;
        sim->set_master_force(f);
        return false;
      }
      case CommandKind::Pause:
        paused = true;
        return false;
      case CommandKind::Resume:
        if (paused) {
          paused = false;
          reanchor();
        }
        return false;
      case CommandKind::SetDelay: {
        Scenario candidate = sim->scenario();
        candidate.forward.d = cmd.d_m;
        candidate.backward.d = cmd.d_s;
        candidate.validate();
        sim->set_delays(cmd.d_m, cmd.d_s);
        recheck_certificate();
        return false;
      }
      case CommandKind::SetGain: {
        Scenario candidate = sim->scenario();
        apply_gain(candidate, cmd.path, cmd.value);
        candidate.validate();
        sim->set_gain(cmd.path, cmd.value);
        recheck_certificate();
        return false;
      }
      case CommandKind::ResetScenario:
        sim = make_simulation();
        reanchor();
        recheck_certificate();
        return true;
    }
    return false;
  }

  std::unique_ptr<Simulation> make_simulation() const {
    auto s = std::make_unique<Simulation>(scenario, SimulationOptions{false});
    s->set_unbounded();
    return s;
  }

  void drain() {
    std::deque<Pending> batch;
    {
      std::lock_guard lock(shared.inbox_mutex);
      batch.swap(shared.inbox);
    }
    for (auto& p : batch) {
      const std::string kind = to_string(p.command.kind);
      try {
        if (apply(p.command)) publish();
        reply(p.origin, encode_ack(p.command.kind));
      } catch (const std::exception& e) {
        reply(p.origin, encode_error(kind, e.what()));
      }
    }
  }

  void advance() {
    if (paused) return;
    const double elapsed = std::chrono::duration<double>(Clock::now() - wall_anchor).count();
    const double target = sim_anchor + options.speed * elapsed;
    const double dt = sim->scenario().dt;
    // At most four publish periods of work per tick.
    const long long budget = std::max<long long>(1, std::llround(4.0 * options.speed / (options.publish_hz * dt)));
    long long steps = 0;
    try {
      while (sim->time() + 0.5 * dt < target && steps < budget) {
        sim->step();
        ++steps;
      }
    } catch (const std::exception& e) {
      paused = true;
      broadcast(encode_error("", std::string("simulation halted: ") + e.what()), false);
      return;
    }
    if (steps == budget) reanchor();
  }

  void sim_loop() {
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / options.publish_hz));
    auto next = Clock::now();
    reanchor();
    while (running) {
      drain();
      poll_certificate();
      advance();
      publish();
      next += period;
      const auto now = Clock::now();
      if (next < now) next = now;
      std::unique_lock lock(stop_mutex);
      stop_cv.wait_until(lock, next, [this] { return !running; });
    }
    if (certificate_job.valid()) certificate_job.wait();
  }
};

Gateway::Gateway(Scenario scenario, GatewayOptions options) : impl_(std::make_unique<Impl>()) {
  scenario.validate();
  options.validate();
  impl_->scenario = std::move(scenario);
  impl_->options = std::move(options);
  impl_->shared.client_queue = impl_->options.client_queue;
  impl_->shared.inbox_capacity = impl_->options.inbox_capacity;
  impl_->shared.health = nlohmann::json{{"version", kServiceVersion}, {"scheme", to_string(impl_->scenario.scheme)}}.dump();
  impl_->shared.hello = encode_hello(impl_->scenario.scheme, impl_->scenario.slaves);
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  auto& im = *impl_;
  if (im.running) return;
  beast::error_code ec;
  const auto address = net::ip::make_address(im.options.address, ec);
  if (ec) throw std::runtime_error("bind failed: bad address '" + im.options.address + "'");
  const tcp::endpoint endpoint(address, im.options.port);
  im.acceptor.open(endpoint.protocol(), ec);
  if (!ec) im.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) im.acceptor.bind(endpoint, ec);
  if (!ec) im.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    beast::error_code ignored;
    im.acceptor.close(ignored);
    throw std::runtime_error("bind failed: " + ec.message());
  }

  im.bound_port = im.acceptor.local_endpoint().port();
  im.sim = im.make_simulation();
  im.recheck_certificate();
  im.running = true;
  im.accept();
  im.io_thread = std::thread([&im] { im.shared.ioc.run(); });
  im.sim_thread = std::thread([&im] { im.sim_loop(); });
}

void Gateway::stop() {
  auto& im = *impl_;
  {
    std::lock_guard lock(im.stop_mutex);
    if (!im.running.exchange(false)) return;
  }
  im.stop_cv.notify_all();
  if (im.sim_thread.joinable()) im.sim_thread.join();
  im.shared.ioc.stop();
  if (im.io_thread.joinable()) im.io_thread.join();
  beast::error_code ignored;
  im.acceptor.close(ignored);
}

unsigned short Gateway::port() const { return impl_->bound_port; }

std::size_t Gateway::dropped_snapshots() const { return impl_->shared.dropped.load(); }

}  // namespace todsim

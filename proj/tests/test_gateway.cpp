#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <stdexcept>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "todsim/gateway.hpp"

using namespace todsim;
using nlohmann::json;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

Scenario fixture(const char* name) {
  return load_scenario(std::filesystem::path(TODSIM_SCENARIO_DIR) / (std::string(name) + ".json"));
}

GatewayOptions any_port() {
  GatewayOptions o;
  o.port = 0;
  return o;
}

tcp::endpoint local(unsigned short port) { return {net::ip::make_address("127.0.0.1"), port}; }

std::pair<unsigned, std::string> http_get(unsigned short port, const std::string& target) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(local(port));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  return {res.result_int(), res.body()};
}

class Client {
 public:
  explicit Client(unsigned short port) {
    ws_.next_layer().connect(local(port));
    ws_.handshake("127.0.0.1", "/ws");
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }
  void send(const json& frame) { send(frame.dump()); }

  json read(double timeout_s = 10.0) {
    beast::flat_buffer buf;
    beast::error_code ec;
    bool done = false;
    ws_.async_read(buf, [&](beast::error_code e, std::size_t) {
      ec = e;
      done = true;
    });
    ioc_.restart();
    ioc_.run_for(std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::duration<double>(timeout_s)));
    if (!done) {
      ws_.next_layer().cancel();
      ioc_.restart();
      ioc_.run();
      throw std::runtime_error("timed out waiting for a frame");
    }
    if (ec) throw std::runtime_error("read failed: " + ec.message());
    return json::parse(beast::buffers_to_string(buf.data()));
  }

  /// Reads frames until pred holds, passing every frame to visit first.
  json read_until(const std::function<bool(const json&)>& pred, double timeout_s = 10.0,
                  const std::function<void(const json&)>& visit = {}) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    while (std::chrono::steady_clock::now() < deadline) {
      const json f = read(timeout_s);
      if (visit) visit(f);
      if (pred(f)) return f;
    }
    throw std::runtime_error("condition not met before deadline");
  }

  json next_of_type(const std::string& type, double timeout_s = 10.0) {
    return read_until([&](const json& f) { return f.at("type") == type; }, timeout_s);
  }

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_{ioc_};
};

json command(const std::string& type) { return json{{"v", kWireVersion}, {"type", type}}; }

class GatewayTest : public ::testing::Test {
 protected:
  void SetUp() override { start(fixture("fixture2_a")); }
  void TearDown() override {
    if (gw) gw->stop();
  }
  void start(Scenario sc) {
    gw = std::make_unique<Gateway>(std::move(sc), any_port());
    gw->start();
    ASSERT_NE(gw->port(), 0);
  }
  std::unique_ptr<Gateway> gw;
};

}  // namespace

TEST_F(GatewayTest, HealthEndpoint) {
  const auto [status, body] = http_get(gw->port(), "/healthz");
  EXPECT_EQ(status, 200u);
  const json o = json::parse(body);
  EXPECT_EQ(o.at("version"), kServiceVersion);
  EXPECT_EQ(o.at("scheme"), "A");
}

TEST_F(GatewayTest, UnknownPathIsNotFound) {
  EXPECT_EQ(http_get(gw->port(), "/metrics").first, 404u);
}

TEST_F(GatewayTest, HelloThenSnapshotsWithIncreasingTime) {
  Client c(gw->port());
  const json hello = c.read();
  EXPECT_EQ(hello.at("type"), "hello");
  EXPECT_EQ(hello.at("slaves"), 3);
  EXPECT_EQ(hello.at("version"), kServiceVersion);
  double last = -1.0;
  for (int k = 0; k < 15; ++k) {
    const json s = c.next_of_type("snapshot");
    EXPECT_EQ(s.at("q").size(), 4u);
    EXPECT_EQ(s.at("eta_norms").size(), 3u);
    EXPECT_FALSE(s.at("paused").get<bool>());
    const double t = s.at("t");
    EXPECT_GE(t, last);
    last = t;
  }
  EXPECT_GT(last, 0.0);
}

TEST_F(GatewayTest, EveryClientReceivesSnapshots) {
  Client a(gw->port());
  Client b(gw->port());
  EXPECT_EQ(a.next_of_type("snapshot").at("scheme"), "A");
  EXPECT_EQ(b.next_of_type("snapshot").at("scheme"), "A");
}

TEST_F(GatewayTest, GainBelowTriggerGainIsRejected) {
  Client c(gw->port());
  json cmd = command("set_gain");
  cmd["path"] = "master.kappa";
  cmd["value"] = 10.0;
  c.send(cmd);
  const json err = c.next_of_type("error");
  EXPECT_EQ(err.at("command"), "set_gain");
  EXPECT_NE(err.at("reason").get<std::string>().find("kappa must exceed gamma"), std::string::npos);
  cmd["value"] = 25.0;
  c.send(cmd);
  EXPECT_EQ(c.next_of_type("ack").at("command"), "set_gain");
}

TEST_F(GatewayTest, MalformedFrameKeepsSessionOpen) {
  Client c(gw->port());
  c.send(std::string("{oops"));
  EXPECT_EQ(c.next_of_type("error").at("command"), "");
  c.send(std::string(R"({"v":7,"type":"pause"})"));
  EXPECT_EQ(c.next_of_type("error").at("reason"), "unsupported wire version");
  c.send(command("pause"));
  EXPECT_EQ(c.next_of_type("ack").at("command"), "pause");
}

TEST_F(GatewayTest, PauseFreezesAndResumeContinuesTime) {
  Client c(gw->port());
  c.next_of_type("snapshot");
  c.send(command("pause"));
  c.next_of_type("ack");
  const json first = c.read_until([](const json& f) { return f.at("type") == "snapshot" && f.at("paused") == true; });
  const double frozen = first.at("t");
  for (int k = 0; k < 10; ++k) EXPECT_EQ(c.next_of_type("snapshot").at("t").get<double>(), frozen);

  c.send(command("resume"));
  c.next_of_type("ack");
  const json moving = c.read_until([&](const json& f) { return f.at("type") == "snapshot" && f.at("t").get<double>() > frozen; });
  EXPECT_FALSE(moving.at("paused").get<bool>());
  // Paused wall time is not replayed on resume.
  EXPECT_LT(moving.at("t").get<double>() - frozen, 0.5);
}

TEST_F(GatewayTest, ResetRestartsFromTimeZero) {
  Client c(gw->port());
  c.read_until([](const json& f) { return f.at("type") == "snapshot" && f.at("t").get<double>() > 0.1; });
  c.send(command("reset_scenario"));
  bool restarted = false;
  c.read_until([](const json& f) { return f.at("type") == "ack"; }, 10.0, [&](const json& f) {
    if (f.at("type") == "snapshot" && f.at("t").get<double>() == 0.0) restarted = true;
  });
  EXPECT_TRUE(restarted);
}

TEST_F(GatewayTest, TargetAndDelayCommandsAreAcknowledged) {
  Client c(gw->port());
  json target = command("set_target");
  target["x"] = 0.5;
  target["y"] = 1.2;
  c.send(target);
  EXPECT_EQ(c.next_of_type("ack").at("command"), "set_target");
  json delay = command("set_delay");
  delay["d_m"] = 0.06;
  delay["d_s"] = 0.04;
  c.send(delay);
  EXPECT_EQ(c.next_of_type("ack").at("command"), "set_delay");
  delay["d_m"] = 5.0;
  c.send(delay);
  EXPECT_EQ(c.next_of_type("error").at("command"), "set_delay");
}

TEST_F(GatewayTest, CertificateFlagFollowsLiveChanges) {
  gw->stop();
  start(fixture("fixture2_b"));
  Client c(gw->port());
  auto flag_is = [](bool v) {
    return [v](const json& f) { return f.at("type") == "snapshot" && f.at("certificate_violated") == v; };
  };
  c.read_until(flag_is(false), 60.0);
  json gain = command("set_gain");
  gain["path"] = "master.c";
  gain["value"] = 10.0;
  c.send(gain);
  EXPECT_NO_THROW(c.read_until(flag_is(true), 60.0));
  gain["value"] = fixture("fixture2_b").master.gains.c;
  c.send(gain);
  EXPECT_NO_THROW(c.read_until(flag_is(false), 60.0));
}

TEST_F(GatewayTest, SecondBindOnSamePortFails) {
  GatewayOptions o;
  o.port = gw->port();
  Gateway other(fixture("fixture2_a"), o);
  EXPECT_THROW(other.start(), std::runtime_error);
  other.stop();
}

TEST_F(GatewayTest, StopIsIdempotent) {
  gw->stop();
  gw->stop();
  EXPECT_THROW(http_get(gw->port(), "/healthz"), boost::system::system_error);
}

TEST(GatewayOptions, ParseBind) {
  GatewayOptions o;
  parse_bind("0.0.0.0:9001", o);
  EXPECT_EQ(o.address, "0.0.0.0");
  EXPECT_EQ(o.port, 9001);
  parse_bind(":9002", o);
  EXPECT_EQ(o.port, 9002);
  parse_bind("9003", o);
  EXPECT_EQ(o.port, 9003);
  EXPECT_THROW(parse_bind("host:notaport", o), std::exception);
  GatewayOptions bad;
  bad.publish_hz = 0.0;
  EXPECT_THROW(bad.validate(), ScenarioError);
}

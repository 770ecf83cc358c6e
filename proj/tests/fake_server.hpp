#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <httplib.h>
#include <json.hpp>
#include <string>
#include <thread>

namespace testutil {

// Serves the aligner contract on localhost. The handler maps request JSON to
// a response body and status.
class FakeAligner {
 public:
  using Handler = std::function<std::pair<int, std::string>(const nlohmann::json&)>;

  explicit FakeAligner(Handler h) : handler_(std::move(h)) {
    server_.Post("/align", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      auto [status, body] = handler_(nlohmann::json::parse(req.body));
      res.status = status;
      res.set_content(body, "application/json");
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeAligner() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/align"; }
  int peak() const { return peak_.load(); }
  void set_delay(int ms) { delay_ms_ = ms; }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int delay_ms_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

}  // namespace testutil

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "xnf/alignment.hpp"
#include "xnf/error.hpp"

namespace xnf {

using nlohmann::json;

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorKind::Config, "endpoint must be an http URL: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::string encode_align_request(const AlignmentQuery& query) {
  json body = {{"entity", query.entity_surface}, {"tokens", query.target_tokens}};
  return body.dump();
}

AlignmentResult decode_align_response(std::string_view body, std::size_t n_tokens) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolError, std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("mask") || !doc["mask"].is_array()) {
    throw Error(ErrorKind::ProtocolError, "response lacks a mask array");
  }
  const auto& jm = doc["mask"];
  if (jm.size() != n_tokens) {
    throw Error(ErrorKind::ProtocolError, "mask has " + std::to_string(jm.size()) + " entries for " +
                                              std::to_string(n_tokens) + " tokens");
  }
  std::vector<int> mask;
  for (const auto& v : jm) {
    if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1)) {
      throw Error(ErrorKind::ProtocolError, "mask entries must be 0 or 1");
    }
    mask.push_back(v.get<int>());
  }
  std::vector<double> scores;
  bool has_scores = doc.contains("scores") && !doc["scores"].is_null();
  if (has_scores) {
    const auto& js = doc["scores"];
    if (!js.is_array() || js.size() != n_tokens) throw Error(ErrorKind::ProtocolError, "scores length mismatch");
    for (const auto& v : js) {
      if (!v.is_number()) throw Error(ErrorKind::ProtocolError, "scores must be numbers");
      double s = v.get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::ProtocolError, "scores must lie in [0,1]");
      scores.push_back(s);
    }
  }
  return AlignmentResult{mask_to_spans(mask, has_scores ? &scores : nullptr)};
}

AlignmentResult align_remote(const AlignmentQuery& query, const std::string& endpoint,
                             std::chrono::milliseconds timeout) {
  query.validate();
  const Url url = split_url(endpoint);
  httplib::Client client(url.origin);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(url.path, encode_align_request(query), "application/json");
  if (!res) throw Error(ErrorKind::Transport, endpoint + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorKind::Transport, endpoint + ": HTTP " + std::to_string(res->status));
  return decode_align_response(res->body, query.target_tokens.size());
}

RemoteAligner::RemoteAligner(std::string endpoint, std::chrono::milliseconds timeout, std::size_t max_in_flight)
    : endpoint_(std::move(endpoint)), timeout_(timeout), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
  split_url(endpoint_);
}

AlignmentResult RemoteAligner::align(const AlignmentQuery& query) const {
  return align_remote(query, endpoint_, timeout_);
}

std::vector<AlignmentResult> RemoteAligner::align_batch(const std::vector<AlignmentQuery>& queries) const {
  std::vector<AlignmentResult> results(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(max_in_flight_, queries.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < queries.size(); i = next++) {
        try {
          results[i] = align(queries[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace xnf

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "instcap/chat.hpp"
#include "instcap/error.hpp"
#include "instcap/model_adapter.hpp"
#include "instcap/tensor.hpp"

namespace instcap {

/// Serves the adapter wire contract from an in-process ModelAdapter and
/// ChatBackend. Adapter and backend calls are serialised.
class AdapterServer {
 public:
  AdapterServer(ModelAdapter& adapter, ChatBackend* chat = nullptr, std::string token = {})
      : adapter_(adapter), chat_(chat), token_(std::move(token)) {
    routes();
  }

  ~AdapterServer() { stop(); }

  AdapterServer(const AdapterServer&) = delete;
  AdapterServer& operator=(const AdapterServer&) = delete;

  /// Binds to `host:port` (port 0 picks a free one) and serves on a
  /// background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorKind::ConfigError, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void serve(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) throw Error(ErrorKind::ConfigError, "cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  bool running() const { return server_.is_running(); }
  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  using json = nlohmann::json;

  static void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", {{"kind", kind}, {"message", msg}}}}.dump(), "application/json");
  }

  bool authorised(const httplib::Request& req, httplib::Response& res) const {
    if (token_.empty() || req.get_header_value("Authorization") == "Bearer " + token_) return true;
    send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
    return false;
  }

  /// Wraps a JSON handler: parses the body, echoes request_id, maps errors.
  void post(const std::string& path, std::function<json(const json&)> handler) {
    server_.Post(path, [this, handler, path](const httplib::Request& req, httplib::Response& res) {
      if (!authorised(req, res)) return;
      json body;
      try {
        body = json::parse(req.body);
        if (!body.is_object()) throw Error(ErrorKind::AdapterError, "body must be a JSON object");
      } catch (const json::parse_error& e) {
        return send_error(res, 400, "BadRequest", std::string("body is not JSON: ") + e.what());
      } catch (const Error& e) {
        return send_error(res, 400, "BadRequest", e.detail());
      }
      try {
        json reply;
        {
          std::lock_guard lock(mu_);
          reply = handler(body);
        }
        if (reply.is_object() && reply.contains("__binary__")) {
          res.set_content(reply["__binary__"].get<std::string>(), "application/octet-stream");
          if (body.contains("request_id")) res.set_header("X-Request-Id", body["request_id"].get<std::string>());
          return;
        }
        if (body.contains("request_id")) reply["request_id"] = body["request_id"];
        res.set_content(reply.dump(), "application/json");
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::BackendError) return send_error(res, 502, "UpstreamError", e.detail());
        return send_error(res, 400, "BadRequest", e.detail());
      } catch (const json::exception& e) {
        return send_error(res, 400, "BadRequest", e.what());
      } catch (const std::exception& e) {
        return send_error(res, 503, "Unavailable", e.what());
      }
    });
  }

  static void require_boxes_on(const std::vector<Box>& seeds, const FrameSequence& frames) {
    for (const auto& b : seeds)
      if (!b.valid_in(frames.width(), frames.height())) throw Error(ErrorKind::AdapterError, "seed box outside the first frame");
  }

  void routes() {
    server_.Get("/health", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorised(req, res)) return;
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    server_.Get("/info", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorised(req, res)) return;
      std::lock_guard lock(mu_);
      res.set_content(wire::encode_info(adapter_.info()).dump(), "application/json");
    });
    post("/detect", [this](const json& b) {
      json dets = json::array();
      for (const auto& d : adapter_.detect(wire::decode_image(b.at("image")))) dets.push_back(wire::encode_detection(d));
      return json{{"detections", dets}};
    });
    post("/segment", [this](const json& b) {
      auto frames = wire::decode_frames(b.at("frames"));
      if (frames.empty()) throw Error(ErrorKind::AdapterError, "segment needs at least one frame");
      std::vector<Box> seeds;
      for (const auto& s : b.at("seeds")) seeds.push_back(wire::decode_box(s));
      require_boxes_on(seeds, frames);
      json tracks = json::array();
      if (!seeds.empty())
        for (const auto& t : adapter_.segment(frames, seeds)) tracks.push_back(wire::encode_track(t));
      return json{{"tracks", tracks}};
    });
    post("/embed_text", [this](const json& b) {
      const auto s = b.at("text").get<std::string>();
      if (s.empty()) throw Error(ErrorKind::AdapterError, "text must be non-empty");
      return json{{"embedding", wire::encode_vector(adapter_.embed_text(s))}};
    });
    post("/embed_image", [this](const json& b) {
      return json{{"embedding", wire::encode_vector(adapter_.embed_image(wire::decode_image(b.at("image"))))}};
    });
    post("/vae_latent", [this](const json& b) {
      auto frames = wire::decode_frames(b.at("frames"));
      if (frames.empty()) throw Error(ErrorKind::AdapterError, "vae_latent needs at least one frame");
      return json{{"__binary__", tensor_file::encode(adapter_.vae_latent(frames))}};
    });
    post("/flow", [this](const json& b) {
      const int grid = b.value("grid", 16);
      if (grid <= 0) throw Error(ErrorKind::AdapterError, "grid must be positive");
      return wire::encode_flow(adapter_.flow(wire::decode_image(b.at("a")), wire::decode_image(b.at("b")), grid));
    });
    post("/chat", [this](const json& b) {
      if (!chat_) throw Error(ErrorKind::BackendError, "no chat backend configured");
      PromptBundle bundle;
      try {
        bundle = bundle_from_request(b);
        bundle.validate();
      } catch (const Error& e) {
        throw Error(ErrorKind::AdapterError, e.detail());
      }
      BackendConfig cfg;
      cfg.model = b.value("model", std::string("default"));
      cfg.temperature = b.value("temperature", 0.0);
      if (cfg.temperature < 0) throw Error(ErrorKind::AdapterError, "temperature must be >= 0");
      cfg.seed = b.contains("seed") && b["seed"].is_number_integer() ? std::optional<int64_t>(b["seed"].get<int64_t>()) : std::nullopt;
      cfg.max_tokens = b.value("max_tokens", 1024);
      return json{{"text", chat_->complete(bundle, cfg)}};
    });
  }

  ModelAdapter& adapter_;
  ChatBackend* chat_;
  std::string token_;
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;
  int port_ = -1;
};

}  // namespace instcap

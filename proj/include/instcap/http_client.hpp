// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "instcap/chat.hpp"
#include "instcap/error.hpp"
#include "instcap/model_adapter.hpp"
#include "instcap/tensor.hpp"

namespace instcap {

struct HttpOptions {
  std::string token;         ///< sent as "Authorization: Bearer <token>" when set
  int connect_timeout_s = 5;
  int read_timeout_s = 300;
};

namespace detail {

inline std::string error_message(const httplib::Result& res) {
  if (!res) return "transport failure: " + httplib::to_string(res.error());
  std::string msg = "HTTP " + std::to_string(res->status);
  try {
    auto j = nlohmann::json::parse(res->body);
    if (j.contains("error")) msg += ": " + j["error"].value("message", j["error"].dump());
  } catch (const nlohmann::json::exception&) {
    if (!res->body.empty()) msg += ": " + res->body.substr(0, 200);
  }
  return msg;
}

inline httplib::Headers auth_headers(const HttpOptions& opt) {
  httplib::Headers h;
  if (!opt.token.empty()) h.emplace("Authorization", "Bearer " + opt.token);
  return h;
}

}  // namespace detail

/// Model adapter reached over the HTTP wire contract.
class HttpModelAdapter : public ModelAdapter {
 public:
  explicit HttpModelAdapter(std::string base_url, HttpOptions opt = {}) : url_(std::move(base_url)), opt_(std::move(opt)) {}

  AdapterInfo info() override { return wire::decode_info(get("/info")); }

  std::vector<Detection> detect(const Image& frame) override {
    auto j = post("/detect", {{"image", wire::encode_image(frame)}});
    std::vector<Detection> out;
    for (const auto& d : at(j, "detections")) out.push_back(wire::decode_detection(d));
    return out;
  }

  std::vector<MaskTrack> segment(const FrameSequence& frames, const std::vector<Box>& seeds) override {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : seeds) boxes.push_back(wire::encode_box(b));
    auto j = post("/segment", {{"frames", wire::encode_frames(frames)}, {"seeds", boxes}});
    std::vector<MaskTrack> out;
    for (const auto& t : at(j, "tracks")) out.push_back(wire::decode_track(t));
    return out;
  }

  std::vector<float> embed_text(const std::string& s) override {
    return wire::decode_vector(at(post("/embed_text", {{"text", s}}), "embedding"));
  }

  std::vector<float> embed_image(const Image& image) override {
    return wire::decode_vector(at(post("/embed_image", {{"image", wire::encode_image(image)}}), "embedding"));
  }

  LatentTensor vae_latent(const FrameSequence& frames) override {
    auto res = client().Post("/vae_latent", detail::auth_headers(opt_),
                             nlohmann::json{{"request_id", next_id()}, {"frames", wire::encode_frames(frames)}}.dump(),
                             "application/json");
    if (!res || res->status != 200) throw Error(ErrorKind::AdapterError, "/vae_latent: " + detail::error_message(res));
    try {
      return tensor_file::decode(res->body);
    } catch (const Error& e) {
      throw Error(ErrorKind::AdapterError, "/vae_latent: " + e.detail());
    }
  }

  FlowField flow(const Image& a, const Image& b, int grid) override {
    return wire::decode_flow(post("/flow", {{"a", wire::encode_image(a)}, {"b", wire::encode_image(b)}, {"grid", grid}}));
  }

  bool healthy() {
    auto res = client().Get("/health", detail::auth_headers(opt_));
    return res && res->status == 200;
  }

 private:
  httplib::Client client() const {
    httplib::Client c(url_);
    c.set_connection_timeout(opt_.connect_timeout_s, 0);
    c.set_read_timeout(opt_.read_timeout_s, 0);
    return c;
  }

  std::string next_id() { return "req-" + std::to_string(++counter_); }

  static const nlohmann::json& at(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorKind::AdapterError, std::string("reply lacks \"") + key + "\"");
    return j.at(key);
  }

  nlohmann::json parse_reply(const std::string& path, const httplib::Result& res, const std::string& request_id) {
    if (!res || res->status != 200) throw Error(ErrorKind::AdapterError, path + ": " + detail::error_message(res));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::AdapterError, path + ": reply is not JSON: " + e.what());
    }
    if (!request_id.empty() && j.value("request_id", std::string{}) != request_id)
      throw Error(ErrorKind::AdapterError, path + ": reply does not echo the request id");
    return j;
  }

  nlohmann::json get(const std::string& path) {
    auto res = client().Get(path, detail::auth_headers(opt_));
    return parse_reply(path, res, "");
  }

  nlohmann::json post(const std::string& path, nlohmann::json body) {
    const auto id = next_id();
    body["request_id"] = id;
    auto res = client().Post(path, detail::auth_headers(opt_), body.dump(), "application/json");
    return parse_reply(path, res, id);
  }

  std::string url_;
  HttpOptions opt_;
  std::atomic<uint64_t> counter_{0};
};

/// Chat backend reached over the `/chat` wire contract. Image references
/// are sent as absolute paths when the bundle has an image root.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(std::string base_url, HttpOptions opt = {}) : url_(std::move(base_url)), opt_(std::move(opt)) {}

  std::string complete(const PromptBundle& bundle, const BackendConfig& cfg) override {
    bundle.validate();
    httplib::Client c(url_);
    c.set_connection_timeout(opt_.connect_timeout_s, 0);
    c.set_read_timeout(opt_.read_timeout_s, 0);
    auto res = c.Post("/chat", detail::auth_headers(opt_), chat_request_json(bundle, cfg, true).dump(), "application/json");
    if (!res || res->status != 200) throw Error(ErrorKind::BackendError, "/chat: " + detail::error_message(res));
    try {
      return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::BackendError, std::string("/chat: malformed reply: ") + e.what());
    }
  }

 private:
  std::string url_;
  HttpOptions opt_;
};

}  // namespace instcap

#include "traylab/llm_client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"
#include "traylab/errors.hpp"

namespace traylab {

using nlohmann::json;

std::string to_string(ClientMode mode) {
  switch (mode) {
    case ClientMode::live: return "live";
    case ClientMode::record: return "record";
    case ClientMode::replay: return "replay";
  }
  return "replay";
}

std::optional<ClientMode> parse_client_mode(std::string_view text) {
  if (text == "live") return ClientMode::live;
  if (text == "record") return ClientMode::record;
  if (text == "replay") return ClientMode::replay;
  return std::nullopt;
}

Message Message::text(std::string role, std::string text) {
  Message m;
  m.role = std::move(role);
  m.parts.push_back({std::move(text), std::nullopt});
  return m;
}

std::string Message::joined_text() const {
  std::string out;
  for (const auto& p : parts) {
    if (!p.image) out += p.text;
  }
  return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

ImagePart png_part(const std::vector<std::uint8_t>& png_bytes) { return {"image/png", base64_encode(png_bytes)}; }

namespace {

json messages_json(const std::vector<Message>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      if (p.image) {
        parts.push_back({{"type", "image"}, {"media_type", p.image->media_type}, {"data", p.image->base64}});
      } else {
        parts.push_back({{"type", "text"}, {"text", p.text}});
      }
    }
    out.push_back({{"role", m.role}, {"content", std::move(parts)}});
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string canonical_json(const std::vector<Message>& messages) { return messages_json(messages).dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

std::string request_hash(const std::vector<Message>& messages) { return sha256_hex(canonical_json(messages)); }

std::string chat_request_body(const ClientConfig& config, const std::vector<Message>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.image) {
        content.push_back({{"type", "image_url"},
                           {"image_url", {{"url", "data:" + p.image->media_type + ";base64," + p.image->base64}}}});
      } else {
        content.push_back({{"type", "text"}, {"text", p.text}});
      }
    }
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json body = {{"model", config.model}, {"messages", std::move(msgs)}};
  if (config.temperature) body["temperature"] = *config.temperature;
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("response body is not JSON", 200);
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string out;
      for (const auto& part : content) {
        if (part.value("type", "") == "text") out += part.at("text").get<std::string>();
      }
      return out;
    }
  } catch (const json::exception&) {
  }
  throw TransportError("response has no choices[0].message.content", 200);
}

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::map<std::string, std::string>& headers, double timeout_s) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("endpoint URL lacks a scheme: " + url, 0);
  const auto path_begin = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_begin);
  const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  const auto res = client.Post(path, h, body, "application/json");
  if (!res) throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()), 0);
  return {res->status, res->body};
}

HttpResponse ForbiddenTransport::post(const std::string& url, const std::string&, const std::map<std::string, std::string>&,
                                      double) {
  ++attempts_;
  throw TransportError("network access is disabled (attempted POST to " + url + ")", 0);
}

LlmClient::LlmClient(ClientConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      clock_(utc_timestamp),
      in_flight_(std::clamp(config_.max_in_flight, 1, 64)),
      jitter_(config_.jitter_seed) {
  if (config_.max_retries < 0) throw StructuralError("max_retries must be nonnegative");
  if (!transport_) {
    if (config_.mode == ClientMode::replay) {
      transport_ = std::make_shared<ForbiddenTransport>();
    } else {
      transport_ = std::make_shared<HttplibTransport>();
    }
  }
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
  if (config_.mode == ClientMode::replay) {
    if (config_.transcript.empty()) throw StructuralError("replay mode needs a transcript path");
    replay_ = Transcript::load(config_.transcript);
  }
  if (config_.mode == ClientMode::record && config_.transcript.empty()) {
    throw StructuralError("record mode needs a transcript path");
  }
}

int LlmClient::network_calls() const {
  std::lock_guard lock(mutex_);
  return network_calls_;
}

std::string LlmClient::complete(const std::vector<Message>& messages) {
  const std::string canonical = canonical_json(messages);
  const std::string hash = sha256_hex(canonical);

  if (config_.mode == ClientMode::replay) {
    std::lock_guard lock(mutex_);
    std::size_t& k = served_[hash];
    const TranscriptRecord* rec = replay_.find(hash, k);
    if (!rec) throw ReplayMissError(hash);
    ++k;
    return rec->response;
  }

  in_flight_.acquire();
  std::string text;
  try {
    text = complete_live(messages);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();

  if (config_.mode == ClientMode::record) {
    std::lock_guard lock(mutex_);
    Transcript::append_to(config_.transcript, {hash, canonical, text, clock_()});
  }
  return text;
}

std::string LlmClient::complete_live(const std::vector<Message>& messages) {
  const std::string body = chat_request_body(config_, messages);
  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers["Authorization"] = std::string("Bearer ") + key;
  }

  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0;; ++attempt) {
    bool retryable = true;
    try {
      {
        std::lock_guard lock(mutex_);
        ++network_calls_;
      }
      const HttpResponse res = transport_->post(config_.endpoint, body, headers, config_.timeout_s);
      if (res.status >= 200 && res.status < 300) return parse_chat_response(res.body);
      last_status = res.status;
      last_failure = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 500);
      retryable = res.status == 429 || res.status >= 500;
      if (res.status == 401 && headers.empty()) {
        last_failure += " (environment variable " + config_.api_key_env + " is not set)";
      }
    } catch (const TransportError& e) {
      if (e.status() != 0) throw;
      last_status = 0;
      last_failure = e.what();
    }
    if (!retryable) throw TransportError(last_failure, last_status);
    if (attempt >= config_.max_retries) {
      throw TransportError("giving up after " + std::to_string(attempt + 1) + " attempts: " + last_failure, last_status);
    }
    double delay = config_.backoff_base_s * std::pow(config_.backoff_factor, attempt);
    {
      std::lock_guard lock(mutex_);
      delay *= 1.0 + 0.25 * jitter_.uniform();
    }
    sleeper_(delay);
  }
}

}  // namespace traylab

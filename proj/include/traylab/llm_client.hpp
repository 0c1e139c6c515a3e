#pragma once

// Chat-completions client with retry, record and replay.
//
// Requests are identified by the SHA-256 of the canonical JSON of their
// message list. In replay mode the k-th request with a given hash receives the
// k-th recorded response for that hash; nothing touches the network.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "traylab/rng.hpp"

namespace traylab {

enum class ClientMode { live, record, replay };

std::string to_string(ClientMode mode);
std::optional<ClientMode> parse_client_mode(std::string_view text);

struct ClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "o1-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<double> temperature = 0.0;
  double timeout_s = 120.0;
  int max_retries = 5;
  double backoff_base_s = 2.0;
  double backoff_factor = 2.0;
  int max_in_flight = 2;
  ClientMode mode = ClientMode::replay;
  std::filesystem::path transcript;
  std::uint64_t jitter_seed = 0;
};

struct ImagePart {
  std::string media_type;  // e.g. "image/png"
  std::string base64;
  bool operator==(const ImagePart&) const = default;
};

struct ContentPart {
  std::string text;
  std::optional<ImagePart> image;  // set for image parts; text is then empty
  bool operator==(const ContentPart&) const = default;
};

struct Message {
  std::string role;
  std::vector<ContentPart> parts;
  bool operator==(const Message&) const = default;

  static Message text(std::string role, std::string text);
  /// Concatenation of all text parts.
  std::string joined_text() const;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
ImagePart png_part(const std::vector<std::uint8_t>& png_bytes);

/// Compact JSON with sorted keys; images carry media type and payload.
std::string canonical_json(const std::vector<Message>& messages);
std::string sha256_hex(const std::string& data);
std::string request_hash(const std::vector<Message>& messages);

/// OpenAI-compatible request body (content arrays, images as data URIs).
std::string chat_request_body(const ClientConfig& config, const std::vector<Message>& messages);
/// Text of the first choice; throws TransportError on a malformed body.
std::string parse_chat_response(const std::string& body);

struct HttpResponse {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError (status 0) when no response was received.
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers, double timeout_s) = 0;
};

/// HTTPS/HTTP via cpp-httplib.
class HttplibTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                    double timeout_s) override;
};

/// Fails every call; used wherever network access must not happen.
class ForbiddenTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                    double timeout_s) override;
  int attempts() const { return attempts_; }

 private:
  int attempts_ = 0;
};

using Sleeper = std::function<void(double seconds)>;

struct TranscriptRecord {
  std::string hash;
  std::string request;  // canonical JSON of the messages
  std::string response;
  std::string timestamp;
  bool operator==(const TranscriptRecord&) const = default;
};

/// Line-delimited JSON records. Loading skips (with a warning) a truncated
/// final line; any other malformed line is an IoError naming the line.
class Transcript {
 public:
  static Transcript load(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
  void save(const std::filesystem::path& path) const;
  static void append_to(const std::filesystem::path& path, const TranscriptRecord& record);

  static std::string to_line(const TranscriptRecord& record);

  void add(TranscriptRecord record) { records_.push_back(std::move(record)); }
  const std::vector<TranscriptRecord>& records() const { return records_; }
  /// The `occurrence`-th (0-based) record with this hash.
  const TranscriptRecord* find(const std::string& hash, std::size_t occurrence) const;
  bool operator==(const Transcript&) const = default;

 private:
  std::vector<TranscriptRecord> records_;
};

class LlmClient {
 public:
  /// Without a transport, live and record modes use HttplibTransport and
  /// replay uses ForbiddenTransport. Replay loads the transcript immediately.
  explicit LlmClient(ClientConfig config, std::shared_ptr<Transport> transport = nullptr, Sleeper sleeper = nullptr);

  /// Thread-safe; at most max_in_flight requests run at once.
  std::string complete(const std::vector<Message>& messages);

  const ClientConfig& config() const { return config_; }
  int network_calls() const;
  void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }

 private:
  std::string complete_live(const std::vector<Message>& messages);

  ClientConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::function<std::string()> clock_;
  std::counting_semaphore<64> in_flight_;

  mutable std::mutex mutex_;  // guards everything below
  Transcript replay_;
  std::map<std::string, std::size_t> served_;
  Rng jitter_;
  int network_calls_ = 0;
};

}  // namespace traylab

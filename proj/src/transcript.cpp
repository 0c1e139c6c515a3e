#include <fstream>
#include <sstream>

#include "json.hpp"
#include "traylab/errors.hpp"
#include "traylab/llm_client.hpp"

namespace traylab {

using nlohmann::json;

namespace {

TranscriptRecord record_from_json(const json& j) {
  TranscriptRecord r;
  r.hash = j.at("hash").get<std::string>();
  r.request = j.at("request").get<std::string>();
  r.response = j.at("response").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

}  // namespace

std::string Transcript::to_line(const TranscriptRecord& record) {
  const json j = {{"hash", record.hash},
                  {"request", record.request},
                  {"response", record.response},
                  {"timestamp", record.timestamp}};
  return j.dump() + "\n";
}

Transcript Transcript::load(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open transcript");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  Transcript out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : text.size();
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::string problem;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      problem = "not valid JSON";
    } else {
      try {
        out.records_.push_back(record_from_json(j));
        continue;
      } catch (const json::exception& e) {
        problem = std::string("missing or mistyped field (") + e.what() + ")";
      }
    }
    if (!terminated) {
      if (warnings) warnings->push_back(path.string() + ": ignoring truncated final line " + std::to_string(line_no));
      break;
    }
    throw IoError(path.string(), "line " + std::to_string(line_no) + ": " + problem);
  }
  return out;
}

void Transcript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write transcript");
  for (const auto& r : records_) out << to_line(r);
  if (!out) throw IoError(path.string(), "write failed");
}

void Transcript::append_to(const std::filesystem::path& path, const TranscriptRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError(path.string(), "cannot append to transcript");
  out << to_line(record);
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

const TranscriptRecord* Transcript::find(const std::string& hash, std::size_t occurrence) const {
  for (const auto& r : records_) {
    if (r.hash != hash) continue;
    if (occurrence == 0) return &r;
    --occurrence;
  }
  return nullptr;
}

}  // namespace traylab

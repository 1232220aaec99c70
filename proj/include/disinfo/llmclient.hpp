#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "disinfo/error.hpp"

namespace disinfo::llm {

enum class TaskKind { narrative_analysis, fact_check, fake_detection, manipulation_analytics, entity_sentiment };

// Hyphenated names as used on the command line ("fact-check", ...).
std::string to_string(TaskKind t);
TaskKind parse_task(const std::string& s);
const std::vector<TaskKind>& all_tasks();

extern const char* const kSystemLine;

// Single-line question registered for the task.
const std::string& default_question(TaskKind t);

// "<s>[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{question}\n{input} [/INST]".
// Throws ValidationError on empty input or a question containing a line
// break.
std::string build_prompt(TaskKind task, const std::string& input_text,
                         const std::optional<std::string>& custom_question = std::nullopt);

struct PromptParts {
  std::string system;
  std::string question;
  std::string input;
};

// Inverse of build_prompt; throws ParseError when the layout does not match.
PromptParts parse_prompt(const std::string& prompt);

enum class Sentiment { positive, negative, neutral };
std::string to_string(Sentiment s);
std::optional<Sentiment> parse_sentiment(const std::string& s);

struct EntitySentiment {
  std::string entity;
  Sentiment sentiment;
  std::string comment;
  friend bool operator==(const EntitySentiment&, const EntitySentiment&) = default;
};

struct ParsedEntities {
  std::vector<EntitySentiment> records;
  std::vector<std::string> warnings;  // one per rejected record
};

// Finds the outermost JSON array of objects in a model response, accepting
// surrounding prose and LaTeX escapes ({[} \{ \} and leading \\ line breaks).
// Invalid records are skipped with a warning. Throws ParseError when no
// array parses or no record is valid.
ParsedEntities parse_entity_sentiments(const std::string& response);

nlohmann::json records_to_json(const std::vector<EntitySentiment>& records);

// Per registry entity (case-insensitive), the mean of +1/0/−1 over its
// records; 0 for entities without records. Throws ValidationError on an
// empty registry.
std::vector<double> sentiment_features(const std::vector<EntitySentiment>& records,
                                       const std::vector<std::string>& registry);

enum class WireStyle {
  completion,  // {"prompt", "temperature", "max_new_tokens"} -> body as text
  chat,        // {"messages": [...]} -> choices[0].message.content
};

struct LlmEndpoint {
  std::string url;  // http[s]://host[:port]/path
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::size_t max_concurrency = 4;
  double temperature = 0.1;
  int max_new_tokens = 1024;
  WireStyle style = WireStyle::completion;
  std::string model;  // sent with chat requests when nonempty
  int backoff_initial_ms = 500;
  int backoff_max_ms = 8000;

  void validate() const;
};

// Connection refused, DNS failure and similar, after all retries.
class NetworkError : public Error {
 public:
  NetworkError(const std::string& host, const std::string& detail)
      : Error("network error contacting " + host + ": " + detail), host_(host) {}
  const std::string& host() const noexcept { return host_; }

 private:
  std::string host_;
};

class TimeoutError : public Error {
 public:
  TimeoutError(const std::string& host, double seconds)
      : Error("request to " + host + " timed out after " + std::to_string(seconds) + " s"), host_(host) {}
  const std::string& host() const noexcept { return host_; }

 private:
  std::string host_;
};

// Non-success HTTP status (4xx at once, 5xx after retries).
class StatusError : public Error {
 public:
  StatusError(int status, const std::string& body)
      : Error("endpoint returned HTTP " + std::to_string(status)), status_(status), body_(body) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;
};
ParsedUrl parse_url(const std::string& url);

// Client for one endpoint. query() may be called from many threads; at most
// max_concurrency requests are in flight at once.
class LlmClient {
 public:
  explicit LlmClient(LlmEndpoint endpoint);

  std::string query(const std::string& prompt);

  struct Outcome {
    std::optional<std::string> text;
    std::string error;  // set when text is empty
  };
  // Runs the prompts concurrently up to the cap; results keep input order.
  std::vector<Outcome> query_batch(const std::vector<std::string>& prompts);

  std::size_t peak_in_flight() const noexcept { return peak_.load(); }
  std::uint64_t retries() const noexcept { return retries_.load(); }

 private:
  struct Attempt;
  Attempt attempt_once(const std::string& body) const;

  LlmEndpoint endpoint_;
  ParsedUrl url_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
  std::atomic<std::uint64_t> retries_{0};
};

std::string query_llm(const LlmEndpoint& endpoint, const std::string& prompt);

struct FinetuneConfig {
  std::string model_name = "meta-llama/Llama-2-7b-chat-hf";
  double learning_rate = 5e-4;
  int num_train_epochs = 10;
  int max_seq_length = 2048;
  int gradient_accumulation_steps = 2;
  bool load_in_4bit = true;
  std::string quant_type = "nf4";
  std::string lr_scheduler_type = "linear";

  friend bool operator==(const FinetuneConfig&, const FinetuneConfig&) = default;
};

struct FinetuneOverrides {
  std::optional<std::string> model_name;
  std::optional<double> learning_rate;
  std::optional<int> num_train_epochs;
  std::optional<int> max_seq_length;
  std::optional<int> gradient_accumulation_steps;
  std::optional<bool> load_in_4bit;
  std::optional<std::string> quant_type;
  std::optional<std::string> lr_scheduler_type;

  // key=value with the document's key names; throws ValidationError naming
  // the key on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
};

// Defaults merged with overrides; throws ValidationError naming the first
// out-of-bounds field.
FinetuneConfig emit_finetune_config(const FinetuneOverrides& overrides = {});

// Flat key-value document using the training-argument names of the
// reference setup, one "'key':value," line per field inside braces.
std::string serialize_finetune(const FinetuneConfig& c, const std::string& comment = {});
nlohmann::json finetune_to_json(const FinetuneConfig& c);

}  // namespace disinfo::llm

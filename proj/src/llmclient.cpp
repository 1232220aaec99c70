#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "disinfo/llmclient.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "disinfo/log.hpp"
#include "disinfo/text.hpp"

namespace disinfo::llm {

using nlohmann::json;

namespace {

struct TaskInfo {
  TaskKind kind;
  const char* name;
  std::string question;
};

const std::vector<TaskInfo>& task_table() {
  static const std::vector<TaskInfo> table = {
      {TaskKind::narrative_analysis, "narrative-analysis",
       "Please analyse input text from perspective of revealing disinformation narratives."},
      {TaskKind::fact_check, "fact-check",
       "Please check the facts in the input text and reveal claims which are false or not supported by evidence."},
      {TaskKind::fake_detection, "fake-detection",
       "Please analyse input text from perspective of revealing disinformation narratives. Write finish conclusion "
       "if we can treat this text as fake news."},
      {TaskKind::manipulation_analytics, "manipulation-analytics",
       "Please analyse the following text from perspective of revealing disinformation and manipulation."},
      {TaskKind::entity_sentiment, "entity-sentiment", "Please find the entities and their sentiments in the text."},
  };
  return table;
}

const TaskInfo& info(TaskKind t) {
  for (const auto& i : task_table()) {
    if (i.kind == t) return i;
  }
  throw ValidationError("unregistered task");
}

constexpr std::string_view kOpen = "<s>[INST] <<SYS>>\n";
constexpr std::string_view kSysClose = "\n<</SYS>>\n\n";
constexpr std::string_view kClose = " [/INST]";

}  // namespace

const char* const kSystemLine = "You are an expert in fake news and disinformation revealing and analytics.";

std::string to_string(TaskKind t) { return info(t).name; }

TaskKind parse_task(const std::string& s) {
  for (const auto& i : task_table()) {
    if (s == i.name) return i.kind;
  }
  std::string names;
  for (const auto& i : task_table()) names += std::string(names.empty() ? "" : ", ") + i.name;
  throw ValidationError("unknown task '" + s + "' (expected one of " + names + ")");
}

const std::vector<TaskKind>& all_tasks() {
  static const std::vector<TaskKind> all = [] {
    std::vector<TaskKind> v;
    for (const auto& i : task_table()) v.push_back(i.kind);
    return v;
  }();
  return all;
}

const std::string& default_question(TaskKind t) { return info(t).question; }

std::string build_prompt(TaskKind task, const std::string& input_text, const std::optional<std::string>& custom) {
  if (text::trim(input_text).empty()) throw ValidationError("input text is empty");
  const std::string& question = custom ? *custom : default_question(task);
  if (question.empty()) throw ValidationError("question is empty");
  if (question.find_first_of("\r\n") != std::string::npos) throw ValidationError("question must be a single line");
  std::string out;
  out.reserve(kOpen.size() + question.size() + input_text.size() + 128);
  out += kOpen;
  out += kSystemLine;
  out += kSysClose;
  out += question;
  out += '\n';
  out += input_text;
  out += kClose;
  return out;
}

PromptParts parse_prompt(const std::string& prompt) {
  const std::string_view p = prompt;
  if (!p.starts_with(kOpen) || !p.ends_with(kClose)) throw ParseError("prompt lacks the instruction markers", 0);
  const auto body = p.substr(kOpen.size(), p.size() - kOpen.size() - kClose.size());
  const auto sys_end = body.find(kSysClose);
  if (sys_end == std::string_view::npos) throw ParseError("prompt lacks the system block", 0);
  PromptParts parts;
  parts.system = std::string(body.substr(0, sys_end));
  const auto rest = body.substr(sys_end + kSysClose.size());
  const auto nl = rest.find('\n');
  if (nl == std::string_view::npos) throw ParseError("prompt lacks a question line", 0);
  parts.question = std::string(rest.substr(0, nl));
  parts.input = std::string(rest.substr(nl + 1));
  return parts;
}

std::string to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive:
      return "positive";
    case Sentiment::negative:
      return "negative";
    case Sentiment::neutral:
      return "neutral";
  }
  return "neutral";
}

std::optional<Sentiment> parse_sentiment(const std::string& s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "positive") return Sentiment::positive;
  if (v == "negative") return Sentiment::negative;
  if (v == "neutral") return Sentiment::neutral;
  return std::nullopt;
}

namespace {

// Undo the escapes a LaTeX rendering of the response introduces.
std::string unlatex(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  std::istringstream lines(s);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    std::size_t i = line.find_first_not_of(" \t");
    if (i != std::string::npos && line.compare(i, 2, "\\\\") == 0) line.erase(0, i + 2);
    if (!first) out += '\n';
    first = false;
    out += line;
  }
  const std::pair<std::string_view, std::string_view> subs[] = {{"{[}", "["}, {"{]}", "]"}, {"\\{", "{"}, {"\\}", "}"}};
  for (const auto& [from, to] : subs) {
    std::string next;
    std::size_t pos = 0;
    while (true) {
      const auto hit = out.find(from, pos);
      next.append(out, pos, hit == std::string::npos ? std::string::npos : hit - pos);
      if (hit == std::string::npos) break;
      next += to;
      pos = hit + from.size();
    }
    out = std::move(next);
  }
  return out;
}

// End of the bracketed value opening at `start`, honoring string literals.
std::optional<std::size_t> matching_bracket(const std::string& s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return c == ']' ? std::optional<std::size_t>(i) : std::nullopt;
      if (depth < 0) return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<json> find_array(const std::string& s) {
  for (std::size_t pos = s.find('['); pos != std::string::npos; pos = s.find('[', pos + 1)) {
    const auto end = matching_bracket(s, pos);
    if (!end) continue;
    auto j = json::parse(s.begin() + static_cast<std::ptrdiff_t>(pos), s.begin() + static_cast<std::ptrdiff_t>(*end) + 1,
                         nullptr, false);
    if (j.is_discarded() || !j.is_array()) continue;
    const bool has_object = std::any_of(j.begin(), j.end(), [](const json& e) { return e.is_object(); });
    if (has_object) return j;
  }
  return std::nullopt;
}

}  // namespace

ParsedEntities parse_entity_sentiments(const std::string& response) {
  std::optional<json> array;
  auto strict = json::parse(response, nullptr, false);
  if (!strict.is_discarded() && strict.is_array()) array = std::move(strict);
  if (!array) array = find_array(response);
  if (!array) array = find_array(unlatex(response));
  if (!array) throw ParseError("no JSON array of entity records found in response", 0);

  ParsedEntities out;
  std::size_t index = 0;
  for (const auto& e : *array) {
    ++index;
    const auto reject = [&](const std::string& why) {
      out.warnings.push_back("record " + std::to_string(index) + ": " + why);
      log::get().warn("entity record {} rejected: {}", index, why);
    };
    if (!e.is_object()) {
      reject("not an object");
      continue;
    }
    const auto entity = e.find("entity");
    const auto sentiment = e.find("sentiment");
    if (entity == e.end() || !entity->is_string() || text::trim(entity->get<std::string>()).empty()) {
      reject("missing or empty entity");
      continue;
    }
    if (sentiment == e.end() || !sentiment->is_string()) {
      reject("missing sentiment");
      continue;
    }
    const auto parsed = parse_sentiment(sentiment->get<std::string>());
    if (!parsed) {
      reject("unknown sentiment '" + sentiment->get<std::string>() + "'");
      continue;
    }
    std::string comment;
    if (const auto c = e.find("comment"); c != e.end() && c->is_string()) comment = c->get<std::string>();
    out.records.push_back({text::trim(entity->get<std::string>()), *parsed, std::move(comment)});
  }
  if (out.records.empty()) throw ParseError("response contains no valid entity records", 0);
  return out;
}

json records_to_json(const std::vector<EntitySentiment>& records) {
  json out = json::array();
  for (const auto& r : records) {
    out.push_back({{"entity", r.entity}, {"sentiment", to_string(r.sentiment)}, {"comment", r.comment}});
  }
  return out;
}

std::vector<double> sentiment_features(const std::vector<EntitySentiment>& records,
                                       const std::vector<std::string>& registry) {
  if (registry.empty()) throw ValidationError("entity registry is empty");
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < registry.size(); ++i) slot.emplace(text::to_lower(text::trim(registry[i])), i);
  std::vector<double> sum(registry.size(), 0.0), count(registry.size(), 0.0);
  for (const auto& r : records) {
    const auto it = slot.find(text::to_lower(r.entity));
    if (it == slot.end()) continue;
    const double v = r.sentiment == Sentiment::positive ? 1.0 : r.sentiment == Sentiment::negative ? -1.0 : 0.0;
    sum[it->second] += v;
    count[it->second] += 1.0;
  }
  std::vector<double> out(registry.size(), 0.0);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    if (count[i] > 0.0) out[i] = sum[i] / count[i];
  }
  // Registry entries that differ only in case share one slot.
  for (std::size_t i = 0; i < registry.size(); ++i) out[i] = out[slot.at(text::to_lower(text::trim(registry[i])))];
  return out;
}

void LlmEndpoint::validate() const {
  parse_url(url);
  if (max_retries < 0) throw ValidationError("max_retries must not be negative");
  if (max_concurrency < 1 || max_concurrency > 1024) throw ValidationError("max_concurrency must be in [1, 1024]");
  if (!(timeout_seconds > 0.0)) throw ValidationError("timeout must be positive");
  if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be at least 1");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must not be negative");
  if (backoff_initial_ms < 0 || backoff_max_ms < backoff_initial_ms) throw ValidationError("invalid backoff window");
}

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl u;
  const auto sep = url.find("://");
  if (sep == std::string::npos) throw ValidationError("endpoint URL lacks a scheme: " + url);
  u.scheme = url.substr(0, sep);
  if (u.scheme != "http" && u.scheme != "https") throw ValidationError("unsupported URL scheme: " + u.scheme);
  const auto rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  const auto authority = rest.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos && authority.find(']') == std::string::npos) {
    u.host = authority.substr(0, colon);
    const auto port = authority.substr(colon + 1);
    const auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), u.port);
    if (ec != std::errc() || p != port.data() + port.size() || u.port <= 0 || u.port > 65535) {
      throw ValidationError("invalid port in URL: " + url);
    }
  } else {
    u.host = authority;
    u.port = u.scheme == "https" ? 443 : 80;
  }
  if (u.host.empty()) throw ValidationError("endpoint URL lacks a host: " + url);
  return u;
}

struct LlmClient::Attempt {
  enum class Kind { ok, network, timeout, status } kind = Kind::ok;
  int status = 0;
  std::string body;  // response body, or error detail
};

LlmClient::LlmClient(LlmEndpoint endpoint)
    : endpoint_(std::move(endpoint)), slots_(static_cast<std::ptrdiff_t>(endpoint_.max_concurrency)) {
  endpoint_.validate();
  url_ = parse_url(endpoint_.url);
}

LlmClient::Attempt LlmClient::attempt_once(const std::string& body) const {
  httplib::Client cli(url_.scheme + "://" + url_.host + ":" + std::to_string(url_.port));
  const auto secs = static_cast<time_t>(endpoint_.timeout_seconds);
  const auto usecs = static_cast<time_t>((endpoint_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const auto started = std::chrono::steady_clock::now();
  auto res = cli.Post(url_.path, body, "application/json");
  Attempt a;
  if (!res) {
    const auto err = res.error();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                            elapsed >= 0.95 * endpoint_.timeout_seconds);
    a.kind = timed_out ? Attempt::Kind::timeout : Attempt::Kind::network;
    a.body = httplib::to_string(err);
    return a;
  }
  a.status = res->status;
  a.body = res->body;
  a.kind = res->status >= 200 && res->status < 300 ? Attempt::Kind::ok : Attempt::Kind::status;
  return a;
}

namespace {

std::string request_body(const LlmEndpoint& e, const std::string& prompt) {
  json j;
  if (e.style == WireStyle::chat) {
    if (!e.model.empty()) j["model"] = e.model;
    j["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    j["temperature"] = e.temperature;
    j["max_tokens"] = e.max_new_tokens;
  } else {
    j["prompt"] = prompt;
    j["temperature"] = e.temperature;
    j["max_new_tokens"] = e.max_new_tokens;
  }
  return j.dump();
}

std::string response_text(const LlmEndpoint& e, const std::string& body) {
  if (e.style == WireStyle::completion) return body;
  const auto j = json::parse(body, nullptr, false);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ParseError("chat response lacks choices[0].message.content", 0);
  }
}

// Guards the concurrency slot and the in-flight counters.
class SlotGuard {
 public:
  SlotGuard(std::counting_semaphore<1024>& s, std::atomic<std::size_t>& in_flight, std::atomic<std::size_t>& peak)
      : s_(s), in_flight_(in_flight) {
    s_.acquire();
    const auto now = ++in_flight_;
    auto seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
  }
  ~SlotGuard() {
    --in_flight_;
    s_.release();
  }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
  std::atomic<std::size_t>& in_flight_;
};

}  // namespace

std::string LlmClient::query(const std::string& prompt) {
  SlotGuard guard(slots_, in_flight_, peak_);
  const std::string body = request_body(endpoint_, prompt);
  for (int attempt = 0;; ++attempt) {
    const Attempt a = attempt_once(body);
    if (a.kind == Attempt::Kind::ok) return response_text(endpoint_, a.body);
    const bool transient = a.kind != Attempt::Kind::status || a.status >= 500 || a.status == 408 || a.status == 429;
    if (!transient || attempt >= endpoint_.max_retries) {
      switch (a.kind) {
        case Attempt::Kind::timeout:
          throw TimeoutError(url_.host, endpoint_.timeout_seconds);
        case Attempt::Kind::network:
          throw NetworkError(url_.host, a.body + " after " + std::to_string(attempt + 1) + " attempts");
        default:
          throw StatusError(a.status, a.body);
      }
    }
    const double delay = std::min(static_cast<double>(endpoint_.backoff_max_ms),
                                  endpoint_.backoff_initial_ms * std::pow(2.0, attempt));
    const std::string reason = a.kind == Attempt::Kind::status ? "HTTP " + std::to_string(a.status) : a.body;
    log::get().warn("retry {}/{} for {} after {}; waiting {} ms", attempt + 1, endpoint_.max_retries, url_.host,
                    reason, static_cast<long>(delay));
    ++retries_;
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
  }
}

std::vector<LlmClient::Outcome> LlmClient::query_batch(const std::vector<std::string>& prompts) {
  std::vector<std::future<Outcome>> futures;
  futures.reserve(prompts.size());
  for (const auto& p : prompts) {
    futures.push_back(std::async(std::launch::async, [this, &p]() -> Outcome {
      try {
        return {query(p), {}};
      } catch (const std::exception& e) {
        return {std::nullopt, e.what()};
      }
    }));
  }
  std::vector<Outcome> out;
  out.reserve(prompts.size());
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::string query_llm(const LlmEndpoint& endpoint, const std::string& prompt) {
  LlmClient client(endpoint);
  return client.query(prompt);
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw ValidationError("finetune field " + key + ": cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = text::to_lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("finetune field " + key + ": expected true or false, got '" + value + "'");
}

}  // namespace

void FinetuneOverrides::set(const std::string& key, const std::string& value) {
  if (key == "model_name") {
    model_name = value;
  } else if (key == "learning_rate") {
    learning_rate = parse_number<double>(key, value);
  } else if (key == "num_train_epochs" || key == "epochs") {
    num_train_epochs = parse_number<int>(key, value);
  } else if (key == "max_seq_length") {
    max_seq_length = parse_number<int>(key, value);
  } else if (key == "gradient_accumulation_steps") {
    gradient_accumulation_steps = parse_number<int>(key, value);
  } else if (key == "load_in_4bit") {
    load_in_4bit = parse_bool(key, value);
  } else if (key == "bnb_4bit_quant_type" || key == "quant_type") {
    quant_type = value;
  } else if (key == "lr_scheduler_type") {
    lr_scheduler_type = value;
  } else {
    throw ValidationError("unknown finetune field: " + key);
  }
}

FinetuneConfig emit_finetune_config(const FinetuneOverrides& o) {
  FinetuneConfig c;
  if (o.model_name) c.model_name = *o.model_name;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.num_train_epochs) c.num_train_epochs = *o.num_train_epochs;
  if (o.max_seq_length) c.max_seq_length = *o.max_seq_length;
  if (o.gradient_accumulation_steps) c.gradient_accumulation_steps = *o.gradient_accumulation_steps;
  if (o.load_in_4bit) c.load_in_4bit = *o.load_in_4bit;
  if (o.quant_type) c.quant_type = *o.quant_type;
  if (o.lr_scheduler_type) c.lr_scheduler_type = *o.lr_scheduler_type;

  if (text::trim(c.model_name).empty()) throw ValidationError("finetune field model_name must not be empty");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ValidationError("finetune field learning_rate must be a positive number");
  }
  if (c.num_train_epochs < 1) throw ValidationError("finetune field num_train_epochs must be at least 1");
  if (c.max_seq_length < 1) throw ValidationError("finetune field max_seq_length must be at least 1");
  if (c.gradient_accumulation_steps < 1) {
    throw ValidationError("finetune field gradient_accumulation_steps must be at least 1");
  }
  if (c.quant_type != "nf4" && c.quant_type != "fp4") {
    throw ValidationError("finetune field bnb_4bit_quant_type must be nf4 or fp4");
  }
  if (text::trim(c.lr_scheduler_type).empty()) throw ValidationError("finetune field lr_scheduler_type must not be empty");
  return c;
}

namespace {

// Shortest round-trip scientific form with a bare exponent: 5e-4, 1.5e-5.
std::string format_rate(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  std::string s(buf, res.ptr);
  const auto e = s.find('e');
  std::string mantissa = s.substr(0, e);
  std::string exp = s.substr(e + 1);
  std::string sign;
  if (!exp.empty() && (exp[0] == '-' || exp[0] == '+')) {
    if (exp[0] == '-') sign = "-";
    exp.erase(0, 1);
  }
  exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
  return mantissa + "e" + sign + exp;
}

std::string py_string(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\\' || c == '\'') out += '\\';
    out += c;
  }
  return out + "'";
}

}  // namespace

std::string serialize_finetune(const FinetuneConfig& c, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "{\n";
  out << "'model_name':" << py_string(c.model_name) << ",\n";
  out << "'learning_rate':" << format_rate(c.learning_rate) << ",\n";
  out << "'num_train_epochs':" << c.num_train_epochs << ",\n";
  out << "'max_seq_length':" << c.max_seq_length << ",\n";
  out << "'gradient_accumulation_steps':" << c.gradient_accumulation_steps << ",\n";
  out << "'load_in_4bit':" << (c.load_in_4bit ? "True" : "False") << ",\n";
  out << "'bnb_4bit_quant_type':" << py_string(c.quant_type) << ",\n";
  out << "'lr_scheduler_type':" << py_string(c.lr_scheduler_type) << "\n";
  out << "}\n";
  return out.str();
}

json finetune_to_json(const FinetuneConfig& c) {
  return {{"model_name", c.model_name},
          {"learning_rate", c.learning_rate},
          {"num_train_epochs", c.num_train_epochs},
          {"max_seq_length", c.max_seq_length},
          {"gradient_accumulation_steps", c.gradient_accumulation_steps},
          {"load_in_4bit", c.load_in_4bit},
          {"bnb_4bit_quant_type", c.quant_type},
          {"lr_scheduler_type", c.lr_scheduler_type}};
}

}  // namespace disinfo::llm

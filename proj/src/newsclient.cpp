#include "mpsc/newsclient.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "mpsc/sha256.hpp"

namespace mpsc::news {

using nlohmann::json;

namespace {

int parse_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw InputError("timestamp too short: " + std::string(s));
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') throw InputError("bad timestamp: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

std::string str_or_empty(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return (it != obj.end() && it->is_string()) ? it->get<std::string>() : std::string();
}

}  // namespace

Timestamp parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    throw InputError("bad timestamp: " + std::string(s));
  }
  const year_month_day ymd{year{parse_int(s, 0, 4)}, month{unsigned(parse_int(s, 5, 2))},
                           day{unsigned(parse_int(s, 8, 2))}};
  if (!ymd.ok()) throw InputError("bad date: " + std::string(s));
  const int hh = parse_int(s, 11, 2), mm = parse_int(s, 14, 2), ss = parse_int(s, 17, 2);
  if (hh > 23 || mm > 59 || ss > 60) throw InputError("bad time: " + std::string(s));
  Timestamp t = sys_days(ymd) + hours(hh) + minutes(mm) + seconds(ss);
  std::size_t i = 19;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  }
  if (i == s.size() || (s[i] == 'Z' && i + 1 == s.size())) return t;
  if ((s[i] == '+' || s[i] == '-') && s.size() == i + 6 && s[i + 3] == ':') {
    const auto offset = hours(parse_int(s, i + 1, 2)) + minutes(parse_int(s, i + 4, 2));
    return s[i] == '+' ? t - offset : t + offset;
  }
  throw InputError("bad timestamp zone: " + std::string(s));
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(t);
  const year_month_day ymd{days};
  const hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(hms.hours().count()),
                int(hms.minutes().count()), int(hms.seconds().count()));
  return buf;
}

void NewsSourceConfig::validate() const {
  if (page_size == 0) throw ConfigError("page_size must be positive");
  if (!(rate_limit > 0.0)) throw ConfigError("rate_limit must be positive");
  if (mode == Mode::Fixture) {
    if (fixture_path.empty()) throw ConfigError("fixture mode requires a fixture path");
  } else {
    if (endpoint.empty()) throw ConfigError("live mode requires an endpoint");
    if (api_key_env.empty()) throw ConfigError("live mode requires an API key variable name");
  }
}

std::string NewsSourceConfig::fingerprint() const {
  std::string canon = mode == Mode::Live ? "live\n" : "fixture\n";
  canon += (mode == Mode::Live ? endpoint : fixture_path.string()) + "\n";
  canon += join(sources, ",") + "\n" + std::to_string(page_size);
  return sha256_hex(canon);
}

void sort_articles(std::vector<Article>& articles) {
  std::sort(articles.begin(), articles.end(), [](const Article& a, const Article& b) {
    if (a.published_at != b.published_at) return a.published_at > b.published_at;
    return std::tie(a.source, a.title, a.url, a.description, a.content) <
           std::tie(b.source, b.title, b.url, b.description, b.content);
  });
}

bool valid_url(std::string_view url) {
  std::string_view rest;
  if (url.starts_with("https://")) {
    rest = url.substr(8);
  } else if (url.starts_with("http://")) {
    rest = url.substr(7);
  } else {
    return false;
  }
  if (rest.empty() || rest.front() == '/' || rest.front() == '.') return false;
  return std::none_of(url.begin(), url.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '"' || c == '<' || c == '>';
  });
}

std::vector<Article> parse_articles(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError("", 200, std::string("malformed response: ") + e.what());
  }
  if (!j.is_object()) throw TransportError("", 200, "malformed response: not an object");
  if (j.contains("status") && j["status"] != "ok") {
    throw TransportError("", 200, "response status " + j["status"].dump());
  }
  std::vector<Article> out;
  const auto it = j.find("articles");
  if (it == j.end() || !it->is_array()) return out;
  for (const auto& a : *it) {
    if (!a.is_object()) continue;
    Article art;
    if (const auto src = a.find("source"); src != a.end() && src->is_object()) {
      art.source = str_or_empty(*src, "name");
    }
    art.title = str_or_empty(a, "title");
    art.description = str_or_empty(a, "description");
    art.content = str_or_empty(a, "content");
    art.url = str_or_empty(a, "url");
    if (art.title.empty() || !valid_url(art.url)) continue;
    try {
      art.published_at = parse_timestamp(str_or_empty(a, "publishedAt"));
    } catch (const InputError&) {
      continue;
    }
    out.push_back(std::move(art));
  }
  return out;
}

std::string articles_to_json(std::span<const Article> articles) {
  json arr = json::array();
  for (const auto& a : articles) {
    arr.push_back({{"source", {{"name", a.source}}},
                   {"title", a.title},
                   {"description", a.description},
                   {"content", a.content},
                   {"url", a.url},
                   {"publishedAt", format_timestamp(a.published_at)}});
  }
  return json{{"status", "ok"}, {"articles", arr}}.dump();
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

RateLimiter::RateLimiter(double per_minute)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(60.0 / std::max(per_minute, 1e-9)))) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  if (next_ > now) std::this_thread::sleep_until(next_);
  next_ = std::max(now, next_) + interval_;
}

NewsClient::NewsClient(NewsSourceConfig config, Options options)
    : config_(std::move(config)), options_(std::move(options)), limiter_(config_.rate_limit) {
  config_.validate();
  if (!options_.clock) options_.clock = std::make_shared<SystemClock>();
  if (!options_.env) options_.env = process_env;
}

SearchResult NewsClient::search(const querygen::SearchQuery& query) {
  if (query.terms.empty() || query.raw.empty()) throw querygen::EmptyQuery();
  return config_.mode == Mode::Fixture ? search_fixture(query) : search_live(query);
}

SearchResult NewsClient::search_fixture(const querygen::SearchQuery& query) {
  std::lock_guard lock(fixtures_mutex_);
  if (!fixtures_) {
    std::map<std::string, std::vector<Article>> entries;
    try {
      const json j = json::parse(read_file(config_.fixture_path));
      if (!j.is_object()) throw ConfigError("fixture file must hold a JSON object");
      for (const auto& [key, response] : j.items()) {
        entries.emplace(key, parse_articles(response.dump()));
      }
    } catch (const json::exception& e) {
      throw ConfigError("fixture file " + config_.fixture_path.string() + ": " + e.what());
    }
    fixtures_ = std::move(entries);
  }
  SearchResult result;
  result.query = query;
  result.fetched_at = options_.clock->now();
  if (const auto it = fixtures_->find(query.raw); it != fixtures_->end()) {
    result.articles = it->second;
  }
  sort_articles(result.articles);
  return result;
}

SearchResult NewsClient::search_live(const querygen::SearchQuery& query) {
  const auto key = options_.env(config_.api_key_env);
  if (!key || key->empty()) {
    throw AuthError("environment variable " + config_.api_key_env + " is not set");
  }
  if (!options_.transport) throw ConfigError("live mode requires a transport");

  std::vector<std::vector<std::string>> batches;
  for (std::size_t i = 0; i < config_.sources.size(); i += kMaxSourcesPerRequest) {
    const auto end = std::min(config_.sources.size(), i + kMaxSourcesPerRequest);
    batches.emplace_back(config_.sources.begin() + static_cast<std::ptrdiff_t>(i),
                         config_.sources.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.empty()) batches.emplace_back();

  SearchResult result;
  result.query = query;
  std::optional<std::exception_ptr> first_error;
  std::size_t succeeded = 0;
  for (const auto& batch : batches) {
    const std::string label = batch.empty() ? "*" : join(batch, ",");
    HttpRequest req;
    req.url = config_.endpoint + "/everything?q=" + querygen::url_encode(query.raw) +
              "&pageSize=" + std::to_string(config_.page_size);
    if (!batch.empty()) req.url += "&sources=" + querygen::url_encode(label);
    req.headers = {{"X-Api-Key", *key}};
    req.timeout = config_.timeout;
    try {
      limiter_.acquire();
      ++upstream_requests_;
      const HttpResponse resp = options_.transport->get(req);
      if (resp.status == 401 || resp.status == 403) {
        throw AuthError("news API rejected the key (HTTP " + std::to_string(resp.status) + ")");
      }
      if (resp.status == 429) {
        std::chrono::seconds retry{60};
        if (const auto it = resp.headers.find("retry-after"); it != resp.headers.end()) {
          try {
            retry = std::chrono::seconds(std::stoll(it->second));
          } catch (const std::exception&) {
          }
        }
        throw RateLimited(retry);
      }
      if (resp.status < 200 || resp.status >= 300) {
        throw TransportError(label, resp.status, "HTTP " + std::to_string(resp.status) +
                                                     " from " + label);
      }
      try {
        auto articles = parse_articles(resp.body);
        result.articles.insert(result.articles.end(), articles.begin(), articles.end());
      } catch (const TransportError& e) {
        throw TransportError(label, resp.status, e.what());
      }
      ++succeeded;
    } catch (const AuthError&) {
      throw;
    } catch (const TransportError& e) {
      result.failures.push_back({label, e.status(), e.what()});
      if (!first_error) first_error = std::current_exception();
    } catch (const RateLimited& e) {
      result.failures.push_back({label, 429, e.what()});
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (succeeded == 0 && first_error) std::rethrow_exception(*first_error);
  sort_articles(result.articles);
  result.fetched_at = options_.clock->now();
  for (const auto& f : result.failures) {
    result.warnings.push_back("source batch '" + f.source + "' failed: " + f.message);
  }
  return result;
}

std::filesystem::path NewsClient::cache_path(const querygen::SearchQuery& query) const {
  return *options_.cache_dir / (sha256_hex(query.raw + "\n" + config_.fingerprint()) + ".json");
}

std::optional<SearchResult> NewsClient::read_cache(const querygen::SearchQuery& query) const {
  const auto path = cache_path(query);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    std::ostringstream ss;
    ss << in.rdbuf();
    const json j = json::parse(ss.str());
    if (j.at("query").get<std::string>() != query.raw) return std::nullopt;
    SearchResult r;
    r.query = query;
    r.fetched_at = parse_timestamp(j.at("fetched_at").get<std::string>());
    r.articles = parse_articles(j.at("response").dump());
    r.from_cache = true;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries behave as misses
  }
}

void NewsClient::write_cache(const SearchResult& result) const {
  const auto path = cache_path(result.query);
  std::filesystem::create_directories(path.parent_path());
  const json j = {{"query", result.query.raw},
                  {"fetched_at", format_timestamp(result.fetched_at)},
                  {"response", json::parse(articles_to_json(result.articles))}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::mutex& NewsClient::key_mutex(const std::string& key) {
  std::lock_guard lock(key_mutexes_guard_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

SearchResult NewsClient::cached(const querygen::SearchQuery& query, std::chrono::seconds ttl,
                                bool allow_stale) {
  if (ttl.count() < 0) throw ConfigError("ttl must be non-negative");
  if (!options_.cache_dir) {
    return search(query);
  }
  std::lock_guard lock(key_mutex(query.raw));
  std::optional<SearchResult> entry = read_cache(query);
  const Timestamp now = options_.clock->now();
  if (entry && ttl.count() > 0 && now - entry->fetched_at < ttl) return *entry;
  try {
    SearchResult fresh = search(query);
    write_cache(fresh);
    return fresh;
  } catch (const Error& e) {
    if (!allow_stale || !entry) throw;
    entry->warnings.push_back(std::string("serving stale cache entry from ") +
                              format_timestamp(entry->fetched_at) + ": " + e.what());
    return *entry;
  }
}

std::string aggregate_content(std::span<const Article> articles, std::size_t token_budget) {
  std::string joined;
  for (const auto& a : articles) {
    if (!joined.empty()) joined += " | ";
    joined += a.title + ".";
    if (!a.description.empty()) joined += " " + a.description + ".";
  }
  std::string out;
  std::size_t taken = 0;
  std::istringstream words(joined);
  std::string w;
  while (taken < token_budget && words >> w) {
    if (!out.empty()) out.push_back(' ');
    out += w;
    ++taken;
  }
  return out;
}

}  // namespace mpsc::news

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpsc/error.hpp"
#include "mpsc/querygen.hpp"

namespace mpsc::news {

using Timestamp = std::chrono::sys_seconds;

// ISO-8601 "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM]"; throws InputError otherwise.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

enum class Mode { Live, Fixture };

struct NewsSourceConfig {
  Mode mode = Mode::Fixture;
  std::string endpoint = "https://newsapi.org/v2";
  std::string api_key_env = "NEWS_API_KEY";
  std::vector<std::string> sources;  // empty = let the aggregator choose
  std::size_t page_size = 10;
  std::chrono::milliseconds timeout{10000};
  double rate_limit = 60.0;  // requests per minute
  std::filesystem::path fixture_path;

  void validate() const;
  // Stable digest of the fields that change what a search returns.
  std::string fingerprint() const;
};

inline constexpr std::size_t kMaxSourcesPerRequest = 20;

struct Article {
  std::string source;
  std::string title;
  std::string description;
  std::string content;
  std::string url;
  Timestamp published_at{};

  bool operator==(const Article&) const = default;
};

// Newest first; ties by source, title, then the remaining fields.
void sort_articles(std::vector<Article>& articles);

struct SourceFailure {
  std::string source;
  int status = 0;
  std::string message;
};

struct SearchResult {
  querygen::SearchQuery query;
  std::vector<Article> articles;
  Timestamp fetched_at{};
  bool from_cache = false;
  std::vector<SourceFailure> failures;  // per-batch errors of a partially successful search
  std::vector<std::string> warnings;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  TransportError(std::string source, int status, const std::string& message)
      : Error(message), source_(std::move(source)), status_(status) {}
  const std::string& source() const { return source_; }
  int status() const { return status_; }

 private:
  std::string source_;
  int status_;
};

class RateLimited : public Error {
 public:
  explicit RateLimited(std::chrono::seconds retry_after)
      : Error("rate limited; retry after " + std::to_string(retry_after.count()) + "s"),
        retry_after_(retry_after) {}
  std::chrono::seconds retry_after() const { return retry_after_; }

 private:
  std::chrono::seconds retry_after_;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{10000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError (status 0) when no response could be obtained.
  virtual HttpResponse get(const HttpRequest& request) = 0;
};

// HTTP(S) transport backed by cpp-httplib.
std::shared_ptr<Transport> make_http_transport();

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  }
};

// Spaces requests at least 60 / per_minute seconds apart.
class RateLimiter {
 public:
  explicit RateLimiter(double per_minute);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_{};
  std::mutex mutex_;
};

// Parses the aggregator response shape
//   {"status":"ok","articles":[{"source":{"name":..},"title":..,"description":..,
//     "content":..,"url":..,"publishedAt":"ISO-8601"}]}
// Articles with an empty title, invalid url or unparsable date are skipped.
std::vector<Article> parse_articles(std::string_view json);
std::string articles_to_json(std::span<const Article> articles);

bool valid_url(std::string_view url);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

class NewsClient {
 public:
  struct Options {
    std::shared_ptr<Transport> transport;          // required for live mode
    std::shared_ptr<const Clock> clock;            // defaults to SystemClock
    std::optional<std::filesystem::path> cache_dir;
    EnvLookup env = process_env;
  };

  NewsClient(NewsSourceConfig config, Options options);

  const NewsSourceConfig& config() const { return config_; }

  SearchResult search(const querygen::SearchQuery& query);

  // Serves a cache entry younger than ttl; otherwise searches and stores the result.
  // With allow_stale, a failed refresh falls back to an expired entry plus a warning.
  SearchResult cached(const querygen::SearchQuery& query, std::chrono::seconds ttl,
                      bool allow_stale = false);

  std::size_t upstream_requests() const { return upstream_requests_; }

 private:
  SearchResult search_live(const querygen::SearchQuery& query);
  SearchResult search_fixture(const querygen::SearchQuery& query);
  std::filesystem::path cache_path(const querygen::SearchQuery& query) const;
  std::optional<SearchResult> read_cache(const querygen::SearchQuery& query) const;
  void write_cache(const SearchResult& result) const;
  std::mutex& key_mutex(const std::string& key);

  NewsSourceConfig config_;
  Options options_;
  RateLimiter limiter_;
  std::optional<std::map<std::string, std::vector<Article>>> fixtures_;
  std::mutex fixtures_mutex_;
  std::mutex key_mutexes_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
  std::atomic<std::size_t> upstream_requests_{0};
};

inline constexpr std::chrono::seconds kDefaultCacheTtl{6 * 3600};

// "title. description." per article joined by " | ", cut to token_budget whitespace tokens.
std::string aggregate_content(std::span<const Article> articles, std::size_t token_budget);

}  // namespace mpsc::news

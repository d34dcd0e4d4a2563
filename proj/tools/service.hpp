#pragma once

#include "admissible/table.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace httplib {
class Server;
}

namespace admissible::service {

inline constexpr int kDefaultPort = 7979;
inline constexpr std::uint64_t kDefaultSeed = 20231;

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = kDefaultPort;
    std::size_t workers = 1;              // compute threads shared by all jobs
    std::filesystem::path session_dir;    // empty: in-memory only
};

enum class JobState { Queued, Running, Done, Failed };

const char* to_string(JobState s) noexcept;

struct Job {
    std::string id;
    std::string kind;
    JobState state = JobState::Queued;
    std::uint64_t seed = 0;
    nlohmann::json result;  // set once, when done
    std::string error;      // set once, when failed
};

/// Datasets and jobs, guarded by one mutex. Job state only moves forward and
/// results are immutable once published.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path dir = {});

    std::string add_dataset(Table table);
    std::optional<Table> dataset(const std::string& id) const;

    std::string add_job(const std::string& kind, std::uint64_t seed);
    void mark_running(const std::string& id);
    void finish(const std::string& id, nlohmann::json result);
    void fail(const std::string& id, std::string error);
    std::optional<Job> job(const std::string& id) const;

private:
    void persist_job(const Job& job) const;
    void restore();

    mutable std::mutex mu_;
    std::filesystem::path dir_;
    std::map<std::string, Table> datasets_;
    std::map<std::string, Job> jobs_;
    std::uint64_t next_dataset_ = 1;
    std::uint64_t next_job_ = 1;
};

/// Fixed-size worker pool running queued closures in FIFO order.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool();
    void submit(std::function<void()> task);

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

/// HTTP facade: registers every endpoint on a server.
class Workbench {
public:
    explicit Workbench(const ServiceConfig& cfg);
    void install(httplib::Server& server);
    SessionStore& store() { return store_; }

private:
    std::string submit(const std::string& kind, std::uint64_t seed, std::function<nlohmann::json()> work);

    SessionStore store_;
    WorkerPool pool_;
};

/// Blocking: listens until the process is stopped. Returns non-zero when the
/// port cannot be bound.
int serve(const ServiceConfig& cfg);

}  // namespace admissible::service

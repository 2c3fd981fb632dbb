#pragma once

#include <condition_variable>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace agcam::service {

enum class JobKind { kSaliency, kEval, kCompare };
enum class JobStatus { kQueued, kRunning, kDone, kFailed };

std::string_view to_string(JobKind kind);
std::string_view to_string(JobStatus status);

struct JobRecord {
    std::string job_id;
    JobKind kind = JobKind::kSaliency;
    JobStatus status = JobStatus::kQueued;
    std::string queue_key; // model id the job runs against
    nlohmann::json request;
    std::vector<std::string> result_ids;
    std::string error;
    std::string error_code;
    std::string created_at;
    std::string started_at;
    std::string finished_at;

    nlohmann::json to_json() const;
};

// Only queued->running and running->done|failed are legal.
bool transition_allowed(JobStatus from, JobStatus to);

// One FIFO worker per queue key. Jobs with the same key never overlap.
class JobManager {
  public:
    // Returns the ids of the results the job produced; throwing fails the job.
    using JobFn = std::function<std::vector<std::string>()>;

    JobManager() = default;
    JobManager(const JobManager &) = delete;
    JobManager &operator=(const JobManager &) = delete;
    ~JobManager();

    std::string submit(JobKind kind, const std::string &queue_key, nlohmann::json request, JobFn fn);
    std::optional<JobRecord> get(const std::string &job_id) const;
    // Blocks until the job is done or failed; false on timeout or unknown id.
    bool wait(const std::string &job_id, std::chrono::milliseconds timeout) const;

    // Largest number of simultaneously running jobs seen for `queue_key`.
    int max_running_observed(const std::string &queue_key) const;

    void shutdown();

  private:
    struct Queue {
        std::deque<std::pair<std::string, JobFn>> items;
        std::thread worker;
    };

    void worker_loop(const std::string &key);
    void set_status(const std::string &job_id, JobStatus to);

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::condition_variable work_ready_;
    std::map<std::string, JobRecord> jobs_;
    std::map<std::string, std::unique_ptr<Queue>> queues_;
    std::map<std::string, int> running_;
    std::map<std::string, int> max_running_;
    std::uint64_t next_id_ = 1;
    bool stopping_ = false;
};

std::string utc_now_iso();

} // namespace agcam::service

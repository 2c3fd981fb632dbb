#include "agcam/service/jobs.hpp"

#include "agcam/error.hpp"

#include <ctime>
#include <fmt/format.h>
#include <stdexcept>

namespace agcam::service {

std::string_view to_string(JobKind kind) {
    switch (kind) {
    case JobKind::kSaliency: return "saliency";
    case JobKind::kEval: return "eval";
    case JobKind::kCompare: return "compare";
    }
    return "saliency";
}

std::string_view to_string(JobStatus status) {
    switch (status) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
    }
    return "queued";
}

std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json JobRecord::to_json() const {
    nlohmann::json out = {{"schema_version", 1},  {"job_id", job_id},         {"kind", to_string(kind)},
                          {"status", to_string(status)}, {"model_id", queue_key}, {"request", request},
                          {"result_ids", result_ids}, {"created_at", created_at}};
    out["started_at"] = started_at.empty() ? nlohmann::json(nullptr) : nlohmann::json(started_at);
    out["finished_at"] = finished_at.empty() ? nlohmann::json(nullptr) : nlohmann::json(finished_at);
    if (status == JobStatus::kFailed) out["error"] = {{"code", error_code}, {"message", error}};
    return out;
}

bool transition_allowed(JobStatus from, JobStatus to) {
    if (from == JobStatus::kQueued) return to == JobStatus::kRunning;
    if (from == JobStatus::kRunning) return to == JobStatus::kDone || to == JobStatus::kFailed;
    return false;
}

JobManager::~JobManager() { shutdown(); }

void JobManager::shutdown() {
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        for (auto &[_, q] : queues_) {
            if (q->worker.joinable()) workers.push_back(std::move(q->worker));
        }
    }
    work_ready_.notify_all();
    for (auto &w : workers) w.join();
}

std::string JobManager::submit(JobKind kind, const std::string &queue_key, nlohmann::json request, JobFn fn) {
    std::lock_guard lock(mutex_);
    if (stopping_) throw Error(ErrorCode::kPreconditionViolation, "service is shutting down");
    JobRecord rec;
    rec.job_id = fmt::format("job-{:06d}", next_id_++);
    rec.kind = kind;
    rec.queue_key = queue_key;
    rec.request = std::move(request);
    rec.created_at = utc_now_iso();
    const auto id = rec.job_id;
    jobs_.emplace(id, std::move(rec));

    auto &queue = queues_[queue_key];
    if (!queue) {
        queue = std::make_unique<Queue>();
        queue->worker = std::thread([this, queue_key] { worker_loop(queue_key); });
    }
    queue->items.emplace_back(id, std::move(fn));
    work_ready_.notify_all();
    return id;
}

void JobManager::set_status(const std::string &job_id, JobStatus to) {
    auto &rec = jobs_.at(job_id);
    if (!transition_allowed(rec.status, to)) {
        throw std::logic_error(fmt::format("illegal job transition {} -> {}", to_string(rec.status), to_string(to)));
    }
    rec.status = to;
    if (to == JobStatus::kRunning) {
        rec.started_at = utc_now_iso();
        const int now_running = ++running_[rec.queue_key];
        auto &peak = max_running_[rec.queue_key];
        peak = std::max(peak, now_running);
    } else {
        rec.finished_at = utc_now_iso();
        --running_[rec.queue_key];
    }
}

void JobManager::worker_loop(const std::string &key) {
    for (;;) {
        std::string job_id;
        JobFn fn;
        {
            std::unique_lock lock(mutex_);
            auto &queue = *queues_.at(key);
            work_ready_.wait(lock, [&] { return stopping_ || !queue.items.empty(); });
            if (queue.items.empty()) return;
            job_id = queue.items.front().first;
            fn = std::move(queue.items.front().second);
            queue.items.pop_front();
            set_status(job_id, JobStatus::kRunning);
        }
        changed_.notify_all();

        std::vector<std::string> results;
        std::string error, code;
        try {
            results = fn();
            if (results.empty()) code = "Internal", error = "job produced no result";
        } catch (const Error &e) {
            code = std::string(agcam::to_string(e.code()));
            error = e.what();
        } catch (const std::exception &e) {
            code = "Internal";
            error = e.what();
        }
        {
            std::lock_guard lock(mutex_);
            auto &rec = jobs_.at(job_id);
            if (error.empty()) {
                rec.result_ids = std::move(results);
                set_status(job_id, JobStatus::kDone);
            } else {
                rec.error = error;
                rec.error_code = code;
                set_status(job_id, JobStatus::kFailed);
            }
        }
        changed_.notify_all();
    }
}

std::optional<JobRecord> JobManager::get(const std::string &job_id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

bool JobManager::wait(const std::string &job_id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    if (!jobs_.contains(job_id)) return false;
    return changed_.wait_for(lock, timeout, [&] {
        const auto s = jobs_.at(job_id).status;
        return s == JobStatus::kDone || s == JobStatus::kFailed;
    });
}

int JobManager::max_running_observed(const std::string &queue_key) const {
    std::lock_guard lock(mutex_);
    auto it = max_running_.find(queue_key);
    return it == max_running_.end() ? 0 : it->second;
}

} // namespace agcam::service

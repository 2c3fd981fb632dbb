#pragma once

#include "agcam/adapter/registry.hpp"
#include "agcam/error.hpp"
#include "agcam/eval/question_set.hpp"
#include "agcam/render/render.hpp"
#include "agcam/service/jobs.hpp"
#include "agcam/service/store.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace agcam::service {

struct ServiceConfig {
    ModelRegistry registry;
    std::filesystem::path results_dir = "agcam-results";
    std::optional<std::filesystem::path> cache_dir; // MODEL_CACHE_DIR when unset
    std::vector<std::pair<std::string, std::filesystem::path>> question_sets; // bundled when empty
    render::RenderConfig render;
    int eval_workers = 4;
};

// HTTP status for a library error code.
int http_status_for(ErrorCode code);
// {"schema_version": 1, "field": ..., "message": ..., "code": ...}
nlohmann::json error_body(const Error &error);

class Service {
  public:
    // Loads question sets and opens the store; throws before any socket is bound.
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service &) = delete;
    Service &operator=(const Service &) = delete;

    // port 0 picks a free port. Throws PortInUse.
    int bind(const std::string &host, int port);
    void listen();           // blocks until stop()
    void start_background(); // listen() on a private thread
    void stop();

    int port() const { return port_; }
    JobManager &jobs() { return jobs_; }
    ResultsStore &store() { return store_; }

    // Loads on first use; later calls return the same handle.
    std::shared_ptr<ModelHandle> handle(const std::string &model_id);

  private:
    void install_routes();
    const eval::QuestionSet &question_set(const std::string &set_id) const;

    ServiceConfig config_;
    ResultsStore store_;
    JobManager jobs_;
    std::map<std::string, eval::QuestionSet> sets_;
    std::mutex handles_mutex_;
    std::map<std::string, std::shared_ptr<ModelHandle>> handles_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    int port_ = -1;
};

// Default port: AGCAM_PORT, else 8080.
int default_port();

} // namespace agcam::service

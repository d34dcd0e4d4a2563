#include "service.hpp"

#include "admissible/error.hpp"
#include "admissible/fairness.hpp"
#include "admissible/glm.hpp"
#include "admissible/infogram.hpp"
#include "admissible/tree.hpp"

#include <httplib.h>

#include <fstream>
#include <set>
#include <sstream>

namespace admissible::service {

using nlohmann::json;

const char* to_string(JobState s) noexcept {
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    }
    return "unknown";
}

namespace {

JobState state_from(const std::string& s) {
    if (s == "queued") return JobState::Queued;
    if (s == "running") return JobState::Running;
    if (s == "done") return JobState::Done;
    return JobState::Failed;
}

json job_json(const Job& job) {
    json j{{"id", job.id}, {"kind", job.kind}, {"state", to_string(job.state)}, {"seed", job.seed}};
    if (job.state == JobState::Failed) j["error"] = job.error;
    return j;
}

std::uint64_t id_number(const std::string& id) {
    const auto dash = id.rfind('-');
    try {
        return dash == std::string::npos ? 0 : std::stoull(id.substr(dash + 1));
    } catch (...) {
        return 0;
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw Error(ErrorKind::Io, "cannot write '" + tmp + "'");
        f << text;
    }
    std::filesystem::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
    return json::parse(f);
}

}  // namespace

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_ / "datasets");
    std::filesystem::create_directories(dir_ / "jobs");
    restore();
}

void SessionStore::restore() {
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / "datasets")) {
        if (entry.path().extension() != ".json") continue;
        const auto id = entry.path().stem().string();
        datasets_.emplace(id, read_json_file(entry.path()).get<Table>());
        next_dataset_ = std::max(next_dataset_, id_number(id) + 1);
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / "jobs")) {
        if (entry.path().extension() != ".json") continue;
        const auto j = read_json_file(entry.path());
        Job job;
        job.id = j.at("id").get<std::string>();
        job.kind = j.at("kind").get<std::string>();
        job.state = state_from(j.at("state").get<std::string>());
        job.seed = j.value("seed", std::uint64_t{0});
        job.result = j.value("result", json());
        job.error = j.value("error", std::string());
        if (job.state == JobState::Queued || job.state == JobState::Running) {
            job.state = JobState::Failed;
            job.error = "interrupted by a service restart";
        }
        next_job_ = std::max(next_job_, id_number(job.id) + 1);
        jobs_.emplace(job.id, std::move(job));
    }
}

void SessionStore::persist_job(const Job& job) const {
    if (dir_.empty()) return;
    json j = job_json(job);
    if (job.state == JobState::Done) j["result"] = job.result;
    write_file(dir_ / "jobs" / (job.id + ".json"), j.dump());
}

std::string SessionStore::add_dataset(Table table) {
    std::lock_guard lock(mu_);
    const auto id = "ds-" + std::to_string(next_dataset_++);
    if (!dir_.empty()) write_file(dir_ / "datasets" / (id + ".json"), json(table).dump());
    datasets_.emplace(id, std::move(table));
    return id;
}

std::optional<Table> SessionStore::dataset(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) return std::nullopt;
    return it->second;
}

std::string SessionStore::add_job(const std::string& kind, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    Job job;
    job.id = "job-" + std::to_string(next_job_++);
    job.kind = kind;
    job.seed = seed;
    persist_job(job);
    const auto id = job.id;
    jobs_.emplace(id, std::move(job));
    return id;
}

void SessionStore::mark_running(const std::string& id) {
    std::lock_guard lock(mu_);
    auto& job = jobs_.at(id);
    if (job.state == JobState::Queued) job.state = JobState::Running;
    persist_job(job);
}

void SessionStore::finish(const std::string& id, json result) {
    std::lock_guard lock(mu_);
    auto& job = jobs_.at(id);
    if (job.state == JobState::Done || job.state == JobState::Failed) return;
    job.result = std::move(result);
    job.state = JobState::Done;
    persist_job(job);
}

void SessionStore::fail(const std::string& id, std::string error) {
    std::lock_guard lock(mu_);
    auto& job = jobs_.at(id);
    if (job.state == JobState::Done || job.state == JobState::Failed) return;
    job.error = std::move(error);
    job.state = JobState::Failed;
    persist_job(job);
}

std::optional<Job> SessionStore::job(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

WorkerPool::WorkerPool(std::size_t workers) {
    for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
        threads_.emplace_back([this] {
            for (;;) {
                std::function<void()> task;
                {
                    std::unique_lock lock(mu_);
                    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                    if (stopping_) return;
                    task = std::move(queue_.front());
                    queue_.pop_front();
                }
                task();
            }
        });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void WorkerPool::submit(std::function<void()> task) {
    {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(task));
    }
    cv_.notify_one();
}

namespace {

struct HttpError {
    int status;
    std::string message;
};

int status_of(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::DuplicateHeader:
    case ErrorKind::RaggedRow:
    case ErrorKind::Parse: return 400;
    default: return 422;
    }
}

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const HttpError& e) {
            send(res, e.status, json{{"error", e.message}});
        } catch (const Error& e) {
            send(res, status_of(e.kind()), json{{"error", e.what()}, {"kind", to_string(e.kind())}});
        } catch (const json::exception& e) {
            send(res, 400, json{{"error", std::string("malformed request: ") + e.what()}});
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
        return j;
    } catch (const json::parse_error& e) {
        throw HttpError{400, std::string("malformed JSON: ") + e.what()};
    }
}

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string())
        throw HttpError{400, std::string("field '") + key + "' must be a string"};
    return body.at(key).get<std::string>();
}

std::vector<std::string> string_list(const json& body, const char* key) {
    if (!body.contains(key) || body.at(key).is_null()) return {};
    const auto& v = body.at(key);
    if (!v.is_array()) throw HttpError{400, std::string("field '") + key + "' must be an array of strings"};
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw HttpError{400, std::string("field '") + key + "' must be an array of strings"};
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::uint64_t seed_of(const json& body) {
    if (!body.contains("seed")) return kDefaultSeed;
    if (!body.at("seed").is_number_unsigned()) throw HttpError{400, "field 'seed' must be a non-negative integer"};
    return body.at("seed").get<std::uint64_t>();
}

json schema_json(const std::string& id, const Table& t) {
    json cols = json::array();
    for (const auto& c : t.columns()) {
        std::size_t n_missing = 0;
        for (auto m : c.missing_mask()) n_missing += m;
        json cj{{"name", c.name()}, {"kind", to_string(c.kind())}, {"n_missing", n_missing}};
        if (c.is_categorical()) cj["categories"] = c.categories();
        cols.push_back(std::move(cj));
    }
    return json{{"id", id}, {"name", t.name()}, {"n_rows", t.n_rows()}, {"columns", std::move(cols)}};
}

// The task's dataset with target and protected columns coded as categories,
// after the role checks that must fail synchronously.
struct Task {
    Table table;
    std::string target;
    std::vector<std::string> protected_attrs;
    std::vector<std::string> features;
};

Task prepare(const SessionStore& store, const json& body, bool features_required) {
    const auto ds = required_string(body, "dataset");
    auto table = store.dataset(ds);
    if (!table) throw HttpError{404, "unknown dataset '" + ds + "'"};
    Task task;
    task.target = required_string(body, "target");
    task.protected_attrs = string_list(body, "protected");
    task.features = string_list(body, "features");
    if (features_required && task.features.empty()) throw HttpError{422, "field 'features' must be non-empty"};
    std::vector<std::string> roles{task.target};
    roles.insert(roles.end(), task.protected_attrs.begin(), task.protected_attrs.end());
    for (const auto& r : roles) table->column(r);
    task.table = as_categorical(*table, roles);
    TaskSpec{task.target, task.protected_attrs, task.features, std::nullopt}.validate(task.table);
    return task;
}

std::vector<std::string> prediction_labels(const ProbMatrix& p, const std::vector<std::string>& classes) {
    std::vector<std::string> out;
    for (int c : p.argmax()) out.push_back(classes[static_cast<std::size_t>(c)]);
    return out;
}

double accuracy(const std::vector<std::string>& pred, const Table& t, const std::string& y) {
    const auto& col = t.column(y);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == col.label(i) ? 1 : 0;
    return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

Workbench::Workbench(const ServiceConfig& cfg) : store_(cfg.session_dir), pool_(cfg.workers) {}

std::string Workbench::submit(const std::string& kind, std::uint64_t seed, std::function<json()> work) {
    const auto id = store_.add_job(kind, seed);
    pool_.submit([this, id, work = std::move(work)] {
        store_.mark_running(id);
        try {
            store_.finish(id, work());
        } catch (const std::exception& e) {
            store_.fail(id, e.what());
        }
    });
    return id;
}

void Workbench::install(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"status", "ok"}}); });

    server.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
        Table table;
        if (req.get_header_value("Content-Type").find("application/json") != std::string::npos) {
            table = parse_body(req).get<Table>();
        } else {
            CsvSchema schema;
            if (req.has_param("categorical")) {
                std::stringstream ss(req.get_param_value("categorical"));
                for (std::string name; std::getline(ss, name, ',');)
                    if (!name.empty()) schema[name] = ColumnSchema{ColumnKind::Categorical, {}};
            }
            const auto name = req.has_param("name") ? req.get_param_value("name") : std::string("dataset");
            table = parse_csv(req.body, name, schema);
        }
        const auto id = store_.add_dataset(table);
        send(res, 201, schema_json(id, table));
    }));

    server.Get(R"(/datasets/([^/]+)/schema)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto id = req.matches[1].str();
        const auto table = store_.dataset(id);
        if (!table) throw HttpError{404, "unknown dataset '" + id + "'"};
        send(res, 200, schema_json(id, *table));
    }));

    server.Get(R"(/datasets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto id = req.matches[1].str();
        const auto table = store_.dataset(id);
        if (!table) throw HttpError{404, "unknown dataset '" + id + "'"};
        send(res, 200, json(*table));
    }));

    server.Post("/infogram", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        auto task = prepare(store_, body, false);
        auto cfg = body.contains("config") ? body.at("config").get<InfogramConfig>() : InfogramConfig{};
        const auto seed = seed_of(body);
        cfg.cmi_cfg.learner_params.seed = seed;
        std::string mode = body.value("mode", task.protected_attrs.empty() ? "core" : "fair");
        if (mode != "core" && mode != "fair") throw HttpError{422, "mode must be 'core' or 'fair'"};
        if (mode == "fair" && task.protected_attrs.empty())
            throw HttpError{422, "fair mode needs protected attributes"};
        const auto id = submit("infogram", seed, [task = std::move(task), cfg, mode, seed] {
            TaskSpec spec{task.target, task.protected_attrs, task.features, std::nullopt};
            const auto ig = mode == "fair" ? fair_infogram(task.table, spec, cfg) : core_infogram(task.table, spec, cfg);
            json out = ig;
            out["admissible_set"] = select_admissible(ig);
            out["seed"] = seed;
            return out;
        });
        send(res, 202, json{{"job", id}});
    }));

    server.Post("/alfa", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        auto task = prepare(store_, body, false);
        if (task.protected_attrs.empty()) throw HttpError{422, "field 'protected' must be non-empty"};
        const auto admissible = string_list(body, "admissible");
        TaskSpec{task.target, task.protected_attrs, admissible, std::nullopt}.validate(task.table);
        const int B = body.value("B", 200);
        if (B < 19) throw HttpError{422, "B must be at least 19"};
        auto cfg = body.contains("config") ? body.at("config").get<CmiConfig>() : CmiConfig{};
        const auto seed = seed_of(body);
        cfg.learner_params.seed = seed;
        const auto id = submit("alfa", seed, [task = std::move(task), admissible, cfg, B, seed] {
            json out = alfa_test(task.table, task.target, task.protected_attrs, admissible, cfg, B, seed);
            out["seed"] = seed;
            return out;
        });
        send(res, 202, json{{"job", id}});
    }));

    server.Post("/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        auto task = prepare(store_, body, true);
        const auto kind = required_string(body, "kind");
        if (kind != "tree" && kind != "glm" && kind != "lasso")
            throw HttpError{422, "kind must be one of tree, glm, lasso"};
        if (kind == "lasso" && task.protected_attrs.empty())
            throw HttpError{422, "lasso models need protected attributes"};
        const auto admissible = string_list(body, "admissible");
        if (!task.protected_attrs.empty())
            TaskSpec{task.target, task.protected_attrs, admissible, std::nullopt}.validate(task.table);
        const auto params = body.value("params", json::object());
        const int B = body.value("B", 100);
        if (B < 19) throw HttpError{422, "B must be at least 19"};
        const auto seed = seed_of(body);
        CmiConfig cfg = body.contains("config") ? body.at("config").get<CmiConfig>() : CmiConfig{};
        cfg.learner_params.seed = seed;
        TreeParams tree_params;
        if (kind == "tree") tree_params = params.get<TreeParams>();
        tree_params.seed = seed;

        const auto id = submit("model", seed, [=, task = std::move(task)] {
            const auto [train, test] = train_test_split(task.table, 0.2, seed);
            std::optional<std::string> positive;
            if (params.contains("positive")) positive = params.at("positive").get<std::string>();
            json model;
            std::function<ProbMatrix(const Table&)> predict;
            std::vector<std::string> classes;
            if (kind == "tree") {
                auto m = fit_tree(train, task.target, task.features, tree_params);
                model = m;
                classes = m.classes;
                predict = [m](const Table& t) { return predict_tree(m, t); };
            } else {
                GlmModel m;
                if (kind == "glm")
                    m = params.value("aic", false) ? aic_backward_select(train, task.target, task.features, positive)
                                                   : fit_logistic(train, task.target, task.features, positive);
                else
                    m = fit_fine_lasso(train, task.target, task.features, task.protected_attrs,
                                       params.value("lambda", 1.0), cfg, positive);
                model = m;
                classes = m.classes;
                predict = [m](const Table& t) { return predict_glm(m, t); };
            }
            json out{{"kind", kind}, {"features", task.features}, {"model", model}, {"seed", seed},
                     {"n_train", train.n_rows()}, {"n_test", test.n_rows()}};
            out["train_accuracy"] = accuracy(prediction_labels(predict(train), classes), train, task.target);
            out["test_accuracy"] = accuracy(prediction_labels(predict(test), classes), test, task.target);
            if (!task.protected_attrs.empty()) {
                std::string yhat = "__prediction";
                while (task.table.has(yhat)) yhat += "_";
                const auto labels = prediction_labels(predict(task.table), classes);
                const auto augmented = task.table.with_column(Column::from_labels(yhat, labels));
                json alfa = alfa_test(augmented, yhat, task.protected_attrs, admissible, cfg, B, seed);
                out["alfa"] = std::move(alfa);
            }
            return out;
        });
        send(res, 202, json{{"job", id}});
    }));

    server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto job = store_.job(req.matches[1].str());
        if (!job) throw HttpError{404, "unknown job '" + req.matches[1].str() + "'"};
        send(res, 200, job_json(*job));
    }));

    server.Get(R"(/results/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto job = store_.job(req.matches[1].str());
        if (!job) throw HttpError{404, "unknown job '" + req.matches[1].str() + "'"};
        if (job->state == JobState::Failed) {
            send(res, 422, job_json(*job));
            return;
        }
        if (job->state != JobState::Done) {
            send(res, 409, json{{"error", "job not finished"}, {"state", to_string(job->state)}});
            return;
        }
        send(res, 200, job->result);
    }));
}

int serve(const ServiceConfig& cfg) {
    Workbench bench(cfg);
    httplib::Server server;
    bench.install(server);
    if (!server.bind_to_port(cfg.host, cfg.port)) return 1;
    return server.listen_after_bind() ? 0 : 1;
}

}  // namespace admissible::service

#include "service.hpp"

#include <CLI11.hpp>
#include <iostream>

int main(int argc, char** argv) {
    admissible::service::ServiceConfig cfg;
    CLI::App app{"Admissible-ML workbench HTTP service", "admissible-serve"};
    app.add_option("--port", cfg.port, "Listen port (default 7979)");
    app.add_option("--host", cfg.host, "Bind address (default 127.0.0.1)");
    app.add_option("--workers", cfg.workers, "Compute worker threads shared by all jobs");
    app.add_option("--session-dir", cfg.session_dir, "Persist datasets and results as JSON here");
    CLI11_PARSE(app, argc, argv);
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
    const int rc = admissible::service::serve(cfg);
    if (rc != 0) std::cerr << "cannot bind " << cfg.host << ":" << cfg.port << "\n";
    return rc;
}

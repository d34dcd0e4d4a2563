#include "cli.hpp"

#include "admissible/error.hpp"
#include "admissible/fairness.hpp"
#include "admissible/glm.hpp"
#include "admissible/infogram.hpp"
#include "admissible/infotheory.hpp"
#include "admissible/parallel.hpp"
#include "admissible/svg.hpp"
#include "admissible/table.hpp"
#include "admissible/tree.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>

namespace admissible::cli {

using nlohmann::json;

namespace {

struct Options {
    std::string data;
    std::string target;
    std::string out;
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 0;
    std::vector<std::string> categorical;

    // role lists
    std::vector<std::string> protected_attrs, features, admissible, x, given;

    // infogram
    double threshold_x = 0.1, threshold_y = 0.1;
    int top_k = 50;
    std::string svg;

    // learner / tests
    int rounds = 100;
    int bootstrap = 0;
    int cross_fit = 0;

    // metrics
    std::string favorable, group, stratum, reference;

    // models
    int max_depth = 4, min_leaf = 20;
    double lambda = 0.0;
    std::string positive;
    bool aic = false;
    double test_fraction = 0.0;

    // split
    std::string train_out, test_out;
};

void add_common(CLI::App* sub, Options& o, bool needs_target = true) {
    sub->add_option("--data", o.data, "Input CSV file (header row required)")->required();
    if (needs_target) sub->add_option("--target", o.target, "Response column")->required();
    sub->add_option("--out", o.out, "Write JSON here instead of stdout");
    sub->add_option("--seed", o.seed, "Random seed (default " + std::to_string(kDefaultSeed) + ")");
    sub->add_option("--threads", o.threads, "Worker cap (fallback: ADMISSIBLE_ML_THREADS)");
    sub->add_option("--categorical", o.categorical, "Force these columns to be categorical")->delimiter(',');
}

void add_learner(CLI::App* sub, Options& o) {
    sub->add_option("--rounds", o.rounds, "Boosting rounds of the plug-in learner")->check(CLI::NonNegativeNumber);
    sub->add_option("--cross-fit", o.cross_fit, "Out-of-fold probabilities with K folds (0 = in-sample)");
}

CmiConfig cmi_config(const Options& o) {
    CmiConfig cfg;
    cfg.learner_params.n_rounds = o.rounds;
    cfg.learner_params.seed = o.seed;
    cfg.cross_fit_folds = o.cross_fit;
    cfg.validate();
    return cfg;
}

Table load(const Options& o, std::initializer_list<const std::vector<std::string>*> role_lists,
           std::initializer_list<const std::string*> role_columns) {
    CsvSchema schema;
    auto force = [&](const std::string& name) {
        if (!name.empty()) schema[name] = ColumnSchema{ColumnKind::Categorical, {}};
    };
    for (const auto& c : o.categorical) force(c);
    for (const auto* list : role_lists)
        for (const auto& c : *list) force(c);
    for (const auto* c : role_columns) force(*c);
    return load_csv(o.data, schema);
}

void emit(const Options& o, const json& doc, std::ostream& out) {
    const auto text = doc.dump(2) + "\n";
    if (o.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write '" + o.out + "'");
    f << text;
    if (!f) throw Error(ErrorKind::Io, "error writing '" + o.out + "'");
}

double accuracy(const ProbMatrix& p, const Table& table, const std::string& y,
                const std::vector<std::string>& classes) {
    const auto truth = encode_target_as(table, y, classes);
    const auto pred = p.argmax();
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
    return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

json cmd_infogram(const Options& o) {
    const auto table = load(o, {&o.protected_attrs}, {&o.target});
    InfogramConfig cfg;
    cfg.threshold_x = o.threshold_x;
    cfg.threshold_y = o.threshold_y;
    cfg.top_k_prescreen = o.top_k;
    cfg.cmi_cfg = cmi_config(o);
    TaskSpec spec{o.target, o.protected_attrs, o.features, std::nullopt};
    const auto ig = o.protected_attrs.empty() ? core_infogram(table, spec, cfg) : fair_infogram(table, spec, cfg);
    if (!o.svg.empty()) {
        std::ofstream f(o.svg, std::ios::binary);
        if (!f) throw Error(ErrorKind::Io, "cannot write '" + o.svg + "'");
        f << infogram_svg(ig);
    }
    json doc = ig;
    doc["admissible_set"] = select_admissible(ig);
    return doc;
}

json cmd_cmi(const Options& o) {
    const auto table = load(o, {}, {&o.target});
    const auto cfg = cmi_config(o);
    const auto est = o.bootstrap > 0 ? cmi_pvalue(table, o.target, o.x, o.given, cfg, o.bootstrap, o.seed)
                                     : estimate_cmi(table, o.target, o.x, o.given, cfg);
    json doc = est;
    doc["x"] = o.x;
    doc["given"] = o.given;
    doc["seed"] = o.seed;
    return doc;
}

json cmd_alfa(const Options& o) {
    const auto table = load(o, {&o.protected_attrs}, {&o.target});
    const auto report = alfa_test(table, o.target, o.protected_attrs, o.admissible, cmi_config(o), o.bootstrap, o.seed);
    json doc = report;
    doc["seed"] = o.seed;
    return doc;
}

json cmd_metrics(const Options& o) {
    const auto table = load(o, {}, {&o.target, &o.group, &o.stratum});
    std::optional<std::string> ref;
    if (!o.reference.empty()) ref = o.reference;
    json doc = air(table, o.target, o.favorable, o.group, ref);
    if (!o.stratum.empty()) {
        const auto c = cair(table, o.target, o.favorable, o.group, o.stratum);
        doc["cair"] = c.value;
        doc["strata"] = json(c)["strata"];
    }
    return doc;
}

// Fits on the training part (everything when test_fraction is 0) and reports accuracy.
template <typename Fit, typename Predict>
json train_and_score(const Options& o, const Table& table, Fit fit, Predict predict) {
    Table train = table, test;
    if (o.test_fraction > 0.0) std::tie(train, test) = train_test_split(table, o.test_fraction, o.seed);
    const auto model = fit(train);
    json doc{{"model", model}, {"seed", o.seed}};
    doc["train_accuracy"] = accuracy(predict(model, train), train, o.target, model.classes);
    if (o.test_fraction > 0.0) doc["test_accuracy"] = accuracy(predict(model, test), test, o.target, model.classes);
    return doc;
}

std::optional<std::string> positive_of(const Options& o) {
    if (o.positive.empty()) return std::nullopt;
    return o.positive;
}

json cmd_train_tree(const Options& o) {
    const auto table = load(o, {}, {&o.target});
    TreeParams params;
    params.max_depth = o.max_depth;
    params.min_leaf = o.min_leaf;
    params.seed = o.seed;
    return train_and_score(
        o, table, [&](const Table& t) { return fit_tree(t, o.target, o.features, params); },
        [](const TreeModel& m, const Table& t) { return predict_tree(m, t); });
}

json cmd_train_glm(const Options& o) {
    const auto table = load(o, {}, {&o.target});
    const auto pos = positive_of(o);
    return train_and_score(
        o, table,
        [&](const Table& t) {
            return o.aic ? aic_backward_select(t, o.target, o.features, pos) : fit_logistic(t, o.target, o.features, pos);
        },
        [](const GlmModel& m, const Table& t) { return predict_glm(m, t); });
}

json cmd_train_lasso(const Options& o) {
    const auto table = load(o, {&o.protected_attrs}, {&o.target});
    const auto pos = positive_of(o);
    const auto cfg = cmi_config(o);
    return train_and_score(
        o, table,
        [&](const Table& t) { return fit_fine_lasso(t, o.target, o.features, o.protected_attrs, o.lambda, cfg, pos); },
        [](const GlmModel& m, const Table& t) { return predict_glm(m, t); });
}

json cmd_split(const Options& o) {
    const auto table = load(o, {}, {});
    const auto [train, test] = train_test_split(table, o.test_fraction, o.seed);
    write_csv(train, o.train_out);
    write_csv(test, o.test_out);
    return json{{"train", {{"path", o.train_out}, {"n_rows", train.n_rows()}}},
                {"test", {{"path", o.test_out}, {"n_rows", test.n_rows()}}},
                {"seed", o.seed}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Admissible-ML audit tool: conditional mutual information, infograms, "
                 "ALFA fairness tests and FINE models from CSV data.",
                 "admissible-audit"};
    app.require_subcommand(1);

    auto* infogram = app.add_subcommand("infogram", "Core infogram, or fairness infogram when --protected is given");
    add_common(infogram, o);
    add_learner(infogram, o);
    infogram->add_option("--protected", o.protected_attrs, "Protected attributes (comma separated)")->delimiter(',');
    infogram->add_option("--features", o.features, "Candidate features (default: all other columns)")->delimiter(',');
    infogram->add_option("--threshold-x", o.threshold_x, "Relevance threshold of the L-zone");
    infogram->add_option("--threshold-y", o.threshold_y, "Net-information threshold of the L-zone");
    infogram->add_option("--top-k", o.top_k, "Features kept by the relevance pre-screen");
    infogram->add_option("--svg", o.svg, "Also write a scatter plot with the shaded L-zone");

    auto* cmi = app.add_subcommand("cmi", "Estimate I(Y; X | given), optionally with a bootstrap test");
    add_common(cmi, o);
    add_learner(cmi, o);
    cmi->add_option("--x", o.x, "Columns of the X block")->delimiter(',')->required();
    cmi->add_option("--given", o.given, "Conditioning columns (may be empty)")->delimiter(',');
    cmi->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates for the p-value (0 = none)");

    auto* alfa = app.add_subcommand("alfa", "ALFA test alpha = I(Y; protected | admissible)");
    add_common(alfa, o);
    add_learner(alfa, o);
    alfa->add_option("--protected", o.protected_attrs, "Protected attributes")->delimiter(',')->required();
    alfa->add_option("--admissible", o.admissible, "Admissible features")->delimiter(',');
    o.bootstrap = 200;
    alfa->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates (default 200)");

    auto* metrics = app.add_subcommand("metrics", "Adverse impact ratio and conditional AIR");
    add_common(metrics, o);
    metrics->add_option("--favorable", o.favorable, "Favorable outcome label")->required();
    metrics->add_option("--group", o.group, "Group column")->required();
    metrics->add_option("--stratum", o.stratum, "Stratum column for CAIR");
    metrics->add_option("--reference", o.reference, "Reference group (default: highest rate)");

    auto* tree = app.add_subcommand("train-tree", "Fit a CART classification tree");
    add_common(tree, o);
    tree->add_option("--features", o.features, "Features to split on")->delimiter(',')->required();
    tree->add_option("--max-depth", o.max_depth, "Maximum depth (default 4)");
    tree->add_option("--min-leaf", o.min_leaf, "Minimum rows per leaf (default 20)");
    tree->add_option("--test-fraction", o.test_fraction, "Hold out this share for test accuracy");

    auto* glm = app.add_subcommand("train-glm", "Fit a logistic regression by IRLS");
    add_common(glm, o);
    glm->add_option("--features", o.features, "Features")->delimiter(',')->required();
    glm->add_option("--positive", o.positive, "Positive class label");
    glm->add_flag("--aic", o.aic, "Backward elimination on AIC");
    glm->add_option("--test-fraction", o.test_fraction, "Hold out this share for test accuracy");

    auto* lasso = app.add_subcommand("train-lasso", "Fit a lasso with penalty weights 1 / I(Y; X_j | protected)");
    add_common(lasso, o);
    add_learner(lasso, o);
    lasso->add_option("--features", o.features, "Features")->delimiter(',')->required();
    lasso->add_option("--protected", o.protected_attrs, "Protected attributes")->delimiter(',')->required();
    lasso->add_option("--lambda", o.lambda, "Penalty level (>= 0)");
    lasso->add_option("--positive", o.positive, "Positive class label");
    lasso->add_option("--test-fraction", o.test_fraction, "Hold out this share for test accuracy");

    auto* split = app.add_subcommand("split", "Seeded train/test split of a CSV file");
    add_common(split, o, false);
    split->add_option("--test-fraction", o.test_fraction, "Share of rows in the test part")->required();
    split->add_option("--train-out", o.train_out, "Train CSV path")->required();
    split->add_option("--test-out", o.test_out, "Test CSV path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n\n";
        auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << active->help();
        return 1;
    }

    try {
        if (o.threads > 0) set_max_threads(o.threads);
        json doc;
        if (infogram->parsed()) doc = cmd_infogram(o);
        else if (cmi->parsed()) doc = cmd_cmi(o);
        else if (alfa->parsed()) doc = cmd_alfa(o);
        else if (metrics->parsed()) doc = cmd_metrics(o);
        else if (tree->parsed()) doc = cmd_train_tree(o);
        else if (glm->parsed()) doc = cmd_train_glm(o);
        else if (lasso->parsed()) doc = cmd_train_lasso(o);
        else doc = cmd_split(o);
        emit(o, doc, out);
        return 0;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace admissible::cli

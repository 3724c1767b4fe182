// fastadv: command-line front end for adversarial example generation on
// tree ensembles.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O or format
// error, 3 internal error.

#include <fastadv/attack.hpp>
#include <fastadv/fixtures.hpp>
#include <fastadv/io.hpp>
#include <fastadv/pipeline.hpp>
#include <fastadv/select.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

using namespace fastadv;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kFormat = 2, kInternal = 3 };

// Rows of a dataset chosen for a run, with their original row indices.
struct Selection {
    std::vector<Example> examples;
    std::vector<std::size_t> rows;
};

Selection choose_rows(const std::vector<Example>& all, std::size_t limit, std::optional<std::uint64_t> seed)
{
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (seed) {
        std::mt19937_64 rng(*seed);
        std::shuffle(idx.begin(), idx.end(), rng);
    }
    if (limit > 0 && limit < idx.size())
        idx.resize(limit);
    Selection s;
    for (std::size_t i : idx)
        s.examples.push_back(all[i]);
    s.rows = std::move(idx);
    return s;
}

// Records are numbered by position in the attacked list; map them back to dataset rows.
void renumber(std::vector<AttackRecord>& recs, const std::vector<std::size_t>& rows)
{
    for (AttackRecord& r : recs)
        r.example_id = rows[r.example_id];
}

io::Dataset load_data(const std::string& path, const std::string& label_column, const Ensemble& model)
{
    io::Dataset ds = io::load_dataset(path, label_column);
    if (ds.mapped_zero_one)
        std::cerr << "note: labels 0/1 in " << path << " mapped to -1/+1\n";
    for (std::size_t i = 0; i < ds.examples.size(); ++i)
        if (ds.examples[i].size() != model.num_features())
            throw io::FormatError(path + ": row " + std::to_string(i + 1) + " has " +
                                  std::to_string(ds.examples[i].size()) + " features, the model expects " +
                                  std::to_string(model.num_features()));
    return ds;
}

std::vector<FeatureId> load_features(const std::string& path, const Ensemble& model)
{
    return io::load_subset(path, model.num_features()).subset.features;
}

std::string one_line(const RunSummary& s)
{
    std::string out = "records=" + std::to_string(s.records) + " attacked=" + std::to_string(s.attacked) +
                      " sat=" + std::to_string(s.sat) + " unsat=" + std::to_string(s.unsat) +
                      " timeout=" + std::to_string(s.timeouts) + " misclassified=" + std::to_string(s.misclassified) +
                      " skipped=" + std::to_string(s.skipped) + " full_calls=" + std::to_string(s.full_calls);
    if (s.fnr)
        out += " fnr=" + io::format_double(*s.fnr);
    out += " wall_s=" + io::format_double(s.total_wall_s);
    return out;
}

// Options shared by the commands that run attacks.
struct RunOptions {
    double delta = 0.0;
    std::string engine = "exact";
    double t_full = 60.0;
    std::optional<double> t_prun;
    double global_timeout = 21600.0;
    std::uint64_t node_budget = 0;
    unsigned threads = 1;

    void add_to(CLI::App* app, bool delta_required = true)
    {
        auto* d = app->add_option("--delta", delta, "L-infinity attack radius");
        if (delta_required)
            d->required();
        app->add_option("--engine", engine, "exact or heuristic")->check(CLI::IsMember({"exact", "heuristic"}));
        app->add_option("--timeout-full", t_full, "seconds per full attack");
        app->add_option("--timeout-pruned", t_prun, "seconds per pruned attack (1 exact, 0.1 heuristic)");
        app->add_option("--global-timeout", global_timeout, "seconds for the whole run");
        app->add_option("--node-budget", node_budget, "expansions per attack (0: unlimited)");
        app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }

    RunConfig config() const
    {
        RunConfig c;
        c.delta = delta;
        c.engine = parse_engine(engine);
        c.t_full = t_full;
        c.t_prun = t_prun ? *t_prun : default_pruned_timeout(c.engine);
        c.global_timeout = global_timeout;
        c.node_budget = node_budget;
        c.threads = threads;
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------

struct AttackCmd {
    std::string model, data, label = "label", setting = "full", features, out;
    std::size_t limit = 0;
    std::optional<std::uint64_t> seed;
    RunOptions run;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("attack", "generate adversarial examples for a dataset");
        c->add_option("--model", model, "model JSON")->required();
        c->add_option("--data", data, "dataset CSV")->required();
        c->add_option("--label-column", label, "label column name");
        c->add_option("--setting", setting, "full, pruned or mixed")
            ->check(CLI::IsMember({"full", "pruned", "mixed"}));
        c->add_option("--features", features, "subset JSON (pruned and mixed settings)");
        c->add_option("--limit", limit, "attack at most this many rows");
        c->add_option("--seed", seed, "shuffle rows with this seed before applying --limit");
        c->add_option("--out", out, "results JSONL")->required();
        run.add_to(c);
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        const Setting s = parse_setting(setting);
        if (s != Setting::full && features.empty())
            throw ConfigError("--features is required for the " + setting + " setting");
        const RunConfig cfg = run.config();
        const Ensemble e = io::load_ensemble(model);
        const io::Dataset ds = load_data(data, label, e);
        std::vector<FeatureId> fs;
        if (s != Setting::full)
            fs = load_features(features, e);
        Selection sel = choose_rows(ds.examples, limit, seed);
        std::cerr << "attacking " << sel.examples.size() << " examples (" << setting << ", " << run.engine
                  << ", delta " << cfg.delta << ")\n";
        std::vector<AttackRecord> recs = generate(e, sel.examples, fs, s, cfg);
        renumber(recs, sel.rows);
        io::write_file(out, io::dump_records(recs));
        std::cout << one_line(summarize(recs)) << "\n";
        return kOk;
    }

    int code = kOk;
};

struct SelectCmd {
    std::string model, data, label = "label", out;
    std::size_t n = 100;
    std::optional<std::size_t> population;
    double tau = 0.25, eta = 0.1, corrections = 4.0;
    std::uint64_t seed = 0;
    RunOptions run;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("select", "find the feature subset adversarial examples need");
        c->add_option("--model", model, "model JSON")->required();
        c->add_option("--data", data, "dataset CSV (the selection pool)")->required();
        c->add_option("--label-column", label, "label column name");
        c->add_option("--n", n, "examples per test round");
        c->add_option("--N", population, "population size the FNR refers to (default: dataset size)");
        c->add_option("--tau", tau, "acceptable false negative rate");
        c->add_option("--eta", eta, "confidence parameter");
        c->add_option("--corrections", corrections, "union-bound factor");
        c->add_option("--seed", seed, "pool shuffle seed");
        c->add_option("--out", out, "subset JSON")->required();
        run.add_to(c);
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        const RunConfig cfg = run.config();
        const Ensemble e = io::load_ensemble(model);
        const io::Dataset ds = load_data(data, label, e);
        StatTestConfig st{n, population.value_or(ds.examples.size()), tau, eta, corrections};
        const std::vector<Example> pool = shuffled(ds.examples, seed);
        std::cerr << "selecting features with n=" << n << " from " << pool.size() << " examples\n";
        SelectionReport rep = select_subset(e, pool, cfg, st);
        io::write_file(out, io::dump_subset(rep));
        std::cout << "features=" << rep.subset.size() << " fraction=" << io::format_double(rep.subset.fraction)
                  << " rounds=" << rep.rounds_used << " accepted=" << (rep.accepted ? "yes" : "no")
                  << " delta_margin=" << io::format_double(rep.delta_margin) << "\n";
        return kOk;
    }

    int code = kOk;
};

// Benchmark configuration: a JSON file, with command-line flags taking precedence.
struct BenchConfig {
    std::string model, data, label = "label", name, features, out_dir;
    double delta = 0.0;
    std::string engine = "exact";
    std::vector<std::string> settings{"full", "pruned", "mixed"};
    double t_full = 60.0;
    std::optional<double> t_prun;
    double global_timeout = 21600.0;
    std::uint64_t node_budget = 0;
    std::size_t n = 100;
    std::optional<std::size_t> population;
    double tau = 0.25, eta = 0.1, corrections = 4.0;
    std::uint64_t seed = 0;
    std::size_t limit = 0;
    unsigned threads = 1;

    void read(const std::string& path)
    {
        json j;
        try {
            j = json::parse(io::read_file(path));
        } catch (const json::exception& e) {
            throw io::FormatError(path + ": " + e.what());
        }
        if (!j.is_object())
            throw io::FormatError(path + ": expected a JSON object");
        static const std::vector<std::string> known = {
            "model", "data", "label_column", "name", "features", "out_dir", "delta", "engine", "settings",
            "t_full", "t_prun", "global_timeout", "node_budget", "n", "N", "tau", "eta", "corrections",
            "seed", "limit", "threads"};
        for (const auto& [k, v] : j.items())
            if (std::find(known.begin(), known.end(), k) == known.end())
                throw ConfigError(path + ": unknown key '" + k + "'");
        try {
            auto get = [&](const char* k, auto& dst) {
                if (j.contains(k))
                    dst = j[k].get<std::decay_t<decltype(dst)>>();
            };
            get("model", model);
            get("data", data);
            get("label_column", label);
            get("name", name);
            get("features", features);
            get("out_dir", out_dir);
            get("delta", delta);
            get("engine", engine);
            get("settings", settings);
            get("t_full", t_full);
            if (j.contains("t_prun"))
                t_prun = j["t_prun"].get<double>();
            get("global_timeout", global_timeout);
            get("node_budget", node_budget);
            get("n", n);
            if (j.contains("N"))
                population = j["N"].get<std::size_t>();
            get("tau", tau);
            get("eta", eta);
            get("corrections", corrections);
            get("seed", seed);
            get("limit", limit);
            get("threads", threads);
        } catch (const json::exception& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }

    void validate() const
    {
        if (model.empty() || data.empty() || out_dir.empty())
            throw ConfigError("bench needs model, data and out_dir (in the config or as flags)");
        if (settings.empty())
            throw ConfigError("bench needs at least one setting");
        for (const std::string& s : settings)
            (void)parse_setting(s);
        (void)parse_engine(engine);
    }
};

struct BenchCmd {
    std::string config_path;
    BenchConfig flags;
    CLI::App* app = nullptr;

    void setup(CLI::App& root)
    {
        app = root.add_subcommand("bench", "select features, then run and compare the settings");
        app->add_option("--config", config_path, "benchmark configuration JSON");
        app->add_option("--model", flags.model, "model JSON");
        app->add_option("--data", flags.data, "dataset CSV");
        app->add_option("--label-column", flags.label, "label column name");
        app->add_option("--name", flags.name, "dataset name for the summary");
        app->add_option("--features", flags.features, "subset JSON (skips selection)");
        app->add_option("--out-dir", flags.out_dir, "output directory");
        app->add_option("--delta", flags.delta, "L-infinity attack radius");
        app->add_option("--engine", flags.engine, "exact or heuristic")
            ->check(CLI::IsMember({"exact", "heuristic"}));
        app->add_option("--settings", flags.settings, "settings to run")->delimiter(',');
        app->add_option("--timeout-full", flags.t_full, "seconds per full attack");
        app->add_option("--timeout-pruned", flags.t_prun, "seconds per pruned attack");
        app->add_option("--global-timeout", flags.global_timeout, "seconds per setting");
        app->add_option("--node-budget", flags.node_budget, "expansions per attack (0: unlimited)");
        app->add_option("--n", flags.n, "examples per test round");
        app->add_option("--N", flags.population, "population size the FNR refers to");
        app->add_option("--tau", flags.tau, "acceptable false negative rate");
        app->add_option("--eta", flags.eta, "confidence parameter");
        app->add_option("--corrections", flags.corrections, "union-bound factor");
        app->add_option("--seed", flags.seed, "shuffle seed");
        app->add_option("--limit", flags.limit, "evaluate at most this many examples");
        app->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
        app->callback([this] { code = exec(); });
    }

    BenchConfig merged() const
    {
        BenchConfig c;
        if (!config_path.empty())
            c.read(config_path);
        auto given = [&](const char* name) { return app->get_option(name)->count() > 0; };
        if (given("--model")) c.model = flags.model;
        if (given("--data")) c.data = flags.data;
        if (given("--label-column")) c.label = flags.label;
        if (given("--name")) c.name = flags.name;
        if (given("--features")) c.features = flags.features;
        if (given("--out-dir")) c.out_dir = flags.out_dir;
        if (given("--delta")) c.delta = flags.delta;
        if (given("--engine")) c.engine = flags.engine;
        if (given("--settings")) c.settings = flags.settings;
        if (given("--timeout-full")) c.t_full = flags.t_full;
        if (given("--timeout-pruned")) c.t_prun = flags.t_prun;
        if (given("--global-timeout")) c.global_timeout = flags.global_timeout;
        if (given("--node-budget")) c.node_budget = flags.node_budget;
        if (given("--n")) c.n = flags.n;
        if (given("--N")) c.population = flags.population;
        if (given("--tau")) c.tau = flags.tau;
        if (given("--eta")) c.eta = flags.eta;
        if (given("--corrections")) c.corrections = flags.corrections;
        if (given("--seed")) c.seed = flags.seed;
        if (given("--limit")) c.limit = flags.limit;
        if (given("--threads")) c.threads = flags.threads;
        return c;
    }

    int exec()
    {
        const BenchConfig c = merged();
        c.validate();
        RunConfig cfg;
        cfg.delta = c.delta;
        cfg.engine = parse_engine(c.engine);
        cfg.t_full = c.t_full;
        cfg.t_prun = c.t_prun ? *c.t_prun : default_pruned_timeout(cfg.engine);
        cfg.global_timeout = c.global_timeout;
        cfg.node_budget = c.node_budget;
        cfg.threads = c.threads;
        cfg.validate();

        const Ensemble e = io::load_ensemble(c.model);
        const io::Dataset ds = load_data(c.data, c.label, e);
        std::filesystem::create_directories(c.out_dir);
        const std::string dir = c.out_dir + "/";

        std::vector<std::size_t> order(ds.examples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(c.seed);
        std::shuffle(order.begin(), order.end(), rng);

        const bool needs_subset = std::any_of(c.settings.begin(), c.settings.end(),
                                              [](const std::string& s) { return s != "full"; });
        std::vector<FeatureId> fs;
        std::size_t eval_from = 0;
        if (needs_subset) {
            if (!c.features.empty()) {
                fs = load_features(c.features, e);
            } else {
                const std::size_t pool_size = 5 * c.n;
                if (order.size() <= pool_size)
                    throw ConfigError("bench needs more than " + std::to_string(pool_size) +
                                      " examples to select features and evaluate, the dataset has " +
                                      std::to_string(order.size()));
                std::vector<Example> pool;
                for (std::size_t i = 0; i < pool_size; ++i)
                    pool.push_back(ds.examples[order[i]]);
                StatTestConfig st{c.n, c.population.value_or(ds.examples.size()), c.tau, c.eta, c.corrections};
                std::cerr << "selecting features on " << pool_size << " examples\n";
                SelectionReport rep = select_subset(e, pool, cfg, st);
                io::write_file(dir + "subset.json", io::dump_subset(rep));
                fs = rep.subset.features;
                eval_from = pool_size;
                std::cerr << "selected " << fs.size() << " features (" << rep.rounds_used << " rounds)\n";
            }
        }

        std::vector<Example> eval;
        std::vector<std::size_t> rows;
        for (std::size_t i = eval_from; i < order.size(); ++i) {
            if (c.limit > 0 && eval.size() >= c.limit)
                break;
            eval.push_back(ds.examples[order[i]]);
            rows.push_back(order[i]);
        }

        std::map<std::string, std::vector<AttackRecord>> runs;
        for (const std::string& name : c.settings) {
            std::cerr << "running " << name << " on " << eval.size() << " examples\n";
            std::vector<AttackRecord> recs = generate(e, eval, fs, parse_setting(name), cfg);
            renumber(recs, rows);
            io::write_file(dir + name + ".jsonl", io::dump_records(recs));
            runs[name] = std::move(recs);
        }

        std::vector<io::SummaryRow> table;
        const std::vector<AttackRecord>* full = runs.count("full") ? &runs["full"] : nullptr;
        for (const std::string& name : c.settings) {
            const auto& recs = runs[name];
            std::optional<std::span<const AttackRecord>> ref;
            if (full && name != "full")
                ref = std::span<const AttackRecord>(*full);
            RunSummary s = summarize(recs, ref);
            if (name == "pruned" && full) {
                const auto both = pair_records(recs, *full);
                s.fnr = false_negative_rate(both);
                s.false_negatives = static_cast<std::size_t>(
                    std::count_if(both.begin(), both.end(), [](const AttackRecord& r) { return is_false_negative(r); }));
            }
            std::optional<std::size_t> size;
            if (name != "full")
                size = fs.size();
            table.push_back({c.name.empty() ? std::filesystem::path(c.data).stem().string() : c.name, name, c.engine,
                             size, s});
            std::cout << name << ": " << one_line(s);
            if (s.speedup)
                std::cout << " speedup=" << io::format_double(*s.speedup);
            std::cout << "\n";
        }
        io::write_file(dir + "summary.csv", io::dump_summary(table));
        return kOk;
    }

    int code = kOk;
};

struct RobustnessCmd {
    std::string model, data, label = "label", setting = "full", features, out;
    std::size_t limit = 0;
    std::optional<std::uint64_t> seed;
    RunOptions run;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("robustness", "distance to the nearest adversarial example");
        c->add_option("--model", model, "model JSON")->required();
        c->add_option("--data", data, "dataset CSV")->required();
        c->add_option("--label-column", label, "label column name");
        c->add_option("--setting", setting, "full, pruned or mixed")
            ->check(CLI::IsMember({"full", "pruned", "mixed"}));
        c->add_option("--features", features, "subset JSON (pruned and mixed settings)");
        c->add_option("--limit", limit, "at most this many rows");
        c->add_option("--seed", seed, "shuffle rows with this seed before applying --limit");
        c->add_option("--out", out, "robustness CSV")->required();
        run.add_to(c, false);
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        const Setting s = parse_setting(setting);
        if (s != Setting::full && features.empty())
            throw ConfigError("--features is required for the " + setting + " setting");
        RunOptions r = run;
        if (r.delta <= 0.0)
            r.delta = 1.0; // unused by the robustness search
        const RunConfig cfg = r.config();
        const Ensemble e = io::load_ensemble(model);
        const io::Dataset ds = load_data(data, label, e);
        std::vector<FeatureId> fs;
        if (s != Setting::full)
            fs = load_features(features, e);
        Selection sel = choose_rows(ds.examples, limit, seed);
        std::cerr << "measuring robustness of " << sel.examples.size() << " examples (" << setting << ")\n";
        std::vector<RobustnessRecord> recs = empirical_robustness(e, sel.examples, fs, s, cfg);
        for (RobustnessRecord& rec : recs)
            rec.example_id = sel.rows[rec.example_id];
        io::write_file(out, io::dump_robustness(recs));
        const auto mean = mean_robustness(recs);
        std::cout << "examples=" << recs.size() << " mean_delta_star=" << (mean ? io::format_double(*mean) : "")
                  << "\n";
        return kOk;
    }

    int code = kOk;
};

struct HistogramCmd {
    std::string records, data, label = "label", out;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("histogram", "how often adversarial examples change each feature");
        c->add_option("--records", records, "results JSONL from attack or bench")->required();
        c->add_option("--data", data, "the dataset the records refer to")->required();
        c->add_option("--label-column", label, "label column name");
        c->add_option("--out", out, "histogram CSV")->required();
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        const std::vector<AttackRecord> recs = io::load_records(records);
        const io::Dataset ds = io::load_dataset(data, label);
        if (ds.examples.empty())
            throw io::FormatError(data + ": no examples");
        const std::size_t d = ds.examples.front().size();
        std::vector<ExamplePair> pairs;
        for (const AttackRecord& r : recs) {
            if (r.status != RecordStatus::attacked || !r.final_outcome.is_sat())
                continue;
            if (r.example_id >= ds.examples.size() || !r.final_outcome.witness ||
                r.final_outcome.witness->size() != d)
                throw io::FormatError(records + ": record " + std::to_string(r.example_id) +
                                      " does not match " + data);
            pairs.emplace_back(ds.examples[r.example_id], *r.final_outcome.witness);
        }
        const Histogram h = perturbation_histogram(pairs, pairs.size(), d);
        io::write_file(out, io::dump_histogram(h, pairs.size()));
        std::cout << "adversarial=" << pairs.size() << " never=" << h.never << " at_most_5pct=" << h.rare
                  << " over_5pct=" << h.frequent << "\n";
        return kOk;
    }

    int code = kOk;
};

struct GenCmd {
    std::string kind = "random", out, data_out, meta_out;
    std::size_t trees = 20, depth = 5, features = 100, informative = 3, noise_trees = 0, noise_depth = 3;
    std::size_t examples = 0;
    double leaf_scale = 1.0, noise_scale = 0.01, lo = 0.0, hi = 1.0;
    std::uint64_t seed = 0;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("gen", "generate a synthetic model and optionally a dataset");
        c->add_option("--kind", kind, "random, sparse, parity or two-stumps")
            ->check(CLI::IsMember({"random", "sparse", "parity", "two-stumps"}));
        c->add_option("--trees", trees, "number of trees");
        c->add_option("--depth", depth, "tree depth");
        c->add_option("--features", features, "number of features");
        c->add_option("--leaf-scale", leaf_scale, "leaf values are uniform in [-scale, scale]");
        c->add_option("--informative", informative, "informative features (sparse)");
        c->add_option("--noise-trees", noise_trees, "small trees over the other features (sparse)");
        c->add_option("--noise-depth", noise_depth, "depth of the noise trees (sparse)");
        c->add_option("--noise-scale", noise_scale, "leaf scale of the noise trees (sparse)");
        c->add_option("--seed", seed, "random seed");
        c->add_option("--out", out, "model JSON")->required();
        c->add_option("--data-out", data_out, "also write a dataset CSV labelled by the model");
        c->add_option("--examples", examples, "rows in the dataset");
        c->add_option("--lo", lo, "feature values are uniform in [lo, hi)");
        c->add_option("--hi", hi, "feature values are uniform in [lo, hi)");
        c->add_option("--meta-out", meta_out, "JSON with the informative features (sparse)");
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        if (!data_out.empty() && examples == 0)
            throw ConfigError("--data-out needs --examples");
        if (!(lo < hi))
            throw ConfigError("--lo must be below --hi");
        Ensemble e;
        std::vector<FeatureId> inf;
        if (kind == "random") {
            e = random_ensemble({trees, depth, features, leaf_scale, seed, {}});
        } else if (kind == "sparse") {
            if (informative == 0 || informative > features)
                throw ConfigError("--informative must lie in [1, features]");
            fixtures::SparseFixtureParams p{features, informative, trees, depth, leaf_scale,
                                            noise_trees, noise_depth, noise_scale, seed};
            auto fx = fixtures::sparse_fixture(p);
            e = std::move(fx.model);
            inf = std::move(fx.informative);
        } else if (kind == "parity") {
            e = fixtures::parity_ensemble(features);
        } else {
            e = fixtures::two_stumps();
        }
        io::save_ensemble(e, out);
        if (!data_out.empty())
            io::save_dataset(fixtures::random_examples(e, examples, seed + 1, lo, hi), e.num_features(), data_out);
        if (!meta_out.empty())
            io::write_file(meta_out, json{{"format_version", io::kFormatVersion}, {"informative", inf}}.dump() + "\n");
        std::cout << "trees=" << e.size() << " nodes=" << e.num_nodes() << " features=" << e.num_features() << "\n";
        return kOk;
    }

    int code = kOk;
};

struct ImportCmd {
    std::string dump, out;
    std::size_t features = 0;
    double base_score = 0.5;
    bool random_forest = false;

    void setup(CLI::App& root)
    {
        CLI::App* c = root.add_subcommand("import", "convert an XGBoost JSON dump");
        c->add_option("--dump", dump, "XGBoost per-tree JSON dump")->required();
        c->add_option("--num-features", features, "number of features (default: inferred)");
        c->add_option("--base-score", base_score, "base score as a probability");
        c->add_flag("--random-forest", random_forest, "leaves are class probabilities of a random forest");
        c->add_option("--out", out, "model JSON")->required();
        c->callback([this] { code = exec(); });
    }

    int exec()
    {
        io::XgboostImportOptions opt;
        opt.num_features = features;
        opt.base_score = base_score;
        opt.random_forest = random_forest;
        io::XgboostImportResult r = io::import_xgboost_dump(dump, opt);
        for (const std::string& w : r.warnings)
            std::cerr << "warning: " << w << "\n";
        io::save_ensemble(r.model, out);
        std::cout << "trees=" << r.model.size() << " features=" << r.model.num_features() << "\n";
        return kOk;
    }

    int code = kOk;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adversarial examples for tree ensembles"};
    app.require_subcommand(1);
    AttackCmd attack;
    SelectCmd select;
    BenchCmd bench;
    RobustnessCmd robustness;
    HistogramCmd histogram;
    GenCmd gen;
    ImportCmd import;
    attack.setup(app);
    select.setup(app);
    bench.setup(app);
    robustness.setup(app);
    histogram.setup(app);
    gen.setup(app);
    import.setup(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const io::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFormat;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFormat;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFormat;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    for (int c : {attack.code, select.code, bench.code, robustness.code, histogram.code, gen.code, import.code})
        if (c != kOk)
            return c;
    return kOk;
}

// lpdecomp: rule decomposition, feature extraction, labeling, training and
// grounding from the command line.

#include "lpdecomp/labeling.hpp"
#include "lpdecomp/mlp.hpp"
#include "lpdecomp/parser.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace lpdecomp;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot read " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Program read_program(const std::string& path, bool allow_reserved = false) {
    ParseOptions opts;
    opts.allow_reserved = allow_reserved;
    return parse_program(read_file(path), opts);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os)
        throw IoError("cannot write " + path);
}

SafetyMode parse_safety(const std::string& s) { return s == "inline" ? SafetyMode::Inline : SafetyMode::Auxiliary; }

const std::vector<std::string>& class_names() {
    static const std::vector<std::string> names{"decomp", "do-not-decomp", "indifferent"};
    return names;
}

/// Features of a rule within its program, along the rule's preferred decomposition.
std::optional<FeatureVector> rule_features(const Rule& r, const Program& p, const RewriteOptions& ropts,
                                           const FeatureOptions& fopts = {}) {
    if (r.head.empty())
        return std::nullopt;
    auto names = FreshNames::after(p);
    auto rd = decompose_preferred(r, names, ropts);
    return extract_features(r, p, rd, fopts);
}

void echo_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cerr << "config: " << command;
    for (const auto& [k, v] : kv)
        std::cerr << ' ' << k << '=' << v;
    std::cerr << '\n';
}

// ---- rewrite ----

struct RewriteArgs {
    std::string input;
    std::string policy = "always";
    std::string model;
    std::string list;
    std::string safety = "aux";
    bool annotate_only = false;
    bool dump_decomp = false;
    std::uint64_t seed = 0;
};

/// `rule <n>: decompose|keep` lines, n counting rules from 1.
std::map<std::size_t, bool> read_decision_list(const std::string& path) {
    std::map<std::size_t, bool> out;
    std::istringstream is(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%' || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string word, index, decision;
        ls >> word >> index >> decision;
        if (word != "rule" || index.empty() || index.back() != ':' || (decision != "decompose" && decision != "keep"))
            throw DatasetFormatError(path + ":" + std::to_string(lineno) + ": expected 'rule <n>: decompose|keep'");
        out[std::stoul(index.substr(0, index.size() - 1))] = decision == "decompose";
    }
    return out;
}

int cmd_rewrite(const RewriteArgs& a) {
    echo_config("rewrite", {{"input", a.input},
                            {"policy", a.policy},
                            {"safety", a.safety},
                            {"annotate-only", a.annotate_only ? "true" : "false"},
                            {"seed", std::to_string(a.seed)}});
    Program p = read_program(a.input);
    RewriteOptions ropts;
    ropts.safety = parse_safety(a.safety);

    RewritePolicy policy;
    if (a.policy == "never") {
        policy = never_decompose();
    } else if (a.policy == "always") {
        policy = always_decompose();
    } else if (a.policy == "model") {
        if (a.model.empty())
            throw UsageError("--policy model needs --model");
        auto model = std::make_shared<MlpModel>(load_model(a.model));
        policy = [model, &p, ropts](const Rule& r, std::size_t) {
            auto f = rule_features(r, p, ropts);
            return f && predict(*model, f->as_array()).label == Label::Decomp;
        };
    } else if (a.policy == "list") {
        if (a.list.empty())
            throw UsageError("--policy list needs --list");
        auto decisions = read_decision_list(a.list);
        policy = [decisions](const Rule&, std::size_t i) {
            auto it = decisions.find(i + 1);
            return it != decisions.end() && it->second;
        };
    } else {
        throw UsageError("unknown policy '" + a.policy + "'");
    }

    if (a.annotate_only) {
        std::size_t i = 0;
        for (const auto* r : p.rules()) {
            bool d = policy(*r, i);
            std::cout << "rule " << ++i << ": " << (d ? "decompose" : "keep") << '\n';
        }
        return 0;
    }
    if (a.dump_decomp) {
        std::size_t i = 0;
        for (const auto* r : p.rules()) {
            ++i;
            auto h = build_hypergraph(*r);
            if (h.empty())
                continue;
            std::cerr << "% rule " << i << ": " << *r << '\n';
            dump(std::cerr, h);
            dump(std::cerr, select_decomposition(h));
        }
    }
    std::cout << rewrite_program(p, policy, ropts);
    return 0;
}

// ---- features ----

int cmd_features(const std::string& input, bool idb_after_rewrite, const std::string& safety, std::uint64_t seed) {
    echo_config("features", {{"input", input},
                             {"idb-after-rewrite", idb_after_rewrite ? "true" : "false"},
                             {"safety", safety},
                             {"seed", std::to_string(seed)}});
    Program p = read_program(input);
    RewriteOptions ropts;
    ropts.safety = parse_safety(safety);
    std::vector<FeatureRow> rows;
    for (const auto* r : p.rules()) {
        auto f = rule_features(*r, p, ropts, {idb_after_rewrite});
        if (!f)
            throw NoIdbError("rule at line " + std::to_string(r->line) + " is a constraint; features are undefined");
        rows.push_back(to_row(*f));
    }
    std::cout << features_csv(rows);
    return 0;
}

// ---- label ----

struct LabelArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string oracle = "internal";
    std::size_t jobs = 1;
    double timeout = 600;
    std::size_t reps = 3;
    std::string cost = "time";
    std::uint64_t work_budget = 20'000'000;
    std::string facts = "2:300";
    std::int64_t domain = 10;
    std::string safety = "aux";
    std::uint64_t seed = 0;
};

FactGenSpec parse_fact_spec(const std::string& s, std::int64_t domain) {
    FactGenSpec spec;
    spec.domain = domain;
    try {
        auto colon = s.find(':');
        spec.min_facts = std::stoul(s.substr(0, colon));
        spec.max_facts = colon == std::string::npos ? spec.min_facts : std::stoul(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("--facts expects N or MIN:MAX, got '" + s + "'");
    }
    if (spec.min_facts == 0 || spec.max_facts < spec.min_facts)
        throw UsageError("--facts range must satisfy 1 <= MIN <= MAX");
    if (domain < 1)
        throw UsageError("--domain must be positive");
    return spec;
}

std::vector<std::string> collect_inputs(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& e : fs::recursive_directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".lp")
                    found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(in)) {
            files.push_back(in);
        } else {
            throw IoError("no such file or directory: " + in);
        }
    }
    return files;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : "timeout"; }

int cmd_label(const LabelArgs& a) {
    auto spec = parse_fact_spec(a.facts, a.domain);
    std::unique_ptr<Oracle> oracle;
    if (a.oracle == "internal") {
        InternalOracle::Options o;
        if (a.cost == "work")
            o.cost = CostMode::Work;
        else if (a.cost != "time")
            throw UsageError("--cost must be time or work");
        o.reps = a.reps;
        o.timeout_seconds = a.timeout;
        if (o.cost == CostMode::Work)
            o.work_budget = a.work_budget;
        oracle = std::make_unique<InternalOracle>(o);
    } else if (a.oracle.rfind("exec:", 0) == 0) {
        oracle = std::make_unique<ExternalOracle>(a.oracle.substr(5), a.reps, a.timeout);
    } else {
        throw UsageError("--oracle must be internal or exec:<template>");
    }
    echo_config("label", {{"out", a.out},
                          {"oracle", oracle->identity()},
                          {"jobs", std::to_string(a.jobs)},
                          {"facts", a.facts},
                          {"domain", std::to_string(a.domain)},
                          {"safety", a.safety},
                          {"seed", std::to_string(a.seed)}});

    auto files = collect_inputs(a.inputs);
    std::vector<LabelJob> jobs;
    for (const auto& f : files) {
        Program p = read_program(f);
        for (const auto* r : p.rules())
            jobs.push_back({*r, f});
    }
    RewriteOptions ropts;
    ropts.safety = parse_safety(a.safety);
    auto records = label_all(jobs, spec, a.seed, *oracle, a.jobs, ropts);
    auto ds = dataset_from_records(records);

    std::ostringstream csv;
    write_dataset_csv(csv, ds);
    write_file(a.out, csv.str());

    std::ostringstream meta;
    meta << "oracle=" << oracle->identity() << '\n';
    meta << "seed=" << a.seed << '\n';
    meta << "facts=" << spec.min_facts << ':' << spec.max_facts << '\n';
    meta << "domain=" << spec.domain << '\n';
    meta << "safety=" << a.safety << '\n';
    meta << "rules=" << jobs.size() << '\n';
    meta << "examples=" << ds.size() << '\n';
    std::size_t row = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.label) {
            meta << "row " << row++ << " rule=" << i << " source=" << r.source << " line=" << r.line
                 << " seed=" << r.seed << " facts_per_predicate=" << r.facts_per_predicate
                 << " t_never=" << opt_real(r.t_never) << " t_always=" << opt_real(r.t_always)
                 << " label=" << to_string(*r.label) << '\n';
        } else {
            meta << "skip rule=" << i << " source=" << r.source << " line=" << r.line << " reason=" << r.note << '\n';
            std::cerr << "skipped " << r.source << ':' << r.line << ": " << r.note << '\n';
        }
    }
    write_file(a.out + ".meta", meta.str());
    write_class_distribution(std::cout, ds.class_counts());
    return 0;
}

// ---- train / eval / predict ----

struct TrainArgs {
    std::string dataset;
    std::string out;
    std::string report_kv;
    std::size_t epochs = 300;
    double split = 0.7;
    std::vector<std::size_t> hidden{32, 32};
    double lr = 1e-3;
    std::size_t batch = 32;
    double gamma = 2.0;
    std::uint64_t seed = 0;
};

Dataset read_dataset(const std::string& path) {
    std::istringstream is(read_file(path));
    return read_dataset_csv(is);
}

int cmd_train(const TrainArgs& a) {
    std::ostringstream hidden;
    for (std::size_t i = 0; i < a.hidden.size(); ++i)
        hidden << (i ? "," : "") << a.hidden[i];
    echo_config("train", {{"dataset", a.dataset},
                          {"out", a.out},
                          {"epochs", std::to_string(a.epochs)},
                          {"split", format_real(a.split)},
                          {"hidden", hidden.str()},
                          {"lr", format_real(a.lr)},
                          {"batch", std::to_string(a.batch)},
                          {"gamma", format_real(a.gamma)},
                          {"seed", std::to_string(a.seed)}});
    auto ds = read_dataset(a.dataset);
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.split = a.split;
    cfg.hidden = a.hidden;
    cfg.learning_rate = a.lr;
    cfg.batch = a.batch;
    cfg.gamma = a.gamma;
    cfg.seed = a.seed;
    auto res = train(ds, cfg);
    for (const auto& w : res.warnings)
        std::cerr << "warning: " << w << '\n';
    save_model(res.model, a.out);
    std::cout << "train " << res.train_indices.size() << " test " << res.test_indices.size() << '\n';
    write_class_distribution(std::cout, ds.class_counts());
    write_report_table(std::cout, res.test_report, class_names());
    if (!a.report_kv.empty()) {
        std::ostringstream kv;
        write_report_kv(kv, res.test_report, class_names());
        write_file(a.report_kv, kv.str());
    }
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset, bool kv, std::uint64_t seed) {
    echo_config("eval", {{"model", model_path}, {"dataset", dataset}, {"seed", std::to_string(seed)}});
    auto model = load_model(model_path);
    auto ds = read_dataset(dataset);
    if (!ds.has_every_class()) {
        auto c = ds.class_counts();
        throw DegenerateDatasetError("evaluation needs every class; counts decomp=" + std::to_string(c[0]) +
                                     " do-not-decomp=" + std::to_string(c[1]) +
                                     " indifferent=" + std::to_string(c[2]));
    }
    auto report = evaluate(model, ds.examples);
    if (kv)
        write_report_kv(std::cout, report, class_names());
    else
        write_report_table(std::cout, report, class_names());
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& safety,
                std::uint64_t seed) {
    echo_config("predict", {{"model", model_path}, {"input", input}, {"safety", safety}, {"seed", std::to_string(seed)}});
    auto model = load_model(model_path);
    std::vector<FeatureArray> rows;
    if (fs::path(input).extension() == ".csv") {
        std::istringstream is(read_file(input));
        for (const auto& r : read_features_csv(is, false))
            rows.push_back(r.values);
    } else {
        Program p = read_program(input);
        RewriteOptions ropts;
        ropts.safety = parse_safety(safety);
        for (const auto* r : p.rules()) {
            auto f = rule_features(*r, p, ropts);
            if (!f)
                throw NoIdbError("rule at line " + std::to_string(r->line) + " is a constraint; features are undefined");
            rows.push_back(f->as_array());
        }
    }
    std::cout << "index,label,p_decomp,p_do_not_decomp,p_indifferent\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto pr = predict(model, rows[i]);
        std::cout << i + 1 << ',' << to_string(pr.label);
        for (auto v : pr.probabilities)
            std::cout << ',' << format_real(v);
        std::cout << '\n';
    }
    return 0;
}

// ---- ground / corpus ----

int cmd_ground(const std::string& input, std::optional<double> timeout, std::optional<std::uint64_t> budget,
               const std::vector<std::string>& only, bool stats, std::uint64_t seed) {
    echo_config("ground", {{"input", input},
                           {"timeout", timeout ? format_real(*timeout) : "none"},
                           {"work-budget", budget ? std::to_string(*budget) : "none"},
                           {"seed", std::to_string(seed)}});
    // rewritten programs carry fresh predicates
    Program p = read_program(input, true);
    GroundOptions g;
    if (timeout)
        g.timeout = std::chrono::duration<double>(*timeout);
    g.work_budget = budget;
    std::set<Signature> filter;
    for (const auto& s : only) {
        auto slash = s.rfind('/');
        if (slash == std::string::npos)
            throw UsageError("--only expects name/arity, got '" + s + "'");
        filter.insert({s.substr(0, slash), std::stoul(s.substr(slash + 1))});
    }
    auto res = ground(p, g);
    for (const auto& a : res.atom_strings(filter))
        std::cout << a << ".\n";
    if (stats)
        std::cerr << "atoms=" << res.num_atoms() << " ground_rules=" << res.ground_rules << " work=" << res.work
                  << " elapsed_s=" << std::chrono::duration<double>(res.elapsed).count() << '\n';
    return 0;
}

int cmd_corpus(const CorpusSpec& spec, const std::string& out, std::uint64_t seed) {
    echo_config("corpus", {{"rules", std::to_string(spec.rules)},
                           {"body", std::to_string(spec.min_body) + ":" + std::to_string(spec.max_body)},
                           {"max-vars", std::to_string(spec.max_vars)},
                           {"max-arity", std::to_string(spec.max_arity)},
                           {"seed", std::to_string(seed)}});
    if (spec.min_body < 2 || spec.max_body < spec.min_body || spec.max_vars < 3 || spec.max_vars > 26 ||
        spec.max_arity < 1)
        throw UsageError("corpus needs 2 <= min-body <= max-body, 3 <= max-vars <= 26, max-arity >= 1");
    auto text = print_program(synthetic_corpus(spec, seed));
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rule decomposition, features, labeling, learning and grounding for logic programs"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;

    RewriteArgs rw;
    auto* rewrite = app.add_subcommand("rewrite", "Rewrite a program under a decomposition policy");
    rewrite->add_option("input", rw.input, "Program file")->required();
    rewrite->add_option("--policy", rw.policy, "never | always | model | list")
        ->check(CLI::IsMember({"never", "always", "model", "list"}))
        ->capture_default_str();
    rewrite->add_option("--model", rw.model, "Model file for --policy model");
    rewrite->add_option("--list", rw.list, "Decision list for --policy list");
    rewrite->add_option("--safety", rw.safety, "Safety repair: aux | inline")
        ->check(CLI::IsMember({"aux", "inline"}))
        ->capture_default_str();
    rewrite->add_flag("--annotate-only", rw.annotate_only, "Print one decision per rule instead of rewriting");
    rewrite->add_flag("--dump-decomp", rw.dump_decomp, "Print hypergraphs and tree decompositions to stderr");
    rewrite->add_option("--seed", rw.seed)->capture_default_str();

    std::string feat_input, feat_safety = "aux";
    bool idb_after = false;
    std::uint64_t feat_seed = 0;
    auto* features = app.add_subcommand("features", "Feature CSV, one row per rule");
    features->add_option("input", feat_input, "Program file")->required();
    features->add_flag("--idb-after-rewrite", idb_after, "Count fresh predicates as IDB");
    features->add_option("--safety", feat_safety)->check(CLI::IsMember({"aux", "inline"}))->capture_default_str();
    features->add_option("--seed", feat_seed)->capture_default_str();

    LabelArgs la;
    auto* label = app.add_subcommand("label", "Label every rule of the inputs with a grounding oracle");
    label->add_option("inputs", la.inputs, "Program files or directories of .lp files")->required();
    label->add_option("--out", la.out, "Dataset CSV (a .meta sidecar is written next to it)")->required();
    label->add_option("--oracle", la.oracle, "internal | exec:<command with {file}>")->capture_default_str();
    label->add_option("--jobs", la.jobs)->check(CLI::PositiveNumber)->capture_default_str();
    label->add_option("--timeout", la.timeout, "Seconds per grounding")->capture_default_str();
    label->add_option("--reps", la.reps, "Timed repetitions (median)")->check(CLI::PositiveNumber)->capture_default_str();
    label->add_option("--cost", la.cost, "Internal oracle cost: time | work")
        ->check(CLI::IsMember({"time", "work"}))
        ->capture_default_str();
    label->add_option("--work-budget", la.work_budget, "Work limit per grounding with --cost work")
        ->capture_default_str();
    label->add_option("--facts", la.facts, "Facts per body predicate: N or MIN:MAX")->capture_default_str();
    label->add_option("--domain", la.domain, "Constants per argument")->capture_default_str();
    label->add_option("--safety", la.safety)->check(CLI::IsMember({"aux", "inline"}))->capture_default_str();
    label->add_option("--seed", la.seed)->capture_default_str();

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train the classifier on a labelled dataset");
    train_cmd->add_option("dataset", ta.dataset)->required();
    train_cmd->add_option("--out", ta.out, "Model file")->required();
    train_cmd->add_option("--report-kv", ta.report_kv, "Write the test report as key=value lines");
    train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
    train_cmd->add_option("--split", ta.split, "Training fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    train_cmd->add_option("--hidden", ta.hidden, "Hidden layer sizes")->delimiter(',')->capture_default_str();
    train_cmd->add_option("--lr", ta.lr)->capture_default_str();
    train_cmd->add_option("--batch", ta.batch)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--gamma", ta.gamma)->check(CLI::NonNegativeNumber)->capture_default_str();
    train_cmd->add_option("--seed", ta.seed)->capture_default_str();

    std::string ev_model, ev_data;
    bool ev_kv = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a labelled dataset");
    eval->add_option("model", ev_model)->required();
    eval->add_option("dataset", ev_data)->required();
    eval->add_flag("--kv", ev_kv, "key=value output");
    eval->add_option("--seed", seed)->capture_default_str();

    std::string pr_model, pr_input, pr_safety = "aux";
    auto* predict_cmd = app.add_subcommand("predict", "Classify feature rows (.csv) or the rules of a program");
    predict_cmd->add_option("model", pr_model)->required();
    predict_cmd->add_option("input", pr_input)->required();
    predict_cmd->add_option("--safety", pr_safety)->check(CLI::IsMember({"aux", "inline"}))->capture_default_str();
    predict_cmd->add_option("--seed", seed)->capture_default_str();

    std::string gr_input;
    std::optional<double> gr_timeout;
    std::optional<std::uint64_t> gr_budget;
    std::vector<std::string> gr_only;
    bool gr_stats = false;
    auto* ground_cmd = app.add_subcommand("ground", "Print the derived atoms of a program");
    ground_cmd->add_option("input", gr_input)->required();
    ground_cmd->add_option("--timeout", gr_timeout, "Seconds");
    ground_cmd->add_option("--work-budget", gr_budget);
    ground_cmd->add_option("--only", gr_only, "Restrict output to name/arity (repeatable)");
    ground_cmd->add_flag("--stats", gr_stats, "Print counters to stderr");
    ground_cmd->add_option("--seed", seed)->capture_default_str();

    CorpusSpec cs;
    std::string cs_out;
    std::uint64_t cs_seed = 0;
    auto* corpus = app.add_subcommand("corpus", "Generate random decomposable rules");
    corpus->add_option("--rules", cs.rules)->capture_default_str();
    corpus->add_option("--min-body", cs.min_body)->capture_default_str();
    corpus->add_option("--max-body", cs.max_body)->capture_default_str();
    corpus->add_option("--max-vars", cs.max_vars)->capture_default_str();
    corpus->add_option("--max-arity", cs.max_arity)->capture_default_str();
    corpus->add_option("--out", cs_out, "Output file (default stdout)");
    corpus->add_option("--seed", cs_seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: UsageError: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*rewrite)
            return cmd_rewrite(rw);
        if (*features)
            return cmd_features(feat_input, idb_after, feat_safety, feat_seed);
        if (*label)
            return cmd_label(la);
        if (*train_cmd)
            return cmd_train(ta);
        if (*eval)
            return cmd_eval(ev_model, ev_data, ev_kv, seed);
        if (*predict_cmd)
            return cmd_predict(pr_model, pr_input, pr_safety, seed);
        if (*ground_cmd)
            return cmd_ground(gr_input, gr_timeout, gr_budget, gr_only, gr_stats, seed);
        if (*corpus)
            return cmd_corpus(cs, cs_out, cs_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: InternalError: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

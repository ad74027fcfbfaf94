#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gradmask/autodiff.hpp"
#include "gradmask/datasets.hpp"
#include "gradmask/masking.hpp"
#include "gradmask/optim.hpp"
#include "gradmask/rng.hpp"
#include "gradmask/stats.hpp"

namespace gradmask::harness {

using nlohmann::json;

constexpr int kRecordSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Trial configuration
// ---------------------------------------------------------------------------

struct TrialConfig {
    std::string dataset = "spirals";  // spirals | cmnist
    std::string method = "erm";       // erm | and | sand
    double lr = 0.01;
    double weight_decay = 0.0;
    double tau = 1.0;
    double dropout = 0.0;
    double momentum = 0.9;
    double init_scale_multiplier = 1.0;
    int batch_size = 512;  // per-environment minibatch size
    int depth = 3;
    int width = 256;
    int steps = 3000;
    std::string optimizer = "sgd_momentum";  // sgd_momentum | adam
    std::string averaging = "arithmetic";    // arithmetic | geometric
    std::string activation = "relu";         // relu | tanh
    int config_index = 0;

    MaskMethod mask_method() const {
        if (method == "erm") return MaskMethod::none;
        if (method == "and") return MaskMethod::and_mask;
        if (method == "sand") return MaskMethod::sand_mask;
        throw std::invalid_argument("TrialConfig: unknown method '" + method + "'");
    }

    MaskConfig mask_config() const {
        MaskConfig m;
        m.method = mask_method();
        m.tau = tau;
        m.averaging = averaging == "geometric" ? Averaging::geometric : Averaging::arithmetic;
        return m;
    }

    OptimConfig optim_config() const {
        OptimConfig o;
        o.learning_rate = lr;
        o.momentum = momentum;
        o.weight_decay = weight_decay;
        o.optimizer = optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
        return o;
    }

    MlpSpec mlp_spec(int input_dim, int num_classes) const {
        MlpSpec s;
        s.input_dim = input_dim;
        s.depth = depth;
        s.width = width;
        s.output_dim = num_classes;
        s.activation = activation == "tanh" ? Activation::tanh : Activation::relu;
        s.dropout_rate = dropout;
        return s;
    }

    void validate() const {
        mask_method();
        mask_config().validate();
        optim_config().validate();
        if (batch_size < 1 || steps < 1) throw std::invalid_argument("TrialConfig: bad batch/steps");
        if (depth < 1 || width < 1) throw std::invalid_argument("TrialConfig: bad depth/width");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("TrialConfig: bad dropout");
        if (!(init_scale_multiplier > 0.0))
            throw std::invalid_argument("TrialConfig: bad init_scale_multiplier");
    }

    json to_json() const {
        return {{"dataset", dataset},
                {"method", method},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"tau", tau},
                {"dropout", dropout},
                {"momentum", momentum},
                {"init_scale_multiplier", init_scale_multiplier},
                {"batch_size", batch_size},
                {"depth", depth},
                {"width", width},
                {"steps", steps},
                {"optimizer", optimizer},
                {"averaging", averaging},
                {"activation", activation},
                {"config_index", config_index}};
    }
    static TrialConfig from_json(const json& j) {
        TrialConfig c;
        c.dataset = j.value("dataset", c.dataset);
        c.method = j.value("method", c.method);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.tau = j.value("tau", c.tau);
        c.dropout = j.value("dropout", c.dropout);
        c.momentum = j.value("momentum", c.momentum);
        c.init_scale_multiplier = j.value("init_scale_multiplier", c.init_scale_multiplier);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.depth = j.value("depth", c.depth);
        c.width = j.value("width", c.width);
        c.steps = j.value("steps", c.steps);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.averaging = j.value("averaging", c.averaging);
        c.activation = j.value("activation", c.activation);
        c.config_index = j.value("config_index", c.config_index);
        return c;
    }
};

// ---------------------------------------------------------------------------
// Hyperparameter space (random-search distributions with per-dataset defaults)
// ---------------------------------------------------------------------------

struct SamplingRule {
    enum class Kind { fixed, log10_uniform, log2_uniform_round, uniform, choice };
    Kind kind = Kind::fixed;
    double lo = 0.0, hi = 0.0;
    double fixed_value = 0.0;
    std::vector<double> choices;

    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::fixed: return fixed_value;
            case Kind::log10_uniform: return std::pow(10.0, rng.uniform(lo, hi));
            case Kind::log2_uniform_round: return std::round(std::pow(2.0, rng.uniform(lo, hi)));
            case Kind::uniform: return rng.uniform(lo, hi);
            case Kind::choice:
                return choices[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(choices.size()) - 1))];
        }
        throw std::logic_error("SamplingRule: bad kind");
    }

    static SamplingRule fixed(double v) { return {Kind::fixed, 0, 0, v, {}}; }
    static SamplingRule log10(double lo, double hi) { return {Kind::log10_uniform, lo, hi, 0, {}}; }
    static SamplingRule log2r(double lo, double hi) { return {Kind::log2_uniform_round, lo, hi, 0, {}}; }
    static SamplingRule uni(double lo, double hi) { return {Kind::uniform, lo, hi, 0, {}}; }
    static SamplingRule pick(std::vector<double> c) {
        return {Kind::choice, 0, 0, 0, std::move(c)};
    }
};

struct HparamSpace {
    TrialConfig defaults;
    SamplingRule lr, batch, weight_decay, depth, width, tau, dropout;
};

inline HparamSpace hparam_space(const std::string& dataset, const std::string& method) {
    HparamSpace s;
    s.defaults.dataset = dataset;
    s.defaults.method = method;
    if (dataset == "spirals") {
        s.defaults.lr = 0.01;
        s.defaults.batch_size = 512;
        s.defaults.weight_decay = 0.001;
        s.defaults.depth = 3;
        s.defaults.width = 256;
        s.lr = SamplingRule::log10(-3.5, -1.5);
        s.batch = SamplingRule::log2r(3.0, 9.0);
        s.weight_decay = SamplingRule::log10(-6.0, -2.0);
        s.depth = SamplingRule::pick({3, 4, 5});
        s.width = SamplingRule::log2r(6.0, 10.0);
    } else if (dataset == "cmnist") {
        s.defaults.lr = 0.001;
        s.defaults.batch_size = 64;
        s.defaults.weight_decay = 0.0;
        s.defaults.depth = 3;
        s.defaults.width = 64;
        s.lr = SamplingRule::log10(-4.5, -3.5);
        s.batch = SamplingRule::log2r(3.0, 9.0);
        s.weight_decay = SamplingRule::fixed(0.0);
        s.depth = SamplingRule::fixed(3);
        s.width = SamplingRule::fixed(64);
    } else {
        throw std::invalid_argument("hparam_space: unknown dataset '" + dataset + "'");
    }
    s.defaults.tau = 1.0;
    s.defaults.dropout = 0.0;
    s.tau = method == "erm" ? SamplingRule::fixed(1.0) : SamplingRule::uni(0.0, 1.0);
    s.dropout = SamplingRule::pick({0.0, 0.1, 0.5});
    return s;
}

inline TrialConfig sample_hparams(const HparamSpace& space, Rng& rng, int config_index) {
    TrialConfig c = space.defaults;
    c.lr = space.lr.sample(rng);
    c.batch_size = static_cast<int>(space.batch.sample(rng));
    c.weight_decay = space.weight_decay.sample(rng);
    c.depth = static_cast<int>(space.depth.sample(rng));
    c.width = static_cast<int>(space.width.sample(rng));
    c.tau = space.tau.sample(rng);
    c.dropout = space.dropout.sample(rng);
    c.config_index = config_index;
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

struct StepLogEntry {
    double train_loss = 0.0;
    double mask_density = 0.0;
    double agreement_mean = 0.0;
};

struct TrialRecord {
    int schema_version = kRecordSchemaVersion;
    TrialConfig config;
    std::uint64_t seed = 0;
    std::string test_env;
    json dataset_manifest;  // generator provenance; enough to replay
    std::vector<StepLogEntry> log;
    double val_accuracy = 0.0;   // training-domain 20%-split accuracy
    double test_accuracy = 0.0;  // held-out environment accuracy, final step
    bool failed = false;
    int diverged_at = -1;
    double wall_time_s = 0.0;

    json to_json() const {
        json steps_log = json::array();
        for (const auto& e : log) steps_log.push_back({e.train_loss, e.mask_density, e.agreement_mean});
        return {{"schema_version", schema_version},
                {"config", config.to_json()},
                {"seed", seed},
                {"test_env", test_env},
                {"dataset_manifest", dataset_manifest},
                {"log", steps_log},
                {"val_accuracy", val_accuracy},
                {"test_accuracy", test_accuracy},
                {"failed", failed},
                {"diverged_at", diverged_at},
                {"wall_time_s", wall_time_s}};
    }
    static TrialRecord from_json(const json& j) {
        TrialRecord r;
        r.schema_version = j.value("schema_version", 1);
        r.config = TrialConfig::from_json(j.at("config"));
        r.seed = j.at("seed").get<std::uint64_t>();
        r.test_env = j.at("test_env").get<std::string>();
        r.dataset_manifest = j.value("dataset_manifest", json());
        for (const auto& e : j.at("log"))
            r.log.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
        r.val_accuracy = j.at("val_accuracy").get<double>();
        r.test_accuracy = j.at("test_accuracy").get<double>();
        r.failed = j.value("failed", false);
        r.diverged_at = j.value("diverged_at", -1);
        r.wall_time_s = j.value("wall_time_s", 0.0);
        return r;
    }
};

namespace detail {

inline double dataset_accuracy(const MlpSpec& spec, const ParamVector& params, const Env& env) {
    return accuracy(mlp_forward(spec, params, env.x, PassMode::eval).logits, env.y);
}

}  // namespace detail

// One training run: fixed step count, per-environment minibatches, masked
// update, optimizer step. Deterministic given (config, dataset, seed); a
// diverged trial is recorded as failed with zero accuracies, not raised.
inline TrialRecord run_trial(const TrialConfig& config, const EnvDataset& dataset,
                             const std::string& test_env, std::uint64_t seed) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    TrialRecord rec;
    rec.config = config;
    rec.seed = seed;
    rec.test_env = test_env;
    rec.dataset_manifest = dataset.provenance;

    auto [train_all, test_ds] = leave_one_env_out(dataset, test_env);
    auto [train_split, val_split] = env_split(train_all, 0.2, seed);

    const MlpSpec spec = config.mlp_spec(dataset.feature_dim, dataset.num_classes);
    const MaskConfig mask_cfg = config.mask_config();
    const OptimConfig optim_cfg = config.optim_config();

    Rng trial_rng(Rng::mix(seed ^ 0x7261696e5f726e67ULL));
    Rng init_rng = trial_rng.fork(0);
    Rng dropout_rng = trial_rng.fork(1);
    std::vector<Rng> batch_rngs;
    for (std::size_t e = 0; e < train_split.envs.size(); ++e)
        batch_rngs.push_back(trial_rng.fork(100 + e));

    ParamVector params = init_params(spec, init_rng, config.init_scale_multiplier);
    MomentumState state = MomentumState::zeros(params.size());

    const Eigen::Index d = static_cast<Eigen::Index>(train_split.envs.size());
    EnvGradientSet gs;
    gs.grads.resize(d, params.size());
    for (const auto& env : train_split.envs) gs.env_ids.push_back(env.id);

    rec.log.reserve(static_cast<std::size_t>(config.steps));
    for (int step = 0; step < config.steps; ++step) {
        double loss_sum = 0.0;
        bool finite = true;
        for (Eigen::Index e = 0; e < d && finite; ++e) {
            const Env& env = train_split.envs[static_cast<std::size_t>(e)];
            const Eigen::Index env_size = env.y.size();
            const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, env_size);
            Eigen::MatrixXd xb;
            Eigen::VectorXi yb;
            const Eigen::MatrixXd* x_ptr = &env.x;
            const Eigen::VectorXi* y_ptr = &env.y;
            if (b < env_size) {
                xb.resize(b, env.x.cols());
                yb.resize(b);
                Rng& brng = batch_rngs[static_cast<std::size_t>(e)];
                for (Eigen::Index i = 0; i < b; ++i) {
                    const Eigen::Index pick = brng.uniform_int(0, env_size - 1);
                    xb.row(i) = env.x.row(pick);
                    yb[i] = env.y[pick];
                }
                x_ptr = &xb;
                y_ptr = &yb;
            }
            try {
                auto fwd = mlp_forward(spec, params, *x_ptr, PassMode::train, &dropout_rng);
                const CeLoss ce = softmax_cross_entropy(fwd.logits, *y_ptr);
                if (!std::isfinite(ce.loss)) {
                    finite = false;
                    break;
                }
                loss_sum += ce.loss;
                gs.grads.row(e) = mlp_backward(fwd.tape, ce.loss_grad).transpose();
            } catch (const std::domain_error&) {
                finite = false;
            }
        }
        if (!finite) {
            rec.failed = true;
            rec.diverged_at = step;
            break;
        }
        const MaskedUpdate mu = masked_update_gradient(gs, mask_cfg);
        optimizer_step(params.values, mu.update, state, optim_cfg);
        if (!params.values.allFinite()) {
            rec.failed = true;
            rec.diverged_at = step;
            break;
        }
        rec.log.push_back({loss_sum / static_cast<double>(d), mu.mask.weights.mean(),
                           mu.stats.agreement.mean()});
    }

    if (!rec.failed) {
        Eigen::Index total_n = 0;
        double weighted = 0.0;
        for (const auto& env : val_split.envs) {
            const double acc = detail::dataset_accuracy(spec, params, env);
            weighted += acc * static_cast<double>(env.y.size());
            total_n += env.y.size();
        }
        rec.val_accuracy = weighted / static_cast<double>(total_n);
        rec.test_accuracy = detail::dataset_accuracy(spec, params, test_ds.envs.front());
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

// ---------------------------------------------------------------------------
// Parallel trial runner: jobs are independent; output order matches input.
// ---------------------------------------------------------------------------

struct TrialJob {
    TrialConfig config;
    std::string test_env;
    std::uint64_t seed = 0;
};

inline std::vector<TrialRecord> run_trials(const std::vector<TrialJob>& jobs,
                                           const EnvDataset& dataset, int workers) {
    std::vector<TrialRecord> out(jobs.size());
    if (jobs.empty()) return out;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                out[i] = run_trial(jobs[i].config, dataset, jobs[i].test_env, jobs[i].seed);
            }
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------------------
// Model selection and aggregation
// ---------------------------------------------------------------------------

enum class SelectionScheme { training_domain_validation, test_domain_oracle };

inline SelectionScheme selection_scheme_from_string(const std::string& s) {
    if (s == "trainval") return SelectionScheme::training_domain_validation;
    if (s == "oracle") return SelectionScheme::test_domain_oracle;
    throw std::invalid_argument("unknown selection scheme '" + s + "'");
}

struct SelectionResult {
    int config_index = -1;
    double criterion_value = 0.0;        // the scheme's selection score
    std::vector<double> test_accuracies; // per seed, chosen config
    double test_mean = 0.0;
    double test_sem = 0.0;
    double val_mean = 0.0;
};

// Scheme 1 maximizes mean training-domain validation accuracy; the oracle
// maximizes mean final-step test accuracy. Ties go to the lower config index.
inline SelectionResult select_model(const std::vector<TrialRecord>& records,
                                    SelectionScheme scheme) {
    if (records.empty()) throw std::invalid_argument("select_model: no records");
    for (const auto& r : records) {
        if (r.test_env != records.front().test_env || r.config.dataset != records.front().config.dataset)
            throw std::invalid_argument("select_model: records must share dataset and test_env");
    }
    std::map<int, std::vector<const TrialRecord*>> by_config;
    for (const auto& r : records) by_config[r.config.config_index].push_back(&r);

    SelectionResult best;
    bool first = true;
    for (const auto& [idx, recs] : by_config) {
        std::vector<double> vals, tests;
        for (const auto* r : recs) {
            vals.push_back(r->val_accuracy);
            tests.push_back(r->test_accuracy);
        }
        const double score = scheme == SelectionScheme::training_domain_validation
                                 ? stats::mean(vals)
                                 : stats::mean(tests);
        if (first || score > best.criterion_value) {
            first = false;
            best.config_index = idx;
            best.criterion_value = score;
            best.test_accuracies = tests;
            best.test_mean = stats::mean(tests);
            best.test_sem = stats::standard_error(tests);
            best.val_mean = stats::mean(vals);
        }
    }
    return best;
}

inline std::string format_mean_sem(double mean, double sem) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", 100.0 * mean, 100.0 * sem);
    return buf;
}

struct ReportRow {
    std::string method;
    std::vector<std::string> cells;  // one per test env, "xx.x ± y.y"
    std::vector<double> env_means;
    double avg = 0.0;
};

struct ReportTable {
    std::vector<std::string> env_order;
    std::vector<ReportRow> rows;

    std::string to_csv() const {
        std::ostringstream out;
        out << "method";
        for (const auto& e : env_order) out << ',' << e;
        out << ",Avg\n";
        for (const auto& r : rows) {
            out << r.method;
            for (const auto& c : r.cells) out << ',' << c;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * r.avg);
            out << ',' << buf << '\n';
        }
        return out.str();
    }
};

// Selection per (method, test_env) group, then mean +- standard error over
// seeds; one column per test environment plus the cross-environment average.
inline ReportTable aggregate(const std::vector<TrialRecord>& records, SelectionScheme scheme) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::vector<std::string> methods, envs;
    for (const auto& r : records) {
        if (std::find(methods.begin(), methods.end(), r.config.method) == methods.end())
            methods.push_back(r.config.method);
        if (std::find(envs.begin(), envs.end(), r.test_env) == envs.end())
            envs.push_back(r.test_env);
    }
    ReportTable table;
    table.env_order = envs;
    for (const auto& method : methods) {
        ReportRow row;
        row.method = method;
        for (const auto& env : envs) {
            std::vector<TrialRecord> group;
            for (const auto& r : records)
                if (r.config.method == method && r.test_env == env) group.push_back(r);
            if (group.empty())
                throw std::invalid_argument("aggregate: missing records for method " + method +
                                            ", env " + env);
            const SelectionResult sel = select_model(group, scheme);
            row.cells.push_back(format_mean_sem(sel.test_mean, sel.test_sem));
            row.env_means.push_back(sel.test_mean);
        }
        row.avg = stats::mean(row.env_means);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Failure-mode sweeps
// ---------------------------------------------------------------------------

enum class SweepKind { momentum, noise, init_scale };

inline SweepKind sweep_kind_from_string(const std::string& s) {
    if (s == "momentum") return SweepKind::momentum;
    if (s == "noise") return SweepKind::noise;
    if (s == "init") return SweepKind::init_scale;
    throw std::invalid_argument("unknown sweep kind '" + s + "'");
}

struct SweepPoint {
    double value = 0.0;
    std::uint64_t seed = 0;
    std::string test_env;
    double test_accuracy = 0.0;
    bool failed = false;
};

struct SweepResult {
    SweepKind kind;
    std::vector<SweepPoint> points;
    double spearman_rho = 0.0;  // accuracy vs swept value
    double spearman_negative_p = 1.0;

    std::string to_csv() const {
        std::ostringstream out;
        out << "kind,value,seed,test_env,accuracy,failed\n";
        const char* name = kind == SweepKind::momentum ? "momentum"
                           : kind == SweepKind::noise  ? "noise"
                                                       : "init";
        for (const auto& p : points)
            out << name << ',' << p.value << ',' << p.seed << ',' << p.test_env << ','
                << p.test_accuracy << ',' << (p.failed ? 1 : 0) << '\n';
        return out.str();
    }
};

// Fig-2-style protocol: each swept value runs `seeds` trials of the base
// config; test environments rotate with the seed. The noise sweep regenerates
// the dataset at each value with the same dataset seed.
inline SweepResult run_sweep(SweepKind kind, const std::vector<double>& values,
                             const TrialConfig& base_config, const SpiralsConfig& base_dataset,
                             int seeds, int workers) {
    if (values.empty()) throw std::invalid_argument("run_sweep: no values");
    if (seeds < 1) throw std::invalid_argument("run_sweep: seeds must be >= 1");
    SweepResult result;
    result.kind = kind;
    for (double value : values) {
        SpiralsConfig ds_cfg = base_dataset;
        TrialConfig cfg = base_config;
        switch (kind) {
            case SweepKind::momentum: cfg.momentum = value; break;
            case SweepKind::noise: ds_cfg.invariant_noise_std = value; break;
            case SweepKind::init_scale: cfg.init_scale_multiplier = value; break;
        }
        const EnvDataset ds = gen_spirals(ds_cfg);
        std::vector<TrialJob> jobs;
        for (int s = 0; s < seeds; ++s) {
            TrialJob job;
            job.config = cfg;
            job.seed = static_cast<std::uint64_t>(s);
            job.test_env = ds.envs[static_cast<std::size_t>(s) % ds.envs.size()].id;
            jobs.push_back(std::move(job));
        }
        const auto records = run_trials(jobs, ds, workers);
        for (std::size_t i = 0; i < records.size(); ++i)
            result.points.push_back({value, jobs[i].seed, jobs[i].test_env,
                                     records[i].test_accuracy, records[i].failed});
    }
    if (values.size() >= 2 && result.points.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& p : result.points) {
            xs.push_back(p.value);
            ys.push_back(p.test_accuracy);
        }
        result.spearman_rho = stats::spearman_rho(xs, ys);
        result.spearman_negative_p = stats::spearman_negative_pvalue(xs, ys);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Persistence (JSON lines) and replay
// ---------------------------------------------------------------------------

inline void write_jsonl(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const auto& r : records) out << r.to_json().dump() << '\n';
}

inline std::vector<TrialRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<TrialRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(TrialRecord::from_json(json::parse(line)));
    }
    return records;
}

inline EnvDataset dataset_from_manifest(const json& provenance) {
    const std::string generator = provenance.at("generator").get<std::string>();
    if (generator == "spirals") return gen_spirals(SpiralsConfig::from_json(provenance.at("config")));
    if (generator == "cmnist")
        return gen_synthetic_cmnist(SyntheticCmnistConfig::from_json(provenance.at("config")));
    throw std::invalid_argument("dataset_from_manifest: unknown generator '" + generator + "'");
}

// Re-runs a persisted trial from its embedded config and seeds.
inline TrialRecord replay(const TrialRecord& record) {
    const EnvDataset ds = dataset_from_manifest(record.dataset_manifest);
    return run_trial(record.config, ds, record.test_env, record.seed);
}

}  // namespace gradmask::harness

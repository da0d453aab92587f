#pragma once

// FL-vs-CV benchmark harness.
//
// Every restart draws its own 80/20 split (seed = base seed + restart), so the
// FL and CV reports for the same base seed see identical splits. The CV
// baseline trains the single-theta CPD kernel machine (an FL fit with P = 1 and
// lambda frozen at 1) on every fold for every grid value, picks the theta with
// the lowest mean validation MSE (earliest on ties) and retrains it on the full
// training split. Its time covers all fold fits plus the final fit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpdfl/als.hpp"
#include "cpdfl/data.hpp"
#include "cpdfl/features.hpp"
#include "cpdfl/model.hpp"

namespace cpdfl {

inline const std::vector<double>& default_theta_grid() {
    static const std::vector<double> grid{10, 2, 128, 25, 64, 600, 2000, 1024};
    return grid;
}

/// Everything one benchmark run needs besides the data.
struct ExperimentConfig {
    std::string name = "custom";
    TrainConfig train;
    Index num_freq = 4;
    bool quantized = true;
    std::vector<double> thetas = default_theta_grid();
    int folds = 6;
    double train_fraction = 0.8;
    bool concurrent = false;

    FeatureFamily family(Index dims) const { return FeatureFamily::uniform(dims, num_freq, thetas, quantized); }

    void validate() const {
        train.validate();
        if (thetas.empty()) throw std::invalid_argument("ExperimentConfig: empty theta grid");
        if (folds < 2) throw std::invalid_argument("ExperimentConfig: folds must be >= 2");
        SplitSpec{train_fraction, 0, folds}.validate();
        FourierSpec{num_freq, 1.0, quantized}.validate();
    }
};

/// Table-2 style presets: all P = 8 over the default grid, 10 epochs, 10 restarts.
inline ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.train.alpha = 0.01;
    cfg.train.beta = 0.1;
    cfg.train.epochs = 10;
    cfg.train.restarts = 10;
    cfg.train.reg = RegKind::L1;
    auto set = [&](Index I, Index R) {
        cfg.num_freq = I;
        cfg.train.rank = R;
    };
    if (name == "airfoil") {
        set(4, 51);
    } else if (name == "energy") {
        set(4, 15);
    } else if (name == "yacht") {
        set(2, 6);
    } else if (name == "concrete") {
        set(8, 10);
    } else if (name == "wine") {
        set(16, 25);
    } else if (name == "airline") {
        set(64, 20);
        cfg.thetas = {10, 2, 128, 25, 64, 1024};
        cfg.train.restarts = 5;
        cfg.train_fraction = 2.0 / 3.0;
        cfg.train.feature_cache = FeatureCache::Off;
    } else {
        throw std::invalid_argument("unknown preset '" + name +
                                    "' (airfoil, energy, yacht, concrete, wine, airline)");
    }
    return cfg;
}

inline std::vector<std::string> preset_names() { return {"airfoil", "energy", "yacht", "concrete", "wine", "airline"}; }

struct CvConfig {
    std::vector<double> theta_grid = default_theta_grid();
    int folds = 6;
    TrainConfig base;
    Index num_freq = 4;
    bool quantized = true;
    bool concurrent = false;

    static CvConfig from(const ExperimentConfig& e) {
        return CvConfig{e.thetas, e.folds, e.train, e.num_freq, e.quantized, e.concurrent};
    }
};

struct RestartResult {
    std::uint64_t seed = 0;
    double test_mse = 0.0;
    double wall_seconds = 0.0;
    std::vector<double> lambdas;       // FL
    double selected_theta = 0.0;       // CV
    std::vector<double> cv_scores;     // CV: mean validation MSE per grid entry
    Index guard_trips = 0;
    int epochs_run = 0;
    int zero_lambdas = 0;
};

struct RunReport {
    std::string kind;  // "fl" or "cv"
    std::string dataset;
    std::vector<RestartResult> restarts;
    double mse_mean = 0.0;
    double mse_std = 0.0;
    double time_mean = 0.0;
    double time_total = 0.0;
    Index guard_trips = 0;
    nlohmann::json config;

    void summarize() {
        const double n = static_cast<double>(restarts.size());
        mse_mean = time_total = 0.0;
        guard_trips = 0;
        for (const auto& r : restarts) {
            mse_mean += r.test_mse;
            time_total += r.wall_seconds;
            guard_trips += r.guard_trips;
        }
        mse_mean /= n;
        time_mean = time_total / n;
        double var = 0.0;
        for (const auto& r : restarts) {
            var += (r.test_mse - mse_mean) * (r.test_mse - mse_mean);
        }
        mse_std = std::sqrt(var / n);
    }
};

inline nlohmann::json to_json(const TrainConfig& t) {
    return {{"alpha", t.alpha},
            {"beta", t.beta},
            {"rank", t.rank},
            {"epochs", t.epochs},
            {"reg", to_string(t.reg)},
            {"nonneg", t.nonneg},
            {"inner_steps", t.inner_steps},
            {"seed", t.seed},
            {"restarts", t.restarts},
            {"tol", t.tol},
            {"lambda_design", t.lambda_design == LambdaDesign::Stacked ? "stacked" : "real"},
            {"feature_cache", t.feature_cache == FeatureCache::Auto ? "auto"
                              : t.feature_cache == FeatureCache::On ? "on"
                                                                    : "off"}};
}

inline nlohmann::json to_json(const ExperimentConfig& e) {
    nlohmann::json j = to_json(e.train);
    j["name"] = e.name;
    j["num_freq"] = e.num_freq;
    j["quantized"] = e.quantized;
    j["thetas"] = e.thetas;
    j["folds"] = e.folds;
    j["train_fraction"] = e.train_fraction;
    j["concurrent"] = e.concurrent;
    return j;
}

/// Overlays the keys present in `j` onto `e`.
inline void apply_json(const nlohmann::json& j, ExperimentConfig& e) {
    static const std::vector<std::string> known{
        "name",      "alpha",  "beta",          "rank",  "epochs",      "reg",           "nonneg",
        "inner_steps", "seed", "restarts",      "tol",   "lambda_design", "feature_cache", "num_freq",
        "quantized", "thetas", "folds",         "train_fraction", "concurrent", "preset"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (j.contains("preset")) e = preset(j["preset"].get<std::string>());
    if (j.contains("name")) e.name = j["name"].get<std::string>();
    if (j.contains("alpha")) e.train.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) e.train.beta = j["beta"].get<double>();
    if (j.contains("rank")) e.train.rank = j["rank"].get<Index>();
    if (j.contains("epochs")) e.train.epochs = j["epochs"].get<int>();
    if (j.contains("reg")) e.train.reg = parse_reg_kind(j["reg"].get<std::string>());
    if (j.contains("nonneg")) e.train.nonneg = j["nonneg"].get<bool>();
    if (j.contains("inner_steps")) e.train.inner_steps = j["inner_steps"].get<int>();
    if (j.contains("seed")) e.train.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("restarts")) e.train.restarts = j["restarts"].get<int>();
    if (j.contains("tol")) e.train.tol = j["tol"].get<double>();
    if (j.contains("lambda_design")) {
        const auto s = j["lambda_design"].get<std::string>();
        if (s == "stacked") e.train.lambda_design = LambdaDesign::Stacked;
        else if (s == "real") e.train.lambda_design = LambdaDesign::RealPart;
        else throw std::invalid_argument("config: lambda_design must be 'stacked' or 'real'");
    }
    if (j.contains("feature_cache")) {
        const auto s = j["feature_cache"].get<std::string>();
        if (s == "auto") e.train.feature_cache = FeatureCache::Auto;
        else if (s == "on") e.train.feature_cache = FeatureCache::On;
        else if (s == "off") e.train.feature_cache = FeatureCache::Off;
        else throw std::invalid_argument("config: feature_cache must be auto, on or off");
    }
    if (j.contains("num_freq")) e.num_freq = j["num_freq"].get<Index>();
    if (j.contains("quantized")) e.quantized = j["quantized"].get<bool>();
    if (j.contains("thetas")) e.thetas = j["thetas"].get<std::vector<double>>();
    if (j.contains("folds")) e.folds = j["folds"].get<int>();
    if (j.contains("train_fraction")) e.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("concurrent")) e.concurrent = j["concurrent"].get<bool>();
}

inline nlohmann::json to_json(const RestartResult& r) {
    nlohmann::json j{{"seed", r.seed},
                     {"test_mse", r.test_mse},
                     {"wall_seconds", r.wall_seconds},
                     {"guard_trips", r.guard_trips},
                     {"epochs_run", r.epochs_run}};
    if (!r.lambdas.empty()) {
        j["lambdas"] = r.lambdas;
        j["zero_lambdas"] = r.zero_lambdas;
    }
    if (!r.cv_scores.empty()) {
        j["selected_theta"] = r.selected_theta;
        j["cv_scores"] = r.cv_scores;
    }
    return j;
}

inline nlohmann::json to_json(const RunReport& rep) {
    nlohmann::json restarts = nlohmann::json::array();
    for (const auto& r : rep.restarts) {
        restarts.push_back(to_json(r));
    }
    return {{"kind", rep.kind},       {"dataset", rep.dataset},     {"mse_mean", rep.mse_mean},
            {"mse_std", rep.mse_std}, {"time_mean", rep.time_mean}, {"time_total", rep.time_total},
            {"guard_trips", rep.guard_trips}, {"config", rep.config}, {"restarts", std::move(restarts)}};
}

inline void write_restart_csv(std::ostream& out, const RunReport& rep, bool header = true) {
    if (header) {
        out << "kind,dataset,restart,seed,test_mse,wall_seconds,selected_theta,zero_lambdas,guard_trips\n";
    }
    for (std::size_t i = 0; i < rep.restarts.size(); ++i) {
        const auto& r = rep.restarts[i];
        std::ostringstream row;
        row.precision(17);
        row << rep.kind << ',' << rep.dataset << ',' << i << ',' << r.seed << ',' << r.test_mse << ','
            << r.wall_seconds << ',';
        if (!r.cv_scores.empty()) row << r.selected_theta;
        row << ',';
        if (!r.lambdas.empty()) row << r.zero_lambdas;
        row << ',' << r.guard_trips << '\n';
        out << row.str();
    }
}

/// The single-theta CPD kernel machine trainer used inside cross-validation.
inline FitResult fit_cpd_machine(const rmat& X, const rvec& y, const TrainConfig& base, Index num_freq,
                                 bool quantized, double theta) {
    TrainConfig cfg = base;
    cfg.freeze_lambda = true;
    const auto family = FeatureFamily::uniform(X.cols(), num_freq, {theta}, quantized);
    return fit(X, y, cfg, family);
}

/// One FL restart on an already preprocessed split.
inline RestartResult fl_restart(const Dataset& train, const Dataset& test, const TrainConfig& config,
                                const FeatureFamily& family) {
    const FitResult fr = fit(train.X, train.y, config, family);
    RestartResult r;
    r.seed = config.seed;
    r.wall_seconds = fr.train_seconds;
    r.test_mse = mse(predict_batch(test.X, fr.model), test.y);
    r.lambdas.assign(fr.model.lambdas.data(), fr.model.lambdas.data() + fr.model.lambdas.size());
    r.zero_lambdas = static_cast<int>(std::count(r.lambdas.begin(), r.lambdas.end(), 0.0));
    r.guard_trips = fr.guard_trips;
    r.epochs_run = fr.epochs_run;
    return r;
}

/// Grid search with k-fold CV on `train`, final refit, test MSE on `test`.
inline RestartResult cv_restart(const Dataset& train, const Dataset& test, const CvConfig& cv) {
    using Clock = std::chrono::steady_clock;
    if (cv.theta_grid.empty()) {
        throw std::invalid_argument("run_cv: empty theta grid");
    }
    const auto start = Clock::now();
    const auto folds = kfold(train.size(), cv.folds, cv.base.seed);
    std::vector<Dataset> fold_train;
    std::vector<Dataset> fold_val;
    for (const auto& f : folds) {
        fold_train.push_back(subset(train, f.train));
        fold_val.push_back(subset(train, f.validation));
    }
    RestartResult r;
    r.seed = cv.base.seed;
    auto score = [&](double theta, std::size_t f) {
        const FitResult fr = fit_cpd_machine(fold_train[f].X, fold_train[f].y, cv.base, cv.num_freq, cv.quantized,
                                             theta);
        return std::pair{mse(predict_batch(fold_val[f].X, fr.model), fold_val[f].y), fr.guard_trips};
    };
    for (const double theta : cv.theta_grid) {
        double total = 0.0;
        if (cv.concurrent) {
            std::vector<std::future<std::pair<double, Index>>> jobs;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                jobs.push_back(std::async(std::launch::async, score, theta, f));
            }
            for (auto& j : jobs) {
                const auto [s, trips] = j.get();
                total += s;
                r.guard_trips += trips;
            }
        } else {
            for (std::size_t f = 0; f < folds.size(); ++f) {
                const auto [s, trips] = score(theta, f);
                total += s;
                r.guard_trips += trips;
            }
        }
        r.cv_scores.push_back(total / static_cast<double>(folds.size()));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.cv_scores.size(); ++i) {
        if (r.cv_scores[i] < r.cv_scores[best]) {
            best = i;
        }
    }
    r.selected_theta = cv.theta_grid[best];
    const FitResult final_fit = fit_cpd_machine(train.X, train.y, cv.base, cv.num_freq, cv.quantized,
                                                r.selected_theta);
    r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    r.test_mse = mse(predict_batch(test.X, final_fit.model), test.y);
    r.guard_trips += final_fit.guard_trips;
    r.epochs_run = final_fit.epochs_run;
    return r;
}

namespace detail {

template <class Job>
std::vector<RestartResult> run_restarts(int restarts, bool concurrent, Job job) {
    std::vector<RestartResult> out(static_cast<std::size_t>(restarts));
    if (concurrent) {
        std::vector<std::future<RestartResult>> jobs;
        for (int r = 0; r < restarts; ++r) {
            jobs.push_back(std::async(std::launch::async, job, r));
        }
        for (int r = 0; r < restarts; ++r) {
            out[static_cast<std::size_t>(r)] = jobs[static_cast<std::size_t>(r)].get();
        }
    } else {
        for (int r = 0; r < restarts; ++r) {
            out[static_cast<std::size_t>(r)] = job(r);
        }
    }
    return out;
}

}  // namespace detail

/// `restarts` independent FL runs, each on its own split.
inline RunReport run_fl(const RawTable& raw, const ExperimentConfig& exp) {
    exp.validate();
    const auto family = exp.family(raw.X.cols());
    family.validate();
    RunReport rep;
    rep.kind = "fl";
    rep.dataset = exp.name;
    rep.config = to_json(exp);
    rep.restarts = detail::run_restarts(exp.train.restarts, exp.concurrent, [&](int r) {
        const std::uint64_t seed = exp.train.seed + static_cast<std::uint64_t>(r);
        const auto split = preprocess(raw, SplitSpec{exp.train_fraction, seed, exp.folds});
        TrainConfig cfg = exp.train;
        cfg.seed = seed;
        return fl_restart(split.train, split.test, cfg, family);
    });
    rep.summarize();
    return rep;
}

/// `restarts` independent cross-validated CPD kernel machine runs.
inline RunReport run_cv(const RawTable& raw, const ExperimentConfig& exp) {
    exp.validate();
    RunReport rep;
    rep.kind = "cv";
    rep.dataset = exp.name;
    rep.config = to_json(exp);
    rep.restarts = detail::run_restarts(exp.train.restarts, exp.concurrent, [&](int r) {
        const std::uint64_t seed = exp.train.seed + static_cast<std::uint64_t>(r);
        const auto split = preprocess(raw, SplitSpec{exp.train_fraction, seed, exp.folds});
        CvConfig cv = CvConfig::from(exp);
        cv.base.seed = seed;
        return cv_restart(split.train, split.test, cv);
    });
    rep.summarize();
    return rep;
}

struct SweepRow {
    Index P = 0;
    double time_fl = 0.0;
    double time_cv = 0.0;
    double mse_fl = 0.0;
    double mse_cv = 0.0;
    double mse_fl_std = 0.0;
    double mse_cv_std = 0.0;
};

/// FL and CV for each P, each using the first P grid values.
inline std::vector<SweepRow> sweep_p(const RawTable& raw, const ExperimentConfig& exp,
                                     const std::vector<Index>& p_values) {
    std::vector<SweepRow> rows;
    Index last = 0;
    for (const Index P : p_values) {
        if (P < 1 || P > static_cast<Index>(exp.thetas.size())) {
            throw std::invalid_argument("sweep_p: P = " + std::to_string(P) + " outside 1.." +
                                        std::to_string(exp.thetas.size()));
        }
        if (P <= last) {
            throw std::invalid_argument("sweep_p: p_values must be strictly ascending");
        }
        last = P;
        ExperimentConfig e = exp;
        e.thetas.assign(exp.thetas.begin(), exp.thetas.begin() + P);
        const RunReport fl = run_fl(raw, e);
        const RunReport cv = run_cv(raw, e);
        rows.push_back(SweepRow{P, fl.time_mean, cv.time_mean, fl.mse_mean, cv.mse_mean, fl.mse_std, cv.mse_std});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "P,time_fl,time_cv,mse_fl,mse_cv,mse_fl_std,mse_cv_std\n";
    for (const auto& r : rows) {
        std::ostringstream line;
        line.precision(17);
        line << r.P << ',' << r.time_fl << ',' << r.time_cv << ',' << r.mse_fl << ',' << r.mse_cv << ','
             << r.mse_fl_std << ',' << r.mse_cv_std << '\n';
        out << line.str();
    }
}

}  // namespace cpdfl

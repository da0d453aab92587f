// cpdfl: train / cross-validate / sweep / predict from the command line.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpdfl/cpdfl.hpp"

namespace {

struct Options {
    std::string data;
    std::string target = "-1";
    std::vector<std::string> drop;
    std::string delimiter = ",";
    bool header = false;
    std::string config_file;
    std::string preset;
    std::string reg;
    bool nonneg = false;
    double alpha = 0.0;
    double beta = 0.0;
    cpdfl::Index rank = 0;
    cpdfl::Index num_freq = 0;
    int epochs = 0;
    std::string thetas;
    std::uint64_t seed = 0;
    int restarts = 0;
    int folds = 0;
    double train_fraction = 0.0;
    bool fair_timing = false;
    bool concurrent = false;
    std::string lambda_design;
    std::string feature_cache;
    std::string out;
    std::string csv_out;
    std::string model_out;
    std::string p_values;
    std::string model_in;
};

void add_data_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--data", o.data, "CSV file with numeric columns")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", o.target, "target column: header name or index (negative counts from the end)");
    cmd->add_option("--drop", o.drop, "columns to ignore (name or index)")->delimiter(',');
    cmd->add_option("--delimiter", o.delimiter, "field separator, or 'whitespace'");
    cmd->add_flag("--header", o.header, "first line holds column names");
}

void add_training_options(CLI::App* cmd, Options& o) {
    add_data_options(cmd, o);
    cmd->add_option("--config", o.config_file, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "airfoil, energy, yacht, concrete, wine or airline");
    cmd->add_option("--reg", o.reg, "lambda regularizer: l1, l2 or fn");
    cmd->add_flag("--nonneg", o.nonneg, "constrain lambda >= 0");
    cmd->add_option("--alpha", o.alpha, "weight regularization");
    cmd->add_option("--beta", o.beta, "lambda regularization");
    cmd->add_option("--rank", o.rank, "CPD rank R");
    cmd->add_option("--num-freq", o.num_freq, "basis functions per input dimension");
    cmd->add_option("--epochs", o.epochs, "ALS epochs");
    cmd->add_option("--thetas", o.thetas, "comma separated periodicities");
    cmd->add_option("--seed", o.seed, "base seed; restart r uses seed + r");
    cmd->add_option("--restarts", o.restarts, "independent restarts");
    cmd->add_option("--folds", o.folds, "cross-validation folds");
    cmd->add_option("--train-fraction", o.train_fraction, "training share of each split");
    cmd->add_flag("--fair-timing", o.fair_timing, "force sequential execution");
    cmd->add_flag("--concurrent", o.concurrent, "run restarts / folds concurrently");
    cmd->add_option("--lambda-design", o.lambda_design, "stacked or real");
    cmd->add_option("--feature-cache", o.feature_cache, "auto, on or off");
}

std::vector<double> parse_doubles(const std::string& list) {
    std::vector<double> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("not a number: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

cpdfl::ExperimentConfig build_config(CLI::App* cmd, const Options& o) {
    // preset, then config file, then individual flags
    cpdfl::ExperimentConfig e;
    if (cmd->count("--preset")) e = cpdfl::preset(o.preset);
    if (!o.config_file.empty()) {
        std::ifstream in(o.config_file);
        cpdfl::apply_json(nlohmann::json::parse(in), e);
    }
    nlohmann::json overrides = nlohmann::json::object();
    if (cmd->count("--reg")) overrides["reg"] = o.reg;
    if (cmd->count("--nonneg")) overrides["nonneg"] = o.nonneg;
    if (cmd->count("--alpha")) overrides["alpha"] = o.alpha;
    if (cmd->count("--beta")) overrides["beta"] = o.beta;
    if (cmd->count("--rank")) overrides["rank"] = o.rank;
    if (cmd->count("--num-freq")) overrides["num_freq"] = o.num_freq;
    if (cmd->count("--epochs")) overrides["epochs"] = o.epochs;
    if (cmd->count("--thetas")) overrides["thetas"] = parse_doubles(o.thetas);
    if (cmd->count("--seed")) overrides["seed"] = o.seed;
    if (cmd->count("--restarts")) overrides["restarts"] = o.restarts;
    if (cmd->count("--folds")) overrides["folds"] = o.folds;
    if (cmd->count("--train-fraction")) overrides["train_fraction"] = o.train_fraction;
    if (cmd->count("--concurrent")) overrides["concurrent"] = o.concurrent;
    if (cmd->count("--lambda-design")) overrides["lambda_design"] = o.lambda_design;
    if (cmd->count("--feature-cache")) overrides["feature_cache"] = o.feature_cache;
    cpdfl::apply_json(overrides, e);
    if (o.fair_timing) e.concurrent = false;
    e.validate();
    return e;
}

cpdfl::RawTable read_data(const Options& o) {
    cpdfl::CsvOptions csv;
    if (o.delimiter == "whitespace" || o.delimiter == "ws") {
        csv.whitespace = true;
    } else if (o.delimiter == "\\t" || o.delimiter == "tab") {
        csv.delimiter = '\t';
    } else if (o.delimiter.size() == 1) {
        csv.delimiter = o.delimiter[0];
    } else {
        throw std::invalid_argument("--delimiter must be a single character, 'tab' or 'whitespace'");
    }
    csv.header = o.header;
    csv.target = o.target;
    csv.drop = o.drop;
    return cpdfl::load_csv(o.data, csv);
}

std::string default_csv_path(const std::string& out) {
    const auto dot = out.rfind('.');
    const auto slash = out.find_last_of('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        return out.substr(0, dot) + ".csv";
    }
    return out + ".csv";
}

void write_report(const cpdfl::RunReport& rep, const Options& o) {
    const auto j = cpdfl::to_json(rep);
    if (o.out.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream json_out(o.out);
    if (!json_out) throw std::runtime_error("cannot write " + o.out);
    json_out << j.dump(2) << '\n';
    const std::string csv_path = o.csv_out.empty() ? default_csv_path(o.out) : o.csv_out;
    std::ofstream csv_out(csv_path);
    if (!csv_out) throw std::runtime_error("cannot write " + csv_path);
    cpdfl::write_restart_csv(csv_out, rep);
}

void print_summary(const cpdfl::RunReport& rep) {
    std::cerr << rep.kind << " " << rep.dataset << ": test MSE " << rep.mse_mean << " +- " << rep.mse_std
              << ", mean time " << rep.time_mean << " s over " << rep.restarts.size() << " restarts\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CPD kernel machines with learned Fourier feature weights"};
    app.require_subcommand(1);
    Options o;

    auto* train = app.add_subcommand("train", "train the FL model over several restarts");
    add_training_options(train, o);
    train->add_option("--out", o.out, "RunReport JSON path (CSV goes next to it)");
    train->add_option("--csv", o.csv_out, "per-restart CSV path");
    train->add_option("--model-out", o.model_out, "save the first restart's model");

    auto* cv = app.add_subcommand("cv", "cross-validated CPD kernel machine baseline");
    add_training_options(cv, o);
    cv->add_option("--out", o.out, "RunReport JSON path (CSV goes next to it)");
    cv->add_option("--csv", o.csv_out, "per-restart CSV path");

    auto* sweep = app.add_subcommand("sweep", "FL vs CV as a function of the number of feature maps P");
    add_training_options(sweep, o);
    sweep->add_option("--p-values", o.p_values, "comma separated ascending P values (default 1..grid size)");
    sweep->add_option("--out", o.out, "CSV table path (stdout when omitted)");

    auto* predict = app.add_subcommand("predict", "predict with a saved model");
    add_data_options(predict, o);
    predict->add_option("--model", o.model_in, "model file written by train --model-out")
        ->required()
        ->check(CLI::ExistingFile);
    predict->add_option("--out", o.out, "prediction CSV path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto exp = build_config(train, o);
            const auto raw = read_data(o);
            const auto rep = cpdfl::run_fl(raw, exp);
            print_summary(rep);
            write_report(rep, o);
            if (!o.model_out.empty()) {
                const auto split = cpdfl::preprocess(raw, cpdfl::SplitSpec{exp.train_fraction, exp.train.seed,
                                                                            exp.folds});
                cpdfl::TrainConfig cfg = exp.train;
                const auto fr = cpdfl::fit(split.train.X, split.train.y, cfg, exp.family(raw.X.cols()));
                cpdfl::save_model(o.model_out, fr.model, &split.train.scaling);
            }
        } else if (*cv) {
            const auto exp = build_config(cv, o);
            const auto rep = cpdfl::run_cv(read_data(o), exp);
            print_summary(rep);
            write_report(rep, o);
        } else if (*sweep) {
            const auto exp = build_config(sweep, o);
            std::vector<cpdfl::Index> ps;
            if (o.p_values.empty()) {
                for (std::size_t p = 1; p <= exp.thetas.size(); ++p) ps.push_back(static_cast<cpdfl::Index>(p));
            } else {
                for (double v : parse_doubles(o.p_values)) ps.push_back(static_cast<cpdfl::Index>(v));
            }
            const auto rows = cpdfl::sweep_p(read_data(o), exp, ps);
            if (o.out.empty()) {
                cpdfl::write_sweep_csv(std::cout, rows);
            } else {
                std::ofstream out(o.out);
                if (!out) throw std::runtime_error("cannot write " + o.out);
                cpdfl::write_sweep_csv(out, rows);
            }
        } else if (*predict) {
            const auto stored = cpdfl::load_model(o.model_in);
            const auto raw = read_data(o);
            cpdfl::rmat X = raw.X;
            if (stored.scaling) X = stored.scaling->scale(X);
            cpdfl::rvec pred = cpdfl::predict_batch(X, stored.model);
            if (stored.scaling) pred = stored.scaling->unstandardize(pred);
            std::ofstream file;
            if (!o.out.empty()) {
                file.open(o.out);
                if (!file) throw std::runtime_error("cannot write " + o.out);
            }
            std::ostream& out = o.out.empty() ? std::cout : file;
            out.precision(17);
            out << "prediction,target\n";
            for (cpdfl::Index n = 0; n < pred.size(); ++n) out << pred(n) << ',' << raw.y(n) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "cpdfl: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

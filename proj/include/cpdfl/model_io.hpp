#pragma once

// Self-describing JSON model files. Doubles are written in shortest
// round-trip form, so save -> load reproduces every entry bit for bit.
//
// {
//   "format": "cpdfl-model", "version": 1,
//   "quantized": true, "num_freq": [I_1, ..., I_D], "thetas": [...],
//   "lambdas": [...], "rank": R,
//   "cores": [ {"rows": I_c, "cols": R, "entries": [[re, im], ...]}, ... ]
// }
// Core entries are listed in vec order (row index fastest). An optional
// "scaling" object (x_min, x_max, y_mean, y_std) lets predictions be made on
// raw inputs and reported in raw target units.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cpdfl/data.hpp"
#include "cpdfl/model.hpp"

namespace cpdfl {

inline constexpr const char* kModelFormat = "cpdfl-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::json to_json(const FlModel& model) {
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["quantized"] = model.family.quantized;
    j["num_freq"] = model.family.num_freq;
    j["thetas"] = model.family.thetas;
    j["lambdas"] = std::vector<double>(model.lambdas.data(), model.lambdas.data() + model.lambdas.size());
    j["rank"] = model.weights.rank();
    auto cores = nlohmann::json::array();
    for (const auto& core : model.weights.cores) {
        auto entries = nlohmann::json::array();
        for (Index c = 0; c < core.cols(); ++c) {
            for (Index r = 0; r < core.rows(); ++r) {
                entries.push_back({core(r, c).real(), core(r, c).imag()});
            }
        }
        cores.push_back({{"rows", core.rows()}, {"cols", core.cols()}, {"entries", std::move(entries)}});
    }
    j["cores"] = std::move(cores);
    return j;
}

inline FlModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != kModelFormat) {
        throw std::runtime_error("model file: missing or unknown format tag");
    }
    if (j.at("version").get<int>() != kModelVersion) {
        throw std::runtime_error("model file: unsupported version " + j.at("version").dump());
    }
    FlModel model;
    model.family.quantized = j.at("quantized").get<bool>();
    model.family.num_freq = j.at("num_freq").get<std::vector<Index>>();
    model.family.thetas = j.at("thetas").get<std::vector<double>>();
    const auto lambdas = j.at("lambdas").get<std::vector<double>>();
    model.lambdas = Eigen::Map<const rvec>(lambdas.data(), static_cast<Index>(lambdas.size()));
    for (const auto& jc : j.at("cores")) {
        const Index rows = jc.at("rows").get<Index>();
        const Index cols = jc.at("cols").get<Index>();
        const auto& entries = jc.at("entries");
        if (static_cast<Index>(entries.size()) != rows * cols) {
            throw std::runtime_error("model file: core entry count does not match its shape");
        }
        cmat core(rows, cols);
        Index k = 0;
        for (Index c = 0; c < cols; ++c) {
            for (Index r = 0; r < rows; ++r, ++k) {
                const auto& e = entries.at(static_cast<std::size_t>(k));
                core(r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
            }
        }
        model.weights.cores.push_back(std::move(core));
    }
    if (model.weights.rank() != j.at("rank").get<Index>()) {
        throw std::runtime_error("model file: rank field disagrees with the cores");
    }
    model.validate();
    return model;
}

inline nlohmann::json to_json(const Scaling& s) {
    return {{"x_min", std::vector<double>(s.x_min.data(), s.x_min.data() + s.x_min.size())},
            {"x_max", std::vector<double>(s.x_max.data(), s.x_max.data() + s.x_max.size())},
            {"y_mean", s.y_mean},
            {"y_std", s.y_std}};
}

inline Scaling scaling_from_json(const nlohmann::json& j) {
    Scaling s;
    const auto lo = j.at("x_min").get<std::vector<double>>();
    const auto hi = j.at("x_max").get<std::vector<double>>();
    if (lo.size() != hi.size()) {
        throw std::runtime_error("model file: scaling bounds differ in length");
    }
    s.x_min = Eigen::Map<const rvec>(lo.data(), static_cast<Index>(lo.size()));
    s.x_max = Eigen::Map<const rvec>(hi.data(), static_cast<Index>(hi.size()));
    s.y_mean = j.at("y_mean").get<double>();
    s.y_std = j.at("y_std").get<double>();
    return s;
}

struct StoredModel {
    FlModel model;
    std::optional<Scaling> scaling;
};

inline void save_model(const std::string& path, const FlModel& model, const Scaling* scaling = nullptr) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    nlohmann::json j = to_json(model);
    if (scaling != nullptr) {
        j["scaling"] = to_json(*scaling);
    }
    out << j.dump(1) << '\n';
}

inline StoredModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file " + path);
    }
    const auto j = nlohmann::json::parse(in);
    StoredModel stored{model_from_json(j), std::nullopt};
    if (j.contains("scaling")) {
        stored.scaling = scaling_from_json(j["scaling"]);
    }
    return stored;
}

}  // namespace cpdfl

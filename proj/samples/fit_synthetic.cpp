// Fits an FL model on a small synthetic problem and prints test MSE and the
// learned feature weights.

#include <cmath>
#include <iostream>
#include <random>

#include "cpdfl/cpdfl.hpp"

int main() {
    const cpdfl::Index n = 600;
    const cpdfl::Index d = 3;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);

    cpdfl::RawTable raw;
    raw.X.resize(n, d);
    raw.y.resize(n);
    for (cpdfl::Index i = 0; i < n; ++i) {
        for (cpdfl::Index j = 0; j < d; ++j) raw.X(i, j) = u(rng);
        raw.y(i) = std::sin(6.0 * raw.X(i, 0)) + raw.X(i, 1) * raw.X(i, 2) + noise(rng);
    }

    cpdfl::ExperimentConfig exp;
    exp.name = "synthetic";
    exp.num_freq = 4;
    exp.thetas = {10, 2, 25};
    exp.train.rank = 6;
    exp.train.restarts = 3;

    const auto fl = cpdfl::run_fl(raw, exp);
    std::cout << "FL test MSE " << fl.mse_mean << " +- " << fl.mse_std << "\n";
    for (const auto& r : fl.restarts) {
        std::cout << "  seed " << r.seed << " lambda:";
        for (double l : r.lambdas) std::cout << ' ' << l;
        std::cout << '\n';
    }
    const auto cv = cpdfl::run_cv(raw, exp);
    std::cout << "CV test MSE " << cv.mse_mean << " +- " << cv.mse_std << "\n";
    return 0;
}

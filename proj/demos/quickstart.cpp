// End-to-end run on a small problem: build a dataset, train a surrogate,
// then ask the solver for a 16x16 two-grain medium in [70, 80) and check it
// against the PDE.
#include <iostream>

#include "porogen/porogen.hpp"

using namespace porogen;

int main() {
    const int t = 16, w = 2;
    DatasetStats stats;
    auto records = build_dataset(600, t, w, 7, &stats);
    std::vector<LabeledSample> data;
    for (auto& r : records) data.push_back(r.sample);
    std::cout << "dataset: " << data.size() << " samples (" << stats.below_range << " rejected below 40)\n";

    TrainConfig cfg;
    cfg.epochs = 20;
    Rng rng(7);
    auto model = fold_thresholds(train(data, cfg, rng).model);
    std::cout << "train MAE: " << eval_mae(model, data) << '\n';

    const Interval band = half_open(70, 80);
    auto plan = plan_instance(t, w, {}, rng);
    auto f = encode_instance(plan, model, band);
    std::cout << "formula: " << f.num_vars() << " vars, " << f.constraints().size() << " constraints, "
              << f.reified().size() << " neurons\n";

    SolveOptions opt;
    opt.timeout_s = 60;
    auto out = solve(f, opt);
    std::cout << "status: " << to_string(out.status) << " in " << out.wall_seconds << " s\n";
    if (out.status != SolveStatus::sat) return 0;

    auto img = decode_image(out.assignment, f.meta).image;
    for (int i = 1; i <= t; ++i) {
        for (int j = 1; j <= t; ++j) std::cout << (img(i, j) ? '#' : '.');
        std::cout << '\n';
    }
    std::cout << "predicted " << forward(model, img) << ", PDE " << dispersion_x(img).d_int << '\n';
}

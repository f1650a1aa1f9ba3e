#pragma once

// Mini-batch training of the binarized surrogate on mean absolute error.
// Latent real weights are binarized on the forward pass; gradients flow
// through sign() with the straight-through estimator (identity where
// |pre-activation| <= 1, and for weights where |latent| <= 1).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "porogen/bnn.hpp"
#include "porogen/error.hpp"
#include "porogen/rng.hpp"

namespace porogen {

struct TrainConfig {
    std::vector<int> widths{32, 32};
    int epochs = 60;
    double learning_rate = 0.01;
    int batch_size = 64;
    double bias_learning_rate = 0.1;  // output bias lives on the label scale
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct TrainResult {
    BnnModel model;
    std::vector<double> epoch_mae;  // folded-model MAE on the training data, per epoch
    double initial_mae = 0.0;
};

namespace detail {

struct Adam {
    double lr;
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long step = 0;

    Adam(std::size_t n, double rate) : lr(rate), m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& p, const std::vector<double>& g, long t) {
        const double c1 = 1.0 - std::pow(b1, double(t)), c2 = 1.0 - std::pow(b2, double(t));
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1 - b1) * g[k];
            v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
    }
};

struct BlockCache {
    std::vector<double> x;      // batch x n_in input (+-1)
    std::vector<double> zhat;   // batch x n_out normalized pre-activation
    std::vector<double> y;      // batch x n_out batch-norm output
    std::vector<double> invstd; // n_out
};

} // namespace detail

/// Recomputes every block's running mean/sigma as exact population statistics
/// over `data`, propagating through earlier blocks in inference mode.
inline void recalibrate_batch_norm(BnnModel& m, const std::vector<LabeledSample>& data, double eps) {
    std::vector<std::vector<std::int8_t>> xs;
    xs.reserve(data.size());
    for (const auto& s : data) xs.push_back(input_vector(s.image));
    for (auto& b : m.blocks) {
        std::vector<double> sum(b.n_out, 0.0), sq(b.n_out, 0.0);
        for (const auto& x : xs) {
            for (int o = 0; o < b.n_out; ++o) {
                long z = 0;
                const std::int8_t* row = &b.weights[std::size_t(o) * b.n_in];
                for (int k = 0; k < b.n_in; ++k) z += row[k] * x[k];
                const double zz = double(z) + b.bias[o];
                sum[o] += zz;
                sq[o] += zz * zz;
            }
        }
        const double n = double(xs.size());
        for (int o = 0; o < b.n_out; ++o) {
            b.mean[o] = sum[o] / n;
            const double var = std::max(0.0, sq[o] / n - b.mean[o] * b.mean[o]);
            b.sigma[o] = std::sqrt(var + eps);
        }
        for (auto& x : xs) x = b.forward(x);
    }
}

inline TrainResult train(const std::vector<LabeledSample>& data, const TrainConfig& cfg, Rng& rng,
                         const std::function<void(int, double)>& on_epoch = {}) {
    require(!data.empty(), "train: empty dataset");
    require(cfg.epochs >= 1 && cfg.batch_size >= 1 && cfg.learning_rate > 0.0, "train: bad configuration");
    const int t = data.front().image.side();
    for (const auto& s : data) require(s.image.side() == t, "train: inconsistent image sizes");

    TrainResult res;
    BnnModel m(t, cfg.widths);
    {
        std::normal_distribution<double> init(0.0, 0.1);
        for (auto& b : m.blocks)
            for (auto& w : b.latent) w = std::clamp(init(rng), -1.0, 1.0);
        for (auto& w : m.out_latent) w = std::clamp(init(rng), -1.0, 1.0);
        std::vector<int> labels;
        for (const auto& s : data) labels.push_back(s.label);
        std::nth_element(labels.begin(), labels.begin() + labels.size() / 2, labels.end());
        m.out_bias = labels[labels.size() / 2];
        m.binarize();
    }
    recalibrate_batch_norm(m, data, cfg.bn_eps);
    res.initial_mae = eval_mae(fold_thresholds(m), data);

    const std::size_t nb = m.blocks.size();
    std::vector<detail::Adam> opt_w, opt_g, opt_b;
    for (const auto& b : m.blocks) {
        opt_w.emplace_back(b.latent.size(), cfg.learning_rate);
        opt_g.emplace_back(b.gamma.size(), cfg.learning_rate);
        opt_b.emplace_back(b.beta.size(), cfg.learning_rate);
    }
    detail::Adam opt_out(m.out_latent.size(), cfg.learning_rate);
    detail::Adam opt_bias(1, cfg.bias_learning_rate);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<detail::BlockCache> cache(nb);
    long step = 0;
    BnnModel best = m;
    double best_mae = res.initial_mae;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            if (bs < 2) continue;  // batch statistics need at least two samples
            ++step;

            // Forward.
            std::vector<double> x(bs * std::size_t(t) * t);
            for (std::size_t s = 0; s < bs; ++s) {
                const auto& px = data[order[start + s]].image.pixels();
                for (std::size_t k = 0; k < px.size(); ++k) x[s * px.size() + k] = px[k] ? 1.0 : -1.0;
            }
            for (std::size_t l = 0; l < nb; ++l) {
                auto& b = m.blocks[l];
                auto& c = cache[l];
                c.x = x;
                std::vector<double> z(bs * b.n_out, 0.0);
                for (std::size_t s = 0; s < bs; ++s) {
                    const double* xi = &x[s * b.n_in];
                    for (int o = 0; o < b.n_out; ++o) {
                        const std::int8_t* row = &b.weights[std::size_t(o) * b.n_in];
                        double acc = b.bias[o];
                        for (int k = 0; k < b.n_in; ++k) acc += row[k] * xi[k];
                        z[s * b.n_out + o] = acc;
                    }
                }
                c.zhat.assign(bs * b.n_out, 0.0);
                c.y.assign(bs * b.n_out, 0.0);
                c.invstd.assign(b.n_out, 0.0);
                std::vector<double> next(bs * b.n_out);
                for (int o = 0; o < b.n_out; ++o) {
                    double mu = 0.0, var = 0.0;
                    for (std::size_t s = 0; s < bs; ++s) mu += z[s * b.n_out + o];
                    mu /= double(bs);
                    for (std::size_t s = 0; s < bs; ++s) {
                        const double d = z[s * b.n_out + o] - mu;
                        var += d * d;
                    }
                    var /= double(bs);
                    c.invstd[o] = 1.0 / std::sqrt(var + cfg.bn_eps);
                    b.mean[o] = (1 - cfg.bn_momentum) * b.mean[o] + cfg.bn_momentum * mu;
                    const double run_var = b.sigma[o] * b.sigma[o] - cfg.bn_eps;
                    b.sigma[o] = std::sqrt((1 - cfg.bn_momentum) * std::max(0.0, run_var) +
                                           cfg.bn_momentum * var + cfg.bn_eps);
                    for (std::size_t s = 0; s < bs; ++s) {
                        const std::size_t k = s * b.n_out + o;
                        c.zhat[k] = (z[k] - mu) * c.invstd[o];
                        c.y[k] = b.gamma[o] * c.zhat[k] + b.beta[o];
                        next[k] = c.y[k] >= 0.0 ? 1.0 : -1.0;
                    }
                }
                x = std::move(next);
            }

            // Output and loss gradient (MAE).
            const std::size_t nk = m.out_weights.size();
            std::vector<double> g_x(bs * nk), g_out(nk, 0.0);
            double g_bias = 0.0;
            for (std::size_t s = 0; s < bs; ++s) {
                double d = m.out_bias;
                for (std::size_t k = 0; k < nk; ++k) d += m.out_weights[k] * x[s * nk + k];
                const double err = d - data[order[start + s]].label;
                if (!std::isfinite(err)) fail(ErrorKind::numeric, "train: loss diverged");
                const double g = (err > 0 ? 1.0 : err < 0 ? -1.0 : 0.0) / double(bs);
                g_bias += g;
                for (std::size_t k = 0; k < nk; ++k) {
                    g_out[k] += g * x[s * nk + k];
                    g_x[s * nk + k] = g * m.out_weights[k];
                }
            }
            for (std::size_t k = 0; k < nk; ++k)
                if (std::fabs(m.out_latent[k]) > 1.0) g_out[k] = 0.0;
            opt_out.update(m.out_latent, g_out, step);
            std::vector<double> bias_vec{m.out_bias};
            opt_bias.update(bias_vec, {g_bias}, step);
            m.out_bias = bias_vec[0];

            // Backward through blocks.
            for (std::size_t l = nb; l-- > 0;) {
                auto& b = m.blocks[l];
                auto& c = cache[l];
                const std::size_t no = b.n_out, ni = b.n_in;
                std::vector<double> g_y(bs * no);
                for (std::size_t k = 0; k < bs * no; ++k) g_y[k] = std::fabs(c.y[k]) <= 1.0 ? g_x[k] : 0.0;
                std::vector<double> g_gamma(no, 0.0), g_beta(no, 0.0), g_z(bs * no);
                for (std::size_t o = 0; o < no; ++o) {
                    double sum_gzh = 0.0, sum_gzh_zh = 0.0;
                    for (std::size_t s = 0; s < bs; ++s) {
                        const std::size_t k = s * no + o;
                        g_gamma[o] += g_y[k] * c.zhat[k];
                        g_beta[o] += g_y[k];
                        const double gzh = g_y[k] * b.gamma[o];
                        sum_gzh += gzh;
                        sum_gzh_zh += gzh * c.zhat[k];
                    }
                    for (std::size_t s = 0; s < bs; ++s) {
                        const std::size_t k = s * no + o;
                        const double gzh = g_y[k] * b.gamma[o];
                        g_z[k] = c.invstd[o] / double(bs) *
                                 (double(bs) * gzh - sum_gzh - c.zhat[k] * sum_gzh_zh);
                    }
                }
                std::vector<double> g_w(no * ni, 0.0);
                std::vector<double> g_in(l > 0 ? bs * ni : 0, 0.0);
                for (std::size_t s = 0; s < bs; ++s) {
                    const double* xi = &c.x[s * ni];
                    for (std::size_t o = 0; o < no; ++o) {
                        const double gz = g_z[s * no + o];
                        if (gz == 0.0) continue;
                        double* gw = &g_w[o * ni];
                        for (std::size_t k = 0; k < ni; ++k) gw[k] += gz * xi[k];
                        if (l > 0) {
                            const std::int8_t* row = &b.weights[o * ni];
                            double* gi = &g_in[s * ni];
                            for (std::size_t k = 0; k < ni; ++k) gi[k] += gz * row[k];
                        }
                    }
                }
                for (std::size_t k = 0; k < g_w.size(); ++k)
                    if (std::fabs(b.latent[k]) > 1.0) g_w[k] = 0.0;
                opt_w[l].update(b.latent, g_w, step);
                opt_g[l].update(b.gamma, g_gamma, step);
                opt_b[l].update(b.beta, g_beta, step);
                for (auto& w : b.latent) w = std::clamp(w, -1.0, 1.0);
                g_x = std::move(g_in);
            }
            for (auto& w : m.out_latent) w = std::clamp(w, -1.0, 1.0);
            m.binarize();
        }

        BnnModel snapshot = m;
        recalibrate_batch_norm(snapshot, data, cfg.bn_eps);
        const double mae = eval_mae(fold_thresholds(snapshot), data);
        if (!std::isfinite(mae)) fail(ErrorKind::numeric, "train: loss diverged");
        res.epoch_mae.push_back(mae);
        if (on_epoch) on_epoch(epoch, mae);
        if (mae < best_mae) {
            best_mae = mae;
            best = std::move(snapshot);
        }
    }
    res.model = std::move(best);
    return res;
}

} // namespace porogen

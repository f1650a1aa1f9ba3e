#pragma once

// Binarized neural network surrogate of the dispersion solver.
//
// Training form: K blocks of (binary linear -> batch norm -> sign) followed by
// a binary output row and a real bias. Deployment form: the same network with
// each batch norm folded into an integer threshold, which is what both integer
// inference and the constraint encoder consume. sign(0) = +1 throughout.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/grid.hpp"

namespace porogen {

struct LabeledSample {
    Image image;
    int label = 0;  // quantized dispersion coefficient
};

inline std::int8_t sign_pm(double v) { return v >= 0.0 ? 1 : -1; }

/// Input encoding shared by every network: void -> -1, grain -> +1.
inline std::vector<std::int8_t> input_vector(const Image& img) {
    std::vector<std::int8_t> x(img.size());
    for (std::size_t k = 0; k < img.size(); ++k) x[k] = img.pixels()[k] ? 1 : -1;
    return x;
}

// ---------------------------------------------------------------- training form

struct BnBlock {
    int n_in = 0;
    int n_out = 0;
    std::vector<double> latent;        // n_out x n_in, row-major; only used by training
    std::vector<std::int8_t> weights;  // sign(latent)
    std::vector<double> bias;          // per neuron, added before batch norm
    std::vector<double> gamma, beta, mean, sigma;

    BnBlock() = default;
    BnBlock(int in, int out)
        : n_in(in), n_out(out), latent(std::size_t(in) * out, 0.0), weights(std::size_t(in) * out, 1),
          bias(out, 0.0), gamma(out, 1.0), beta(out, 0.0), mean(out, 0.0), sigma(out, 1.0) {}

    void binarize() {
        for (std::size_t k = 0; k < latent.size(); ++k) weights[k] = sign_pm(latent[k]);
    }

    /// Inference with running statistics.
    std::vector<std::int8_t> forward(const std::vector<std::int8_t>& x) const {
        std::vector<std::int8_t> out(n_out);
        for (int o = 0; o < n_out; ++o) {
            long z = 0;
            const std::int8_t* row = &weights[std::size_t(o) * n_in];
            for (int k = 0; k < n_in; ++k) z += row[k] * x[k];
            const double y = gamma[o] * ((double(z) + bias[o]) - mean[o]) / sigma[o] + beta[o];
            out[o] = sign_pm(y);
        }
        return out;
    }
};

struct BnnModel {
    int t = 0;
    std::vector<BnBlock> blocks;
    std::vector<double> out_latent;
    std::vector<std::int8_t> out_weights;
    double out_bias = 0.0;

    BnnModel() = default;
    BnnModel(int side, const std::vector<int>& widths) : t(side) {
        require(side >= 1 && !widths.empty(), "BnnModel: need a positive side and at least one block");
        int in = side * side;
        for (int w : widths) {
            require(w >= 1, "BnnModel: block widths must be positive");
            blocks.emplace_back(in, w);
            in = w;
        }
        out_latent.assign(in, 0.0);
        out_weights.assign(in, 1);
    }

    void binarize() {
        for (auto& b : blocks) b.binarize();
        for (std::size_t k = 0; k < out_latent.size(); ++k) out_weights[k] = sign_pm(out_latent[k]);
    }

    std::vector<std::int8_t> hidden(const Image& img) const {
        require(img.side() == t, "BnnModel: image side does not match the model");
        auto x = input_vector(img);
        for (const auto& b : blocks) x = b.forward(x);
        return x;
    }

    /// Real-valued output of the training form (before bias rounding).
    double predict(const Image& img) const {
        auto x = hidden(img);
        double d = out_bias;
        for (std::size_t k = 0; k < x.size(); ++k) d += out_weights[k] * x[k];
        return d;
    }
};

// ---------------------------------------------------------------- deployment form

enum class Polarity : std::uint8_t { positive, negative, constant };

/// activation = +1 iff row . x >= threshold (or the fixed value for constant
/// neurons). Negative-scale neurons are stored with their row negated.
struct IntNeuron {
    std::vector<std::int8_t> row;
    std::int64_t threshold = 0;
    Polarity polarity = Polarity::positive;
    std::int8_t constant_value = 1;

    bool is_constant() const { return polarity == Polarity::constant; }
};

struct IntBlock {
    int n_in = 0;
    std::vector<IntNeuron> neurons;
};

struct IntBnnModel {
    int t = 0;
    std::vector<IntBlock> blocks;
    std::vector<std::int8_t> out_weights;
    std::int64_t out_bias = 0;

    std::vector<int> widths() const {
        std::vector<int> w;
        for (const auto& b : blocks) w.push_back(static_cast<int>(b.neurons.size()));
        return w;
    }
    std::int64_t output_min() const { return out_bias - static_cast<std::int64_t>(out_weights.size()); }
    std::int64_t output_max() const { return out_bias + static_cast<std::int64_t>(out_weights.size()); }

    void check_shape() const {
        require(t >= 1 && !blocks.empty(), "IntBnnModel: empty model");
        int in = t * t;
        for (const auto& b : blocks) {
            require(b.n_in == in && !b.neurons.empty(), "IntBnnModel: block dimensions do not chain");
            for (const auto& n : b.neurons)
                require(n.row.size() == std::size_t(in), "IntBnnModel: weight row has wrong length");
            in = static_cast<int>(b.neurons.size());
        }
        require(out_weights.size() == std::size_t(in), "IntBnnModel: output row has wrong length");
    }
};

inline std::vector<std::int8_t> block_forward(const IntBlock& b, const std::vector<std::int8_t>& x) {
    std::vector<std::int8_t> out(b.neurons.size());
    for (std::size_t o = 0; o < b.neurons.size(); ++o) {
        const auto& n = b.neurons[o];
        if (n.is_constant()) {
            out[o] = n.constant_value;
            continue;
        }
        std::int64_t s = 0;
        for (std::size_t k = 0; k < x.size(); ++k) s += n.row[k] * x[k];
        out[o] = s >= n.threshold ? 1 : -1;
    }
    return out;
}

/// Hidden activations of the last block, each in {-1, +1}.
inline std::vector<std::int8_t> hidden_activations(const IntBnnModel& m, const Image& img) {
    require(img.side() == m.t, "forward: image side " + std::to_string(img.side()) +
                                   " does not match model side " + std::to_string(m.t));
    auto x = input_vector(img);
    for (const auto& b : m.blocks) {
        require(x.size() == std::size_t(b.n_in), "forward: dimension mismatch");
        x = block_forward(b, x);
    }
    return x;
}

inline std::int64_t forward(const IntBnnModel& m, const Image& img) {
    auto x = hidden_activations(m, img);
    require(x.size() == m.out_weights.size(), "forward: output dimension mismatch");
    std::int64_t d = m.out_bias;
    for (std::size_t k = 0; k < x.size(); ++k) d += m.out_weights[k] * x[k];
    return d;
}

/// Folds each batch norm into an integer threshold on the binary pre-activation.
/// With z = row . x + bias (an integer plus a real offset) and
/// y = gamma (z - mean) / sigma + beta, y >= 0 is equivalent to
///   z >= mean - beta sigma / gamma   for gamma > 0,
///   z <= mean - beta sigma / gamma   for gamma < 0,
/// and to beta >= 0 for gamma = 0.
inline IntBnnModel fold_thresholds(const BnnModel& m) {
    IntBnnModel out;
    out.t = m.t;
    for (const auto& b : m.blocks) {
        IntBlock ib;
        ib.n_in = b.n_in;
        const auto lim = static_cast<std::int64_t>(b.n_in);
        for (int o = 0; o < b.n_out; ++o) {
            require(b.sigma[o] > 0.0, "fold_thresholds: batch-norm sigma must be positive");
            IntNeuron n;
            n.row.assign(b.weights.begin() + std::ptrdiff_t(o) * b.n_in,
                         b.weights.begin() + std::ptrdiff_t(o + 1) * b.n_in);
            if (b.gamma[o] == 0.0) {
                n.polarity = Polarity::constant;
                n.constant_value = sign_pm(b.beta[o]);
                n.threshold = 0;
            } else {
                const double cut = b.mean[o] - b.beta[o] * b.sigma[o] / b.gamma[o] - b.bias[o];
                double c;
                if (b.gamma[o] > 0.0) {
                    n.polarity = Polarity::positive;
                    c = std::ceil(cut);
                } else {
                    n.polarity = Polarity::negative;
                    for (auto& w : n.row) w = static_cast<std::int8_t>(-w);
                    c = -std::floor(cut);
                }
                // row . x lies in [-n_in, n_in]; thresholds outside are saturated.
                if (c < double(-lim)) n.threshold = -lim;
                else if (c > double(lim + 1)) n.threshold = lim + 1;
                else n.threshold = static_cast<std::int64_t>(c);
            }
            ib.neurons.push_back(std::move(n));
        }
        out.blocks.push_back(std::move(ib));
    }
    out.out_weights = m.out_weights;
    out.out_bias = static_cast<std::int64_t>(std::llround(m.out_bias));
    return out;
}

inline double eval_mae(const IntBnnModel& m, const std::vector<LabeledSample>& data) {
    require(!data.empty(), "eval_mae: empty dataset");
    double total = 0.0;
    for (const auto& s : data) total += std::fabs(double(forward(m, s.image) - s.label));
    return total / double(data.size());
}

// ---------------------------------------------------------------- serialization
//
//   BNNv1 <t> <K> <n_1> ... <n_K>
//   block <k>                      (k = 1..K)
//   <n_k lines of n_in characters from {'+','-'}>
//   thr <tok_1> ... <tok_{n_k}>    tok = <int>:p | <int>:n | c:+ | c:-
//   out <n_K characters from {'+','-'}>
//   bias <B>
//   end

inline std::string sign_string(const std::vector<std::int8_t>& v) {
    std::string s(v.size(), '+');
    for (std::size_t k = 0; k < v.size(); ++k)
        if (v[k] < 0) s[k] = '-';
    return s;
}

inline void write_model(std::ostream& os, const IntBnnModel& m) {
    m.check_shape();
    os << "BNNv1 " << m.t << ' ' << m.blocks.size();
    for (int w : m.widths()) os << ' ' << w;
    os << '\n';
    for (std::size_t k = 0; k < m.blocks.size(); ++k) {
        os << "block " << (k + 1) << '\n';
        for (const auto& n : m.blocks[k].neurons) os << sign_string(n.row) << '\n';
        os << "thr";
        for (const auto& n : m.blocks[k].neurons) {
            switch (n.polarity) {
            case Polarity::positive: os << ' ' << n.threshold << ":p"; break;
            case Polarity::negative: os << ' ' << n.threshold << ":n"; break;
            case Polarity::constant: os << " c:" << (n.constant_value > 0 ? '+' : '-'); break;
            }
        }
        os << '\n';
    }
    os << "out " << sign_string(m.out_weights) << '\n';
    os << "bias " << m.out_bias << '\n';
    os << "end\n";
}

inline std::string serialize(const IntBnnModel& m) {
    std::ostringstream os;
    write_model(os, m);
    return os.str();
}

namespace detail {

inline std::vector<std::int8_t> parse_signs(const std::string& s, std::size_t expected, const char* what) {
    if (s.size() != expected)
        fail(ErrorKind::io, std::string("model file: ") + what + " has length " + std::to_string(s.size()) +
                                ", expected " + std::to_string(expected));
    std::vector<std::int8_t> v(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '+') v[k] = 1;
        else if (s[k] == '-') v[k] = -1;
        else fail(ErrorKind::io, std::string("model file: bad character in ") + what);
    }
    return v;
}

inline void expect_word(std::istream& is, const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word)
        fail(ErrorKind::io, "model file: expected '" + word + "', found '" + got + "'");
}

} // namespace detail

inline IntBnnModel read_model(std::istream& is) {
    IntBnnModel m;
    std::size_t k_blocks = 0;
    detail::expect_word(is, "BNNv1");
    if (!(is >> m.t >> k_blocks) || m.t < 1 || k_blocks < 1) fail(ErrorKind::io, "model file: bad header");
    std::vector<int> widths(k_blocks);
    for (auto& w : widths)
        if (!(is >> w) || w < 1) fail(ErrorKind::io, "model file: bad block width");
    int in = m.t * m.t;
    for (std::size_t k = 0; k < k_blocks; ++k) {
        detail::expect_word(is, "block");
        std::size_t idx = 0;
        if (!(is >> idx) || idx != k + 1) fail(ErrorKind::io, "model file: blocks out of order");
        IntBlock b;
        b.n_in = in;
        b.neurons.resize(widths[k]);
        for (auto& n : b.neurons) {
            std::string row;
            is >> row;
            n.row = detail::parse_signs(row, std::size_t(in), "weight row");
        }
        detail::expect_word(is, "thr");
        for (auto& n : b.neurons) {
            std::string tok;
            is >> tok;
            auto colon = tok.find(':');
            if (colon == std::string::npos || colon + 2 != tok.size())
                fail(ErrorKind::io, "model file: bad threshold token '" + tok + "'");
            const char tag = tok.back();
            const std::string head = tok.substr(0, colon);
            if (head == "c") {
                n.polarity = Polarity::constant;
                if (tag != '+' && tag != '-') fail(ErrorKind::io, "model file: bad constant '" + tok + "'");
                n.constant_value = tag == '+' ? 1 : -1;
            } else {
                if (tag == 'p') n.polarity = Polarity::positive;
                else if (tag == 'n') n.polarity = Polarity::negative;
                else fail(ErrorKind::io, "model file: bad polarity in '" + tok + "'");
                try {
                    std::size_t used = 0;
                    n.threshold = std::stoll(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                } catch (const std::exception&) {
                    fail(ErrorKind::io, "model file: bad threshold '" + tok + "'");
                }
            }
        }
        m.blocks.push_back(std::move(b));
        in = widths[k];
    }
    detail::expect_word(is, "out");
    std::string out;
    is >> out;
    m.out_weights = detail::parse_signs(out, std::size_t(in), "output row");
    detail::expect_word(is, "bias");
    if (!(is >> m.out_bias)) fail(ErrorKind::io, "model file: bad bias");
    detail::expect_word(is, "end");
    m.check_shape();
    return m;
}

inline IntBnnModel deserialize(const std::string& text) {
    std::istringstream is(text);
    return read_model(is);
}

} // namespace porogen

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "simex/errors.hpp"
#include "simex/rng.hpp"

namespace simex {

enum class Activation { Relu, Identity };

/// Dense layer, weights out x in row-major.
struct DenseLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> weights; // out*in
    std::vector<double> bias;    // out
    Activation act = Activation::Relu;

    double w(std::size_t r, std::size_t c) const { return weights[r * in + c]; }
    double& w(std::size_t r, std::size_t c) { return weights[r * in + c]; }
};

/// Small fully connected classifier with a softmax head. Immutable once
/// trained; forward/relevance passes are const and concurrently callable.
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in; }
    std::size_t output_dim() const { return layers.back().out; }
    std::size_t layer_count() const { return layers.size(); }

    static DenseNet make(const std::vector<std::size_t>& dims, Rng& rng) {
        DenseNet net;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            layer.in = dims[l];
            layer.out = dims[l + 1];
            layer.act = (l + 2 == dims.size()) ? Activation::Identity : Activation::Relu;
            const double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
            layer.weights.resize(layer.in * layer.out);
            layer.bias.assign(layer.out, 0.0);
            std::normal_distribution<double> g(0.0, scale);
            for (auto& v : layer.weights) v = g(rng);
            net.layers.push_back(std::move(layer));
        }
        return net;
    }
};

struct ForwardPass {
    // activations[0] is the input, activations[l+1] the output of layer l
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> preacts; // z per layer
    std::vector<double> logits;
    std::vector<double> probs;
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - mx);
        sum += p[k];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline ForwardPass forward(const DenseNet& net, const std::vector<double>& input) {
    if (input.size() != net.input_dim()) throw contract_error("forward: input dimension mismatch");
    ForwardPass fp;
    fp.activations.push_back(input);
    for (const auto& layer : net.layers) {
        const auto& a = fp.activations.back();
        std::vector<double> z(layer.out, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            double acc = layer.bias[r];
            for (std::size_t c = 0; c < layer.in; ++c) acc += layer.w(r, c) * a[c];
            z[r] = acc;
        }
        fp.preacts.push_back(z);
        std::vector<double> out(z);
        if (layer.act == Activation::Relu)
            for (auto& v : out) v = std::max(0.0, v);
        fp.activations.push_back(std::move(out));
    }
    fp.logits = fp.preacts.back();
    fp.probs = softmax(fp.logits);
    return fp;
}

/// Shannon entropy of a softmax output, divided by ln K. 1 at the uniform
/// distribution, 0 at a one-hot output.
inline double normalized_entropy(const std::vector<double>& probs) {
    if (probs.size() < 2) throw contract_error("normalized_entropy needs >= 2 classes");
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h / std::log(static_cast<double>(probs.size()));
}

/// Per-layer relevance matrix (dense layers: a column vector). layer_index 0
/// is the input, L the output of hidden layer L.
struct Heatmap {
    std::size_t layer_index = 0;
    std::vector<double> values; // N rows, M = 1
    long source = -1;           // input identifier, -1 when synthetic
};

/// Epsilon-rule relevance propagation from the winning output neuron's
/// pre-softmax score down to the requested activation level.
inline Heatmap lrp(const DenseNet& net, const ForwardPass& fp, std::size_t target_layer,
                   double epsilon = 1e-2) {
    if (target_layer >= net.layer_count())
        throw contract_error("lrp: target layer out of range");
    std::size_t winner = 0;
    for (std::size_t k = 1; k < fp.logits.size(); ++k)
        if (fp.logits[k] > fp.logits[winner]) winner = k;

    std::vector<double> rel(net.output_dim(), 0.0);
    rel[winner] = fp.logits[winner];

    // layers[l] maps activation level l to level l+1; walk top-down until the
    // relevance sits at level target_layer
    for (std::size_t l = net.layer_count(); l-- > target_layer;) {
        const auto& layer = net.layers[l];
        const auto& a = fp.activations[l];
        const auto& z = fp.preacts[l];
        std::vector<double> lower(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            if (rel[r] == 0.0) continue;
            const double denom = z[r] + (z[r] >= 0.0 ? epsilon : -epsilon);
            const double scale = rel[r] / denom;
            for (std::size_t c = 0; c < layer.in; ++c)
                lower[c] += a[c] * layer.w(r, c) * scale;
        }
        rel = std::move(lower);
    }
    Heatmap h;
    h.layer_index = target_layer;
    h.values = std::move(rel);
    return h;
}

inline Heatmap lrp(const DenseNet& net, const std::vector<double>& input,
                   std::size_t target_layer, double epsilon = 1e-2) {
    return lrp(net, forward(net, input), target_layer, epsilon);
}

struct LabeledSample {
    std::vector<double> input;
    int label = 0;
};

struct TrainConfig {
    std::size_t epochs = 30;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
};

namespace detail {

// accumulate gradients for one sample; returns its cross-entropy loss
inline double backprop(const DenseNet& net, const ForwardPass& fp, int label,
                       std::vector<std::vector<double>>& grad_w,
                       std::vector<std::vector<double>>& grad_b) {
    const std::size_t L = net.layer_count();
    std::vector<double> delta = fp.probs;
    delta[static_cast<std::size_t>(label)] -= 1.0; // dLoss/dlogits
    const double loss = -std::log(std::max(fp.probs[static_cast<std::size_t>(label)], 1e-300));

    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = net.layers[l];
        const auto& a = fp.activations[l];
        if (layer.act == Activation::Relu)
            for (std::size_t r = 0; r < layer.out; ++r)
                if (fp.preacts[l][r] <= 0.0) delta[r] = 0.0;
        for (std::size_t r = 0; r < layer.out; ++r) {
            grad_b[l][r] += delta[r];
            for (std::size_t c = 0; c < layer.in; ++c)
                grad_w[l][r * layer.in + c] += delta[r] * a[c];
        }
        if (l > 0) {
            std::vector<double> lower(layer.in, 0.0);
            for (std::size_t r = 0; r < layer.out; ++r)
                for (std::size_t c = 0; c < layer.in; ++c)
                    lower[c] += layer.w(r, c) * delta[r];
            delta = std::move(lower);
        }
    }
    return loss;
}

} // namespace detail

/// Mini-batch SGD on softmax cross-entropy. Returns a new net; the input net
/// is untouched. Deterministic for a given seed.
inline DenseNet train(const DenseNet& start, const std::vector<LabeledSample>& dataset,
                      const TrainConfig& cfg) {
    if (dataset.empty()) throw contract_error("train: empty dataset");
    DenseNet net = start;
    Rng rng = make_rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<double>> grad_w(net.layer_count()), grad_b(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        grad_w[l].resize(net.layers[l].weights.size());
        grad_b[l].resize(net.layers[l].bias.size());
    }

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            for (auto& g : grad_w) std::fill(g.begin(), g.end(), 0.0);
            for (auto& g : grad_b) std::fill(g.begin(), g.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& s = dataset[order[k]];
                batch_loss += detail::backprop(net, forward(net, s.input), s.label, grad_w, grad_b);
            }
            if (!std::isfinite(batch_loss))
                throw training_error("non-finite loss at epoch " + std::to_string(epoch));
            const double step = cfg.learning_rate / static_cast<double>(end - begin);
            for (std::size_t l = 0; l < net.layer_count(); ++l) {
                auto& layer = net.layers[l];
                for (std::size_t k = 0; k < layer.weights.size(); ++k)
                    layer.weights[k] -= step * grad_w[l][k];
                for (std::size_t k = 0; k < layer.bias.size(); ++k)
                    layer.bias[k] -= step * grad_b[l][k];
            }
        }
    }
    return net;
}

inline double accuracy(const DenseNet& net, const std::vector<LabeledSample>& dataset) {
    if (dataset.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : dataset) {
        const auto fp = forward(net, s.input);
        const auto best = std::distance(fp.probs.begin(),
                                        std::max_element(fp.probs.begin(), fp.probs.end()));
        if (static_cast<int>(best) == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

// --- serialization: versioned textual matrix format -----------------------

inline void save_net(const DenseNet& net, std::ostream& os) {
    os << "densenet 1\n" << net.layer_count() << "\n";
    os.precision(17);
    for (const auto& layer : net.layers) {
        os << layer.in << " " << layer.out << " "
           << (layer.act == Activation::Relu ? "relu" : "identity") << "\n";
        for (std::size_t k = 0; k < layer.weights.size(); ++k)
            os << layer.weights[k] << (k + 1 == layer.weights.size() ? '\n' : ' ');
        for (std::size_t k = 0; k < layer.bias.size(); ++k)
            os << layer.bias[k] << (k + 1 == layer.bias.size() ? '\n' : ' ');
    }
}

inline DenseNet load_net(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "densenet" || version != 1)
        throw io_error("not a densenet v1 model file");
    std::size_t count = 0;
    is >> count;
    DenseNet net;
    for (std::size_t l = 0; l < count; ++l) {
        DenseLayer layer;
        std::string act;
        if (!(is >> layer.in >> layer.out >> act)) throw io_error("truncated model file");
        layer.act = act == "relu" ? Activation::Relu : Activation::Identity;
        layer.weights.resize(layer.in * layer.out);
        layer.bias.resize(layer.out);
        for (auto& v : layer.weights)
            if (!(is >> v)) throw io_error("truncated model weights");
        for (auto& v : layer.bias)
            if (!(is >> v)) throw io_error("truncated model bias");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline void save_net_file(const DenseNet& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write model file: " + path);
    save_net(net, os);
}

inline DenseNet load_net_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot read model file: " + path);
    return load_net(is);
}

} // namespace simex

#pragma once

// Multilayer perceptron classifier over rule features: rectifier hidden
// layers, softmax output, alpha-balanced focal loss, Adam.

#include "lpdecomp/dataset.hpp"
#include "lpdecomp/error.hpp"
#include "lpdecomp/features.hpp"
#include "lpdecomp/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace lpdecomp {

using ClassProbs = std::array<double, kNumClasses>;

inline constexpr double kProbEpsilon = 1e-12;

/// Seeded source for initialisation, splitting and shuffling. Only the raw
/// engine output is used, so sequences are identical across standard libraries.
class Random {
public:
    explicit Random(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    double normal() {
        if (spare_) {
            double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = 0;
        while (u1 <= 0)
            u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2 * M_PI * u2);
        return r * std::cos(2 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

/// Per-feature standardisation fitted on the training split.
struct Scaler {
    FeatureArray mean{};
    FeatureArray scale{1, 1, 1, 1, 1, 1};

    static Scaler identity() { return {}; }

    FeatureArray apply(const FeatureArray& x) const {
        FeatureArray out{};
        for (std::size_t i = 0; i < kNumFeatures; ++i)
            out[i] = (x[i] - mean[i]) / scale[i];
        return out;
    }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

inline Scaler fit_scaler(std::span<const FeatureArray> rows, std::vector<std::string>* warnings = nullptr) {
    Scaler s;
    if (rows.empty())
        return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        double sum = 0;
        for (const auto& r : rows)
            sum += r[f];
        double mean = sum / n;
        double var = 0;
        for (const auto& r : rows)
            var += (r[f] - mean) * (r[f] - mean);
        double sd = std::sqrt(var / n);
        s.mean[f] = mean;
        if (sd > 0) {
            s.scale[f] = sd;
        } else {
            s.scale[f] = 1;
            if (warnings)
                warnings->push_back("feature f" + std::to_string(f + 1) + " has zero variance; scaled by 1");
        }
    }
    return s;
}

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights; // outputs x inputs, row-major
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct TrainingMeta {
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    double split = 0.7;
    std::size_t batch = 32;
    double learning_rate = 1e-3;

    friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    Scaler scaler;
    ClassProbs alpha{1, 1, 1};
    double gamma = 2;
    TrainingMeta meta;

    /// He-initialised network kNumFeatures -> hidden... -> kNumClasses.
    static MlpModel create(std::span<const std::size_t> hidden, Random& rng) {
        if (hidden.empty())
            throw std::invalid_argument("at least one hidden layer is required");
        MlpModel m;
        std::size_t in = kNumFeatures;
        std::vector<std::size_t> sizes(hidden.begin(), hidden.end());
        sizes.push_back(kNumClasses);
        for (auto out : sizes) {
            DenseLayer l{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
            double sd = std::sqrt(2.0 / static_cast<double>(in));
            for (auto& w : l.weights)
                w = sd * rng.normal();
            m.layers.push_back(std::move(l));
            in = out;
        }
        return m;
    }

    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> s;
        if (!layers.empty())
            s.push_back(layers.front().inputs);
        for (const auto& l : layers)
            s.push_back(l.outputs);
        return s;
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

inline void softmax_inplace(std::span<double> z) {
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z)
        v /= sum;
}

/// -alpha_t (1 - p_t)^gamma log(p_t), with p_t clamped to [eps, 1 - eps].
inline double focal_loss(std::span<const double> probs, std::size_t true_class, std::span<const double> alpha,
                         double gamma) {
    if (true_class >= probs.size() || alpha.size() != probs.size())
        throw DimensionMismatch("focal loss: " + std::to_string(probs.size()) + " probabilities, " +
                                std::to_string(alpha.size()) + " class weights, class " +
                                std::to_string(true_class));
    double pt = std::clamp(probs[true_class], kProbEpsilon, 1.0 - kProbEpsilon);
    if (probs[true_class] >= 1.0)
        return 0.0;
    return -alpha[true_class] * std::pow(1.0 - pt, gamma) * std::log(pt);
}

/// Gradient of focal_loss(softmax(z)) with respect to the logits z.
inline std::vector<double> focal_loss_logit_gradient(std::span<const double> probs, std::size_t true_class,
                                                     std::span<const double> alpha, double gamma) {
    if (true_class >= probs.size() || alpha.size() != probs.size())
        throw DimensionMismatch("focal loss gradient: dimension mismatch");
    std::vector<double> g(probs.size(), 0.0);
    double p = probs[true_class];
    if (p <= kProbEpsilon || p >= 1.0 - kProbEpsilon)
        return g; // clamped region
    double q = 1.0 - p;
    double dl_dp = -alpha[true_class] * (std::pow(q, gamma) / p - (gamma == 0 ? 0.0 : gamma * std::pow(q, gamma - 1) * std::log(p)));
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = dl_dp * p * ((j == true_class ? 1.0 : 0.0) - probs[j]);
    return g;
}

namespace detail {

struct Activations {
    std::vector<std::vector<double>> values; // values[0] = input, values[L] = softmax output
    std::vector<std::vector<double>> pre;    // pre-activations per layer
};

inline Activations forward(const MlpModel& m, const FeatureArray& scaled) {
    Activations a;
    a.values.emplace_back(scaled.begin(), scaled.end());
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const auto& l = m.layers[li];
        const auto& x = a.values.back();
        std::vector<double> z(l.outputs);
        for (std::size_t o = 0; o < l.outputs; ++o) {
            double s = l.bias[o];
            const double* w = &l.weights[o * l.inputs];
            for (std::size_t i = 0; i < l.inputs; ++i)
                s += w[i] * x[i];
            z[o] = s;
        }
        a.pre.push_back(z);
        if (li + 1 < m.layers.size()) {
            for (auto& v : z)
                v = std::max(0.0, v);
        } else {
            softmax_inplace(z);
        }
        a.values.push_back(std::move(z));
    }
    return a;
}

} // namespace detail

inline ClassProbs probabilities_scaled(const MlpModel& m, const FeatureArray& scaled) {
    auto a = detail::forward(m, scaled);
    ClassProbs p{};
    std::copy_n(a.values.back().begin(), kNumClasses, p.begin());
    return p;
}

struct Prediction {
    Label label = Label::Decomp;
    ClassProbs probabilities{};
};

/// Argmax of the softmax output; ties go to the lowest class index.
inline Prediction predict(const MlpModel& m, const FeatureArray& raw) {
    Prediction p;
    p.probabilities = probabilities_scaled(m, m.scaler.apply(raw));
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c)
        if (p.probabilities[c] > p.probabilities[best])
            best = c;
    p.label = static_cast<Label>(best);
    return p;
}

/// Same shape as the model's parameters.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    static Gradients zeros_like(const MlpModel& m) {
        Gradients g;
        for (const auto& l : m.layers) {
            g.weights.emplace_back(l.weights.size(), 0.0);
            g.bias.emplace_back(l.bias.size(), 0.0);
        }
        return g;
    }
};

/// Mean focal loss over a batch of already-scaled inputs; accumulates the
/// gradient of that mean into `grad` when given.
inline double batch_loss(const MlpModel& m, std::span<const FeatureArray> scaled, std::span<const std::size_t> labels,
                         Gradients* grad) {
    const double inv = 1.0 / static_cast<double>(scaled.size());
    double total = 0;
    for (std::size_t n = 0; n < scaled.size(); ++n) {
        auto a = detail::forward(m, scaled[n]);
        const auto& probs = a.values.back();
        total += focal_loss(probs, labels[n], m.alpha, m.gamma);
        if (!grad)
            continue;
        auto delta = focal_loss_logit_gradient(probs, labels[n], m.alpha, m.gamma);
        for (auto& d : delta)
            d *= inv;
        for (std::size_t li = m.layers.size(); li-- > 0;) {
            const auto& l = m.layers[li];
            const auto& x = a.values[li];
            auto& gw = grad->weights[li];
            auto& gb = grad->bias[li];
            for (std::size_t o = 0; o < l.outputs; ++o) {
                gb[o] += delta[o];
                for (std::size_t i = 0; i < l.inputs; ++i)
                    gw[o * l.inputs + i] += delta[o] * x[i];
            }
            if (li == 0)
                break;
            std::vector<double> prev(l.inputs, 0.0);
            for (std::size_t o = 0; o < l.outputs; ++o)
                for (std::size_t i = 0; i < l.inputs; ++i)
                    prev[i] += l.weights[o * l.inputs + i] * delta[o];
            const auto& z = a.pre[li - 1];
            for (std::size_t i = 0; i < l.inputs; ++i)
                prev[i] *= z[i] > 0 ? 1.0 : 0.0;
            delta = std::move(prev);
        }
    }
    return total * inv;
}

/// Adam with bias correction.
class Adam {
public:
    Adam(const MlpModel& m, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Gradients::zeros_like(m)), v_(Gradients::zeros_like(m)) {}

    void step(MlpModel& model, const Gradients& g) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t li = 0; li < model.layers.size(); ++li) {
            update(model.layers[li].weights, g.weights[li], m_.weights[li], v_.weights[li], c1, c2);
            update(model.layers[li].bias, g.bias[li], m_.bias[li], v_.bias[li], c1, c2);
        }
    }

private:
    void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
                double c1, double c2) const {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
            p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }

    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    Gradients m_, v_;
};

/// Train/test indices preserving per-class proportions: each class contributes
/// round(split * count) examples to the training side.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const Dataset& ds, double split,
                                                                                      Random& rng) {
    std::vector<std::size_t> train, test;
    for (auto label : kLabels) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.examples[i].label == label)
                idx.push_back(i);
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(idx.size())));
        train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

/// Inverse class frequency normalised to mean 1.
inline ClassProbs inverse_frequency_alpha(const ClassCounts& counts) {
    ClassProbs a{};
    double total = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        a[c] = counts[c] ? 1.0 / static_cast<double>(counts[c]) : 0.0;
        total += a[c];
    }
    for (auto& v : a)
        v *= static_cast<double>(kNumClasses) / total;
    return a;
}

inline EvalReport evaluate(const MlpModel& m, std::span<const LabeledExample> test) {
    std::vector<std::size_t> truth, predicted;
    std::vector<double> scores;
    for (const auto& e : test) {
        auto p = predict(m, e.features);
        truth.push_back(static_cast<std::size_t>(e.label));
        predicted.push_back(static_cast<std::size_t>(p.label));
        scores.insert(scores.end(), p.probabilities.begin(), p.probabilities.end());
    }
    return evaluate_predictions(kNumClasses, truth, predicted, scores);
}

struct TrainConfig {
    std::size_t epochs = 300;
    double split = 0.7;
    std::vector<std::size_t> hidden{32, 32};
    double learning_rate = 1e-3;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
    double gamma = 2.0;
    std::optional<ClassProbs> alpha; ///< defaults to inverse_frequency_alpha
};

struct TrainResult {
    MlpModel model;
    EvalReport test_report;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<double> epoch_loss;
    std::vector<std::string> warnings;
};

/// Deterministic for a fixed configuration: the seed drives the split, the
/// initial weights and the per-epoch shuffles, in that order.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
    if (!ds.has_every_class()) {
        auto c = ds.class_counts();
        throw DegenerateDatasetError("training needs every class; counts decomp=" + std::to_string(c[0]) +
                                     " do-not-decomp=" + std::to_string(c[1]) + " indifferent=" + std::to_string(c[2]));
    }
    TrainResult out;
    Random rng(cfg.seed);
    std::tie(out.train_indices, out.test_indices) = stratified_split(ds, cfg.split, rng);

    out.model = MlpModel::create(cfg.hidden, rng);
    out.model.gamma = cfg.gamma;
    out.model.meta = {cfg.epochs, cfg.seed, cfg.split, cfg.batch, cfg.learning_rate};

    std::vector<FeatureArray> raw;
    ClassCounts train_counts{};
    for (auto i : out.train_indices) {
        raw.push_back(ds.examples[i].features);
        ++train_counts[static_cast<std::size_t>(ds.examples[i].label)];
    }
    out.model.scaler = fit_scaler(raw, &out.warnings);
    out.model.alpha = cfg.alpha ? *cfg.alpha : inverse_frequency_alpha(train_counts);

    std::vector<FeatureArray> scaled;
    std::vector<std::size_t> labels;
    for (auto i : out.train_indices) {
        scaled.push_back(out.model.scaler.apply(ds.examples[i].features));
        labels.push_back(static_cast<std::size_t>(ds.examples[i].label));
    }

    Adam adam(out.model, cfg.learning_rate);
    std::vector<std::size_t> order(scaled.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(cfg.batch, 1);
    std::vector<FeatureArray> bx;
    std::vector<std::size_t> by;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_total = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::size_t end = std::min(order.size(), start + batch);
            bx.clear();
            by.clear();
            for (std::size_t k = start; k < end; ++k) {
                bx.push_back(scaled[order[k]]);
                by.push_back(labels[order[k]]);
            }
            auto g = Gradients::zeros_like(out.model);
            epoch_total += batch_loss(out.model, bx, by, &g) * static_cast<double>(end - start);
            adam.step(out.model, g);
        }
        out.epoch_loss.push_back(order.empty() ? 0.0 : epoch_total / static_cast<double>(order.size()));
    }

    std::vector<LabeledExample> test;
    for (auto i : out.test_indices)
        test.push_back(ds.examples[i]);
    out.test_report = evaluate(out.model, test);
    return out;
}

// ---- persistence ----

inline constexpr std::string_view kModelMagic = "lpdecomp-mlp";
inline constexpr int kModelVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double parse_hexfloat(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ModelFormatError("bad number '" + s + "'");
    return v;
}

template <typename Range>
std::string join_hex(const Range& r) {
    std::string out;
    for (double v : r) {
        out += ' ';
        out += hexfloat(v);
    }
    return out;
}

inline std::vector<double> read_values(std::istringstream& line, std::size_t n) {
    std::vector<double> out;
    std::string tok;
    while (out.size() < n && line >> tok)
        out.push_back(parse_hexfloat(tok));
    if (out.size() != n)
        throw ModelFormatError("expected " + std::to_string(n) + " values");
    return out;
}

} // namespace detail

/// Text format; values are hexadecimal floats so a reload is bit-exact. The
/// last line carries an FNV-1a checksum of everything before it.
inline std::string serialize_model(const MlpModel& m) {
    std::ostringstream os;
    os << kModelMagic << ' ' << kModelVersion << '\n';
    os << "layers";
    for (auto s : m.layer_sizes())
        os << ' ' << s;
    os << '\n';
    os << "gamma " << detail::hexfloat(m.gamma) << '\n';
    os << "alpha" << detail::join_hex(m.alpha) << '\n';
    os << "scaler.mean" << detail::join_hex(m.scaler.mean) << '\n';
    os << "scaler.scale" << detail::join_hex(m.scaler.scale) << '\n';
    os << "meta " << m.meta.epochs << ' ' << m.meta.seed << ' ' << detail::hexfloat(m.meta.split) << ' '
       << m.meta.batch << ' ' << detail::hexfloat(m.meta.learning_rate) << '\n';
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        os << "weights " << i << detail::join_hex(m.layers[i].weights) << '\n';
        os << "bias " << i << detail::join_hex(m.layers[i].bias) << '\n';
    }
    std::string body = os.str();
    char sum[32];
    std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(detail::fnv1a(body)));
    return body + "checksum " + sum + '\n';
}

inline MlpModel deserialize_model(const std::string& text) {
    auto first_nl = text.find('\n');
    std::istringstream head(text.substr(0, first_nl));
    std::string magic;
    int version = 0;
    head >> magic;
    if (magic != kModelMagic)
        throw ModelFormatError("not a model file");
    if (!(head >> version) || version != kModelVersion)
        throw VersionMismatch("unsupported model version (expected " + std::to_string(kModelVersion) + ")");

    auto pos = text.rfind("checksum ");
    if (pos == std::string::npos || (pos != 0 && text[pos - 1] != '\n'))
        throw ChecksumMismatch("model file has no checksum line (truncated?)");
    std::string stored = text.substr(pos + 9);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
        stored.pop_back();
    char expect[32];
    std::snprintf(expect, sizeof expect, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(std::string_view(text).substr(0, pos))));
    if (stored != expect)
        throw ChecksumMismatch("model checksum mismatch");

    MlpModel m;
    std::istringstream is(text.substr(0, pos));
    std::string line;
    std::getline(is, line);
    std::vector<std::size_t> sizes;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "layers") {
            std::size_t s;
            while (ls >> s)
                sizes.push_back(s);
            if (sizes.size() < 3 || sizes.front() != kNumFeatures || sizes.back() != kNumClasses)
                throw ModelFormatError("unsupported layer sizes");
            for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
                m.layers.push_back({sizes[i], sizes[i + 1], {}, {}});
        } else if (key == "gamma") {
            m.gamma = detail::read_values(ls, 1)[0];
        } else if (key == "alpha") {
            auto v = detail::read_values(ls, kNumClasses);
            std::copy(v.begin(), v.end(), m.alpha.begin());
        } else if (key == "scaler.mean") {
            auto v = detail::read_values(ls, kNumFeatures);
            std::copy(v.begin(), v.end(), m.scaler.mean.begin());
        } else if (key == "scaler.scale") {
            auto v = detail::read_values(ls, kNumFeatures);
            std::copy(v.begin(), v.end(), m.scaler.scale.begin());
        } else if (key == "meta") {
            std::string split, lr;
            ls >> m.meta.epochs >> m.meta.seed >> split >> m.meta.batch >> lr;
            m.meta.split = detail::parse_hexfloat(split);
            m.meta.learning_rate = detail::parse_hexfloat(lr);
        } else if (key == "weights" || key == "bias") {
            std::size_t i = 0;
            ls >> i;
            if (i >= m.layers.size())
                throw ModelFormatError("layer index out of range");
            auto& l = m.layers[i];
            if (key == "weights")
                l.weights = detail::read_values(ls, l.inputs * l.outputs);
            else
                l.bias = detail::read_values(ls, l.outputs);
        } else if (!key.empty()) {
            throw ModelFormatError("unknown key '" + key + "'");
        }
    }
    for (const auto& l : m.layers)
        if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs)
            throw ModelFormatError("missing layer parameters");
    if (m.layers.empty())
        throw ModelFormatError("model has no layers");
    return m;
}

inline void save_model(const MlpModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    os << serialize_model(m);
    if (!os)
        throw IoError("cannot write model file " + path);
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ModelFormatError("cannot read model file " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return deserialize_model(text);
}

} // namespace lpdecomp

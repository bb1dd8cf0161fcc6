#include "fedsim/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void ModelSpec::validate() const {
    if (input_dim < 1) throw UsageError("ModelSpec: input_dim must be >= 1");
    if (num_classes < 2) throw UsageError("ModelSpec: num_classes must be >= 2");
    if (kind == ModelKind::mlp1 && hidden_dim < 1)
        throw UsageError("ModelSpec: mlp1 needs hidden_dim >= 1");
    if (kind == ModelKind::logistic && hidden_dim != 0)
        throw UsageError("ModelSpec: logistic model takes hidden_dim == 0");
}

LayoutPtr ModelSpec::make_layout() const {
    validate();
    std::vector<Segment> segs;
    if (kind == ModelKind::logistic) {
        segs.push_back({"classifier", input_dim * num_classes + num_classes,
                        SegmentRole::classifier});
    } else {
        segs.push_back({"feature_extractor", input_dim * hidden_dim + hidden_dim,
                        SegmentRole::feature_extractor});
        segs.push_back({"classifier", hidden_dim * num_classes + num_classes,
                        SegmentRole::classifier});
    }
    return std::make_shared<ParamLayout>(std::move(segs));
}

namespace {

// Parameter packing: weights row-major per output unit, then biases.
//   logistic: [W (C x D), b (C)]
//   mlp1:     [W1 (H x D), b1 (H)] [W2 (C x H), b2 (C)]

double activate(Activation a, double x) {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_grad(Activation a, double pre, double post) {
    return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

// Softmax with max-subtraction; returns probabilities in place of logits.
void softmax_inplace(std::vector<double>& z) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (double v : z) zmax = std::max(zmax, v);
    double denom = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        denom += v;
    }
    for (double& v : z) v /= denom;
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
    if (batch.size() == 0) throw UsageError("batch: empty");
    if (batch.input_dim != spec.input_dim)
        throw UsageError("batch: feature dimension does not match model input_dim");
    if (batch.features.size() != batch.size() * batch.input_dim)
        throw UsageError("batch: feature matrix shape mismatch");
    for (double v : batch.features)
        if (!std::isfinite(v)) throw UsageError("batch: non-finite feature value");
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto y = batch.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes)
            throw UsageError("batch: label out of range at row " + std::to_string(i));
    }
}

void logits_logistic(const ModelSpec& spec, const double* p, const double* x,
                     std::vector<double>& z) {
    const std::size_t D = spec.input_dim, C = spec.num_classes;
    const double* W = p;
    const double* b = p + D * C;
    for (std::size_t c = 0; c < C; ++c) {
        double s = b[c];
        const double* wc = W + c * D;
        for (std::size_t j = 0; j < D; ++j) s += wc[j] * x[j];
        z[c] = s;
    }
}

void forward_mlp1(const ModelSpec& spec, const double* p, const double* x,
                  std::vector<double>& pre, std::vector<double>& hid, std::vector<double>& z) {
    const std::size_t D = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
    const double* W1 = p;
    const double* b1 = p + D * H;
    const double* W2 = p + D * H + H;
    const double* b2 = W2 + H * C;
    for (std::size_t k = 0; k < H; ++k) {
        double s = b1[k];
        const double* w = W1 + k * D;
        for (std::size_t j = 0; j < D; ++j) s += w[j] * x[j];
        pre[k] = s;
        hid[k] = activate(spec.activation, s);
    }
    for (std::size_t c = 0; c < C; ++c) {
        double s = b2[c];
        const double* w = W2 + c * H;
        for (std::size_t k = 0; k < H; ++k) s += w[k] * hid[k];
        z[c] = s;
    }
}

} // namespace

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    auto layout = spec.make_layout();
    ParamVector out = ParamVector::zeros(layout);
    Rng rng(derive_seed(seed, seed_stream::init));
    std::normal_distribution<double> normal(0.0, 1.0);

    auto fill_layer = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i)
            out.values[offset + i] = scale * normal(rng);
        // biases after the weight block stay zero
    };

    const std::size_t D = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
    if (spec.kind == ModelKind::logistic) {
        fill_layer(0, D, C);
    } else {
        fill_layer(0, D, H);
        fill_layer(D * H + H, H, C);
    }
    return out;
}

LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    spec.validate();
    check_batch(spec, batch);
    if (params.size() != spec.make_layout()->total_len())
        throw UsageError("loss_and_grad: parameter vector does not match model layout");

    const std::size_t n = batch.size();
    const std::size_t D = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double* p = params.values.data();

    LossGrad out;
    out.grad = ParamVector::zeros(params.layout);
    double* g = out.grad.values.data();
    double loss = 0.0;

    std::vector<double> z(C);
    if (spec.kind == ModelKind::logistic) {
        double* gW = g;
        double* gb = g + D * C;
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = batch.features.data() + i * D;
            logits_logistic(spec, p, x, z);
            softmax_inplace(z);
            const auto y = static_cast<std::size_t>(batch.labels[i]);
            loss -= std::log(std::max(z[y], 1e-300));
            for (std::size_t c = 0; c < C; ++c) {
                const double delta = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
                gb[c] += delta;
                double* gw = gW + c * D;
                for (std::size_t j = 0; j < D; ++j) gw[j] += delta * x[j];
            }
        }
    } else {
        const double* W2 = p + D * H + H;
        double* gW1 = g;
        double* gb1 = g + D * H;
        double* gW2 = g + D * H + H;
        double* gb2 = gW2 + H * C;
        std::vector<double> pre(H), hid(H), dhid(H);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = batch.features.data() + i * D;
            forward_mlp1(spec, p, x, pre, hid, z);
            softmax_inplace(z);
            const auto y = static_cast<std::size_t>(batch.labels[i]);
            loss -= std::log(std::max(z[y], 1e-300));

            std::fill(dhid.begin(), dhid.end(), 0.0);
            for (std::size_t c = 0; c < C; ++c) {
                const double delta = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
                gb2[c] += delta;
                double* gw = gW2 + c * H;
                const double* w = W2 + c * H;
                for (std::size_t k = 0; k < H; ++k) {
                    gw[k] += delta * hid[k];
                    dhid[k] += delta * w[k];
                }
            }
            for (std::size_t k = 0; k < H; ++k) {
                const double dpre = dhid[k] * activate_grad(spec.activation, pre[k], hid[k]);
                gb1[k] += dpre;
                double* gw = gW1 + k * D;
                for (std::size_t j = 0; j < D; ++j) gw[j] += dpre * x[j];
            }
        }
    }

    out.loss = loss * inv_n;
    if (!std::isfinite(out.loss) || !all_finite(out.grad))
        throw NumericError("loss_and_grad: non-finite loss or gradient");
    return out;
}

std::vector<std::int32_t> predict(const ModelSpec& spec, const ParamVector& params,
                                  const std::vector<double>& features, std::size_t n) {
    spec.validate();
    const std::size_t D = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
    if (features.size() != n * D)
        throw UsageError("predict: feature matrix shape mismatch");
    if (params.size() != spec.make_layout()->total_len())
        throw UsageError("predict: parameter vector does not match model layout");

    std::vector<std::int32_t> out(n);
    const double* p = params.values.data();
    std::vector<double> z(C), pre(H), hid(H);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = features.data() + i * D;
        if (spec.kind == ModelKind::logistic)
            logits_logistic(spec, p, x, z);
        else
            forward_mlp1(spec, p, x, pre, hid, z);
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (z[c] > z[best]) best = c;
        out[i] = static_cast<std::int32_t>(best);
    }
    return out;
}

double accuracy(const ModelSpec& spec, const ParamVector& params,
                const std::vector<double>& features, const std::vector<std::int32_t>& labels,
                ExecMode mode) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n == 0) throw UsageError("accuracy: empty evaluation set");
    const std::size_t D = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
    if (features.size() != n * D) throw UsageError("accuracy: feature matrix shape mismatch");

    const double* p = params.values.data();
    long long correct = 0;

    auto row_correct = [&](std::size_t i) -> int {
        const double* x = features.data() + i * D;
        std::vector<double> z(C), pre(H), hid(H);
        if (spec.kind == ModelKind::logistic)
            logits_logistic(spec, p, x, z);
        else
            forward_mlp1(spec, p, x, pre, hid, z);
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (z[c] > z[best]) best = c;
        return static_cast<std::int32_t>(best) == labels[i] ? 1 : 0;
    };

#ifdef _OPENMP
    if (mode == ExecMode::parallel) {
#pragma omp parallel for reduction(+ : correct) schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            correct += row_correct(static_cast<std::size_t>(i));
        return static_cast<double>(correct) / static_cast<double>(n);
    }
#else
    (void)mode;
#endif
    for (std::size_t i = 0; i < n; ++i) correct += row_correct(i);
    return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace fedsim

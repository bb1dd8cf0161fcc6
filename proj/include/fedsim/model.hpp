#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/parallel.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class ModelKind { logistic, mlp1 };
enum class Activation { relu, tanh };

// Multinomial logistic regression or a one-hidden-layer MLP. Parameters are
// packed into a ParamVector: mlp1 keeps the first layer in a
// "feature_extractor" segment and the output layer in "classifier";
// logistic is a single "classifier" segment.
struct ModelSpec {
    ModelKind kind = ModelKind::logistic;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0; // 0 for logistic
    std::size_t num_classes = 0;
    Activation activation = Activation::relu; // mlp1 only

    void validate() const;
    LayoutPtr make_layout() const;
};

struct Batch {
    std::vector<double> features; // n x input_dim, row-major
    std::vector<std::int32_t> labels;
    std::size_t input_dim = 0;

    std::size_t size() const { return labels.size(); }
};

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

// Deterministic-in-seed init: weights zero-mean normal with scale
// 1/sqrt(fan_in), biases zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Mean softmax cross-entropy over the batch and its exact gradient.
LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Argmax class per row; ties break toward the lowest class id.
std::vector<std::int32_t> predict(const ModelSpec& spec, const ParamVector& params,
                                  const std::vector<double>& features, std::size_t n);

// Fraction of rows predicted correctly. The parallel path reduces integer
// counts, so it matches the serial reference exactly.
double accuracy(const ModelSpec& spec, const ParamVector& params,
                const std::vector<double>& features, const std::vector<std::int32_t>& labels,
                ExecMode mode = ExecMode::serial);

} // namespace fedsim

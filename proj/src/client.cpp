#include "fedsim/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void LocalConfig::validate() const {
    if (!(lr > 0.0)) throw UsageError("LocalConfig: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw UsageError("LocalConfig: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw UsageError("LocalConfig: weight_decay must be >= 0");
    if (epochs < 1) throw UsageError("LocalConfig: epochs must be >= 1");
    if (batch_size < 1) throw UsageError("LocalConfig: batch_size must be >= 1");
    if (algorithm == LocalAlgorithm::prox && prox_mu < 0.0)
        throw UsageError("LocalConfig: prox mu must be >= 0");
}

ParamVector pseudo_gradient(const ParamVector& w_global, const ParamVector& w_local) {
    return subtract(w_global, w_local);
}

LocalResult local_train(const ModelSpec& spec, const ParamVector& global_params,
                        const Dataset& data, const LocalConfig& cfg, ClientState& state,
                        const ParamVector* server_control, std::uint64_t seed) {
    cfg.validate();
    if (data.size() == 0) throw UsageError("local_train: empty client dataset");

    const bool scaffold = cfg.algorithm == LocalAlgorithm::scaffold;
    if (scaffold) {
        if (server_control == nullptr)
            throw UsageError("local_train: scaffold needs the server control variate");
        require_same_layout(global_params, *server_control);
        if (state.control_variate.empty())
            state.control_variate = ParamVector::zeros(global_params.layout);
        require_same_layout(global_params, state.control_variate);
    }

    ParamVector w = global_params;
    ParamVector velocity;
    if (cfg.momentum > 0.0) velocity = ParamVector::zeros(global_params.layout);

    const std::size_t n = data.size();
    const std::size_t d = w.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Rng rng(derive_seed(seed, seed_stream::local));
    std::size_t steps = 0;
    double loss_sum = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            Batch batch = data.batch_of(idx);

            LossGrad lg;
            try {
                lg = loss_and_grad(spec, w, batch);
            } catch (const NumericError& e) {
                throw NumericError("local_train: parameters diverged at local step " +
                                   std::to_string(steps + 1) + " (" + e.what() + ")");
            }
            loss_sum += lg.loss;
            double* g = lg.grad.values.data();

            if (cfg.weight_decay > 0.0)
                for (std::size_t j = 0; j < d; ++j) g[j] += cfg.weight_decay * w.values[j];
            if (cfg.algorithm == LocalAlgorithm::prox)
                for (std::size_t j = 0; j < d; ++j)
                    g[j] += cfg.prox_mu * (w.values[j] - global_params.values[j]);
            if (scaffold)
                for (std::size_t j = 0; j < d; ++j)
                    g[j] += server_control->values[j] - state.control_variate.values[j];

            if (cfg.momentum > 0.0) {
                for (std::size_t j = 0; j < d; ++j) {
                    velocity.values[j] = cfg.momentum * velocity.values[j] + g[j];
                    w.values[j] -= cfg.lr * velocity.values[j];
                }
            } else {
                for (std::size_t j = 0; j < d; ++j) w.values[j] -= cfg.lr * g[j];
            }
            ++steps;
            if (!all_finite(w))
                throw NumericError("local_train: parameters diverged at local step " +
                                   std::to_string(steps));
        }
    }

    LocalResult res;
    res.updated_params = w;
    res.pseudo_gradient = pseudo_gradient(global_params, w);
    res.num_samples = n;
    res.mean_loss = loss_sum / static_cast<double>(steps);

    if (scaffold) {
        // Control update, drift form: c_i <- c_i - c + (w_global - w_i) / (K * lr).
        const double inv = 1.0 / (static_cast<double>(steps) * cfg.lr);
        ParamVector c_new = ParamVector::zeros(w.layout);
        ParamVector delta = ParamVector::zeros(w.layout);
        for (std::size_t j = 0; j < d; ++j) {
            c_new.values[j] = state.control_variate.values[j] - server_control->values[j] +
                              inv * res.pseudo_gradient.values[j];
            delta.values[j] = c_new.values[j] - state.control_variate.values[j];
        }
        state.control_variate = std::move(c_new);
        res.control_delta = std::move(delta);
    }
    state.steps_taken += steps;
    return res;
}

} // namespace fedsim

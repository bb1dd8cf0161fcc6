#pragma once

#include <cstdint>
#include <optional>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class LocalAlgorithm { vanilla, prox, scaffold };

struct LocalConfig {
    double lr = 0.1;
    double momentum = 0.0; // buffer is per-round, clients are stateless apart from SCAFFOLD
    double weight_decay = 0.0;
    std::size_t epochs = 1;
    std::size_t batch_size = 0;
    LocalAlgorithm algorithm = LocalAlgorithm::vanilla;
    double prox_mu = 0.0;

    void validate() const;
};

struct ClientState {
    ParamVector control_variate; // SCAFFOLD c_i, zero-initialized
    std::size_t steps_taken = 0;
};

struct LocalResult {
    ParamVector updated_params;          // w_i
    ParamVector pseudo_gradient;         // w_global - w_i, computed here once
    std::size_t num_samples = 0;
    double mean_loss = 0.0;              // mean mini-batch loss over the round
    std::optional<ParamVector> control_delta; // SCAFFOLD c_i_new - c_i_old
};

// One round of local training: seeded shuffles per epoch, mini-batch SGD with
// optional momentum/weight decay, plus the algorithm-specific terms:
//   prox     adds mu * (w - w_global) to each gradient
//   scaffold adds (c - c_i) to each gradient and refreshes c_i afterwards
//            from the total drift (no extra gradient pass)
LocalResult local_train(const ModelSpec& spec, const ParamVector& global_params,
                        const Dataset& data, const LocalConfig& cfg, ClientState& state,
                        const ParamVector* server_control, std::uint64_t seed);

ParamVector pseudo_gradient(const ParamVector& w_global, const ParamVector& w_local);

} // namespace fedsim

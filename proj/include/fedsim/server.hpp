#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class Aggregator { fedavg, fedavgm, scaffold };

struct WimaConfig {
    std::size_t window = 1;
    std::optional<SegmentMask> mask; // absent = average every segment
};

struct SwaConfig {
    std::size_t start_round = 0;
    std::size_t cycle = 1;
};

struct ServerConfig {
    std::size_t rounds = 0;
    std::size_t clients_per_round = 0;
    double server_lr = 1.0;
    double server_momentum = 0.0;
    Aggregator aggregator = Aggregator::fedavg;
    std::optional<WimaConfig> wima;
    std::optional<SwaConfig> swa;
    std::uint64_t seed = 0;

    void validate(std::size_t num_clients) const;
};

// FIFO of the last W global models with an O(d) running-sum mean. Before the
// window fills, mean() averages everything seen so far (partial-window
// warmup). The running sum is fully recomputed every 1000 pushes to bound
// floating-point drift.
class WimaWindow {
public:
    explicit WimaWindow(std::size_t capacity);

    void push(const ParamVector& w);
    ParamVector mean() const;
    std::size_t size() const { return fifo_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<ParamVector>& contents() const { return fifo_; }
    const ParamVector& running_sum() const { return sum_; }
    ParamVector recompute_sum() const;
    std::size_t pushes() const { return pushes_; }

    void save(std::ostream& os) const;
    static WimaWindow load(std::istream& is);

private:
    std::size_t capacity_ = 1;
    std::deque<ParamVector> fifo_;
    ParamVector sum_;
    std::size_t pushes_ = 0;
};

// Per-round aggregated pseudo-gradients plus the pre-round model checkpoint,
// capped to the depth the decay-form oracle needs. The oldest retained entry
// holds the window-entry anchor.
class PseudoGradientLog {
public:
    explicit PseudoGradientLog(std::size_t depth);

    void append(std::size_t round, const ParamVector& model_before, ParamVector delta);
    std::size_t size() const { return entries_.size(); }
    std::size_t depth() const { return depth_; }

    // Anchor model and deltas covering the last `window` rounds.
    const ParamVector& window_anchor(std::size_t window) const;
    std::vector<const ParamVector*> window_deltas(std::size_t window) const;

    void save(std::ostream& os) const;
    static PseudoGradientLog load(std::istream& is);

private:
    struct Entry {
        std::size_t round;
        ParamVector model_before;
        ParamVector delta;
    };
    std::size_t depth_ = 1;
    std::deque<Entry> entries_;
};

struct ServerState {
    std::size_t round = 0;
    ParamVector model; // the FedAvg-trained global model that gets broadcast
    ParamVector momentum_buffer;
    ParamVector global_control; // SCAFFOLD c
    std::optional<WimaWindow> wima_window;
    ParamVector swa_avg;
    std::size_t swa_count = 0;
    std::optional<PseudoGradientLog> pg_log;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<std::size_t> sampled_clients;
    double mean_local_loss = 0.0;
    std::optional<double> acc_fedavg;
    std::optional<double> acc_wima;
    std::optional<double> acc_swa;
    std::optional<double> identity_residual;
};

// Uniform sample of m distinct client ids, deterministic in (seed, round).
std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t m,
                                        std::size_t round, std::uint64_t seed);

// FedOpt server step on the weighted pseudo-gradient; updates state.model and
// returns it. Also feeds the pseudo-gradient log and, for SCAFFOLD, the
// global control variate.
ParamVector aggregate(ServerState& state, const std::vector<LocalResult>& results,
                      const ServerConfig& cfg, std::size_t num_clients);

// Push a freshly aggregated model and return the current window mean.
ParamVector wima_update(WimaWindow& window, const ParamVector& w_new);

// Window mean on masked segments, current global model elsewhere.
ParamVector wima_model_masked(const ServerState& state, const SegmentMask& mask);

// Fold w_new into the running average every `cycle` rounds from start_round
// on; returns the updated average, or nothing while gated.
std::optional<ParamVector> swa_update(ServerState& state, const ParamVector& w_new,
                                      std::size_t round, const SwaConfig& cfg);

// Reconstructs the window mean as w_start minus position-weighted server
// steps: coefficient (W - k) / W for the k-th oldest logged pseudo-gradient.
// Exact (up to roundoff) for plain-SGD aggregation; serves as the
// independent oracle for the window mean.
ParamVector decay_form_reconstruct(const PseudoGradientLog& log, const ParamVector& w_start,
                                   double server_lr, std::size_t window);

// Everything one experiment needs to advance round by round. Client training
// runs under the chosen ExecMode; results are identical either way because
// per-client work is independent and aggregation order is fixed.
struct FederatedWorld {
    ModelSpec model_spec;
    const FederatedDataset* data = nullptr;
    LocalConfig local_cfg;
    ServerConfig server_cfg;
    ExecMode exec = ExecMode::serial;
    bool audit_identity = false;

    ServerState state;
    std::vector<ClientState> client_states;

    static FederatedWorld create(const ModelSpec& spec, const FederatedDataset& data,
                                 const LocalConfig& local_cfg, const ServerConfig& server_cfg,
                                 ExecMode exec = ExecMode::serial, bool audit_identity = false);

    // One communication round: sample, train locally on the broadcast model,
    // aggregate, refresh the WIMA/SWA shadow models, optionally evaluate.
    // Shadow models are never broadcast back.
    RoundRecord run_round(bool evaluate = true);

    void save_checkpoint(std::ostream& os) const;
    void load_checkpoint(std::istream& is);
};

} // namespace fedsim

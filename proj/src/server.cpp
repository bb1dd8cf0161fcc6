#include "fedsim/server.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void ServerConfig::validate(std::size_t num_clients) const {
    if (clients_per_round < 1 || clients_per_round > num_clients)
        throw UsageError("ServerConfig: clients_per_round must be in [1, num_clients]");
    if (!(server_lr > 0.0)) throw UsageError("ServerConfig: server_lr must be > 0");
    if (server_momentum < 0.0 || server_momentum >= 1.0)
        throw UsageError("ServerConfig: server_momentum must be in [0, 1)");
    if (wima && wima->window < 1) throw UsageError("ServerConfig: WIMA window must be >= 1");
    if (swa) {
        if (swa->cycle < 1) throw UsageError("ServerConfig: SWA cycle must be >= 1");
        if (rounds > 0 && swa->start_round >= rounds)
            throw UsageError("ServerConfig: SWA start_round must be < rounds");
    }
}

WimaWindow::WimaWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw UsageError("WimaWindow: capacity must be >= 1");
}

void WimaWindow::push(const ParamVector& w) {
    if (sum_.empty()) sum_ = ParamVector::zeros(w.layout);
    require_same_layout(sum_, w);
    if (fifo_.size() == capacity_) {
        sub_in_place(sum_, fifo_.front());
        fifo_.pop_front();
    }
    fifo_.push_back(w);
    add_in_place(sum_, w);
    ++pushes_;
    if (pushes_ % 1000 == 0) sum_ = recompute_sum();
}

ParamVector WimaWindow::recompute_sum() const {
    if (fifo_.empty()) throw UsageError("WimaWindow: empty window");
    ParamVector s = ParamVector::zeros(fifo_.front().layout);
    for (const auto& w : fifo_) add_in_place(s, w);
    return s;
}

ParamVector WimaWindow::mean() const {
    if (fifo_.empty()) throw UsageError("WimaWindow: empty window");
    ParamVector m = sum_;
    const double count = static_cast<double>(fifo_.size());
    for (double& x : m.values) x /= count;
    return m;
}

PseudoGradientLog::PseudoGradientLog(std::size_t depth) : depth_(depth) {
    if (depth_ < 1) throw UsageError("PseudoGradientLog: depth must be >= 1");
}

void PseudoGradientLog::append(std::size_t round, const ParamVector& model_before,
                               ParamVector delta) {
    require_same_layout(model_before, delta);
    if (entries_.size() == depth_) entries_.pop_front();
    entries_.push_back({round, model_before, std::move(delta)});
}

const ParamVector& PseudoGradientLog::window_anchor(std::size_t window) const {
    if (window < 1 || window > entries_.size())
        throw UsageError("PseudoGradientLog: log depth " + std::to_string(entries_.size()) +
                         " cannot serve window " + std::to_string(window));
    return entries_[entries_.size() - window].model_before;
}

std::vector<const ParamVector*> PseudoGradientLog::window_deltas(std::size_t window) const {
    if (window < 1 || window > entries_.size())
        throw UsageError("PseudoGradientLog: log depth " + std::to_string(entries_.size()) +
                         " cannot serve window " + std::to_string(window));
    std::vector<const ParamVector*> out;
    out.reserve(window);
    for (std::size_t k = entries_.size() - window; k < entries_.size(); ++k)
        out.push_back(&entries_[k].delta);
    return out;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t m,
                                        std::size_t round, std::uint64_t seed) {
    if (m > num_clients) throw UsageError("sample_clients: m exceeds the number of clients");
    if (m == 0) throw UsageError("sample_clients: m must be >= 1");
    std::vector<std::size_t> ids(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) ids[i] = i;

    Rng rng(derive_seed(seed, seed_stream::sampling, round));
    // Partial Fisher-Yates: the first m slots become the sample.
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, num_clients - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ParamVector aggregate(ServerState& state, const std::vector<LocalResult>& results,
                      const ServerConfig& cfg, std::size_t num_clients) {
    if (results.empty()) throw UsageError("aggregate: no local results");

    double total_samples = 0.0;
    for (const auto& r : results) {
        require_same_layout(state.model, r.pseudo_gradient);
        total_samples += static_cast<double>(r.num_samples);
    }
    if (!(total_samples > 0.0)) throw UsageError("aggregate: zero total sample count");

    // Weighted global pseudo-gradient, accumulated in the given client order.
    ParamVector delta = ParamVector::zeros(state.model.layout);
    for (const auto& r : results) {
        const double w = static_cast<double>(r.num_samples) / total_samples;
        for (std::size_t j = 0; j < delta.size(); ++j)
            delta.values[j] += w * r.pseudo_gradient.values[j];
    }

    const ParamVector model_before = state.model;
    switch (cfg.aggregator) {
    case Aggregator::fedavg:
    case Aggregator::scaffold:
        for (std::size_t j = 0; j < delta.size(); ++j)
            state.model.values[j] -= cfg.server_lr * delta.values[j];
        break;
    case Aggregator::fedavgm:
        if (state.momentum_buffer.empty())
            state.momentum_buffer = ParamVector::zeros(state.model.layout);
        for (std::size_t j = 0; j < delta.size(); ++j) {
            state.momentum_buffer.values[j] =
                cfg.server_momentum * state.momentum_buffer.values[j] + delta.values[j];
            state.model.values[j] -= cfg.server_lr * state.momentum_buffer.values[j];
        }
        break;
    }

    if (cfg.aggregator == Aggregator::scaffold) {
        if (state.global_control.empty())
            state.global_control = ParamVector::zeros(state.model.layout);
        ParamVector mean_delta = ParamVector::zeros(state.model.layout);
        std::size_t contributors = 0;
        for (const auto& r : results) {
            if (!r.control_delta) continue;
            add_in_place(mean_delta, *r.control_delta);
            ++contributors;
        }
        if (contributors == 0)
            throw UsageError("aggregate: scaffold results carry no control deltas");
        const double scale = (static_cast<double>(results.size()) /
                              static_cast<double>(num_clients)) /
                             static_cast<double>(contributors);
        for (std::size_t j = 0; j < mean_delta.size(); ++j)
            state.global_control.values[j] += scale * mean_delta.values[j];
    }

    require_finite(state.model, "aggregated global model");
    if (state.pg_log) state.pg_log->append(state.round, model_before, std::move(delta));
    return state.model;
}

ParamVector wima_update(WimaWindow& window, const ParamVector& w_new) {
    require_finite(w_new, "model pushed into the WIMA window");
    window.push(w_new);
    return window.mean();
}

ParamVector wima_model_masked(const ServerState& state, const SegmentMask& mask) {
    if (!state.wima_window || state.wima_window->size() == 0)
        throw UsageError("wima_model_masked: WIMA window is empty");
    return masked_blend(state.model, state.wima_window->mean(), mask);
}

std::optional<ParamVector> swa_update(ServerState& state, const ParamVector& w_new,
                                      std::size_t round, const SwaConfig& cfg) {
    if (cfg.cycle < 1) throw UsageError("swa_update: cycle must be >= 1");
    if (round < cfg.start_round) return std::nullopt;
    if ((round - cfg.start_round) % cfg.cycle != 0) return std::nullopt;

    if (state.swa_count == 0) {
        state.swa_avg = w_new;
        state.swa_count = 1;
    } else {
        const double count = static_cast<double>(state.swa_count);
        for (std::size_t j = 0; j < state.swa_avg.size(); ++j)
            state.swa_avg.values[j] =
                (state.swa_avg.values[j] * count + w_new.values[j]) / (count + 1.0);
        ++state.swa_count;
    }
    return state.swa_avg;
}

ParamVector decay_form_reconstruct(const PseudoGradientLog& log, const ParamVector& w_start,
                                   double server_lr, std::size_t window) {
    const auto deltas = log.window_deltas(window); // throws on insufficient depth
    ParamVector out = w_start;
    const double w = static_cast<double>(window);
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        const double coeff = server_lr * (static_cast<double>(window - k) / w);
        for (std::size_t j = 0; j < out.size(); ++j)
            out.values[j] -= coeff * deltas[k]->values[j];
    }
    return out;
}

FederatedWorld FederatedWorld::create(const ModelSpec& spec, const FederatedDataset& data,
                                      const LocalConfig& local_cfg,
                                      const ServerConfig& server_cfg, ExecMode exec,
                                      bool audit_identity) {
    spec.validate();
    local_cfg.validate();
    server_cfg.validate(data.num_clients());

    FederatedWorld w;
    w.model_spec = spec;
    w.data = &data;
    w.local_cfg = local_cfg;
    w.server_cfg = server_cfg;
    w.exec = exec;
    w.audit_identity = audit_identity && server_cfg.wima.has_value();

    w.state.model = init_params(spec, server_cfg.seed);
    if (server_cfg.aggregator == Aggregator::scaffold)
        w.state.global_control = ParamVector::zeros(w.state.model.layout);
    if (server_cfg.wima) {
        w.state.wima_window.emplace(server_cfg.wima->window);
        w.state.pg_log.emplace(server_cfg.wima->window);
        if (server_cfg.wima->mask) server_cfg.wima->mask->validate_for(*w.state.model.layout);
    }
    w.client_states.resize(data.num_clients());
    return w;
}

RoundRecord FederatedWorld::run_round(bool evaluate) {
    if (state.round >= server_cfg.rounds)
        throw UsageError("run_round: round counter past configured rounds");

    const std::size_t round = state.round;
    const auto sampled = sample_clients(data->num_clients(), server_cfg.clients_per_round,
                                        round, server_cfg.seed);

    const bool scaffold = server_cfg.aggregator == Aggregator::scaffold;
    const ParamVector* control = scaffold ? &state.global_control : nullptr;

    // Clients are independent; each reads the broadcast snapshot and owns its
    // state, so the parallel path reproduces the serial one bit for bit.
    std::vector<LocalResult> results(sampled.size());
    const ParamVector& snapshot = state.model;
    parallel_for(sampled.size(), exec, [&](std::size_t k) {
        const std::size_t id = sampled[k];
        results[k] = local_train(model_spec, snapshot, data->clients[id].data, local_cfg,
                                 client_states[id], control,
                                 derive_seed(server_cfg.seed, seed_stream::local, round, id));
    });

    aggregate(state, results, server_cfg, data->num_clients());

    std::optional<ParamVector> wima_model;
    if (state.wima_window) {
        ParamVector window_mean = wima_update(*state.wima_window, state.model);
        if (server_cfg.wima->mask)
            wima_model = masked_blend(state.model, window_mean, *server_cfg.wima->mask);
        else
            wima_model = std::move(window_mean);
    }
    std::optional<ParamVector> swa_model;
    if (server_cfg.swa) {
        swa_update(state, state.model, round, *server_cfg.swa);
        if (state.swa_count > 0) swa_model = state.swa_avg;
    }

    RoundRecord rec;
    rec.round = round;
    rec.sampled_clients = sampled;
    double total = 0.0;
    for (const auto& r : results) total += static_cast<double>(r.num_samples);
    for (const auto& r : results)
        rec.mean_local_loss += (static_cast<double>(r.num_samples) / total) * r.mean_loss;

    if (audit_identity && state.pg_log &&
        state.pg_log->size() >= server_cfg.wima->window) {
        const std::size_t w = server_cfg.wima->window;
        const ParamVector direct = state.wima_window->mean();
        const ParamVector rebuilt = decay_form_reconstruct(
            *state.pg_log, state.pg_log->window_anchor(w), server_cfg.server_lr, w);
        rec.identity_residual = linf_distance(direct, rebuilt);
    }

    if (evaluate) {
        const auto& test = data->test_set;
        rec.acc_fedavg = accuracy(model_spec, state.model, test.features, test.labels, exec);
        if (wima_model)
            rec.acc_wima = accuracy(model_spec, *wima_model, test.features, test.labels, exec);
        if (swa_model)
            rec.acc_swa = accuracy(model_spec, *swa_model, test.features, test.labels, exec);
    }

    state.round = round + 1;
    return rec;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x46435031; // "FCP1"

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint stream: truncated read");
    return v;
}

void write_optional_vector(std::ostream& os, const ParamVector& v) {
    write_pod<std::uint8_t>(os, v.empty() ? 0 : 1);
    if (!v.empty()) write_param_vector(os, v);
}

ParamVector read_optional_vector(std::istream& is) {
    if (read_pod<std::uint8_t>(is) == 0) return {};
    return read_param_vector(is);
}

} // namespace

void WimaWindow::save(std::ostream& os) const {
    write_pod<std::uint64_t>(os, capacity_);
    write_pod<std::uint64_t>(os, pushes_);
    write_pod<std::uint64_t>(os, fifo_.size());
    for (const auto& w : fifo_) write_param_vector(os, w);
    write_optional_vector(os, sum_);
}

WimaWindow WimaWindow::load(std::istream& is) {
    WimaWindow w(read_pod<std::uint64_t>(is));
    w.pushes_ = read_pod<std::uint64_t>(is);
    const auto n = read_pod<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) w.fifo_.push_back(read_param_vector(is));
    w.sum_ = read_optional_vector(is);
    return w;
}

void PseudoGradientLog::save(std::ostream& os) const {
    write_pod<std::uint64_t>(os, depth_);
    write_pod<std::uint64_t>(os, entries_.size());
    for (const auto& e : entries_) {
        write_pod<std::uint64_t>(os, e.round);
        write_param_vector(os, e.model_before);
        write_param_vector(os, e.delta);
    }
}

PseudoGradientLog PseudoGradientLog::load(std::istream& is) {
    PseudoGradientLog log(read_pod<std::uint64_t>(is));
    const auto n = read_pod<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) {
        Entry e{read_pod<std::uint64_t>(is), read_param_vector(is), read_param_vector(is)};
        log.entries_.push_back(std::move(e));
    }
    return log;
}

void FederatedWorld::save_checkpoint(std::ostream& os) const {
    write_pod(os, kCheckpointMagic);
    write_pod<std::uint64_t>(os, state.round);
    write_param_vector(os, state.model);
    write_optional_vector(os, state.momentum_buffer);
    write_optional_vector(os, state.global_control);
    write_pod<std::uint8_t>(os, state.wima_window ? 1 : 0);
    if (state.wima_window) state.wima_window->save(os);
    write_optional_vector(os, state.swa_avg);
    write_pod<std::uint64_t>(os, state.swa_count);
    write_pod<std::uint8_t>(os, state.pg_log ? 1 : 0);
    if (state.pg_log) state.pg_log->save(os);
    write_pod<std::uint64_t>(os, client_states.size());
    for (const auto& cs : client_states) {
        write_optional_vector(os, cs.control_variate);
        write_pod<std::uint64_t>(os, cs.steps_taken);
    }
    if (!os) throw IoError("save_checkpoint: stream write failed");
}

void FederatedWorld::load_checkpoint(std::istream& is) {
    if (read_pod<std::uint32_t>(is) != kCheckpointMagic)
        throw IoError("load_checkpoint: bad magic");
    state.round = read_pod<std::uint64_t>(is);
    state.model = read_param_vector(is);
    state.momentum_buffer = read_optional_vector(is);
    state.global_control = read_optional_vector(is);
    state.wima_window.reset();
    if (read_pod<std::uint8_t>(is)) state.wima_window = WimaWindow::load(is);
    state.swa_avg = read_optional_vector(is);
    state.swa_count = read_pod<std::uint64_t>(is);
    state.pg_log.reset();
    if (read_pod<std::uint8_t>(is)) state.pg_log = PseudoGradientLog::load(is);
    const auto n = read_pod<std::uint64_t>(is);
    if (n != client_states.size())
        throw IoError("load_checkpoint: client count does not match the configuration");
    for (auto& cs : client_states) {
        cs.control_variate = read_optional_vector(is);
        cs.steps_taken = read_pod<std::uint64_t>(is);
    }
}

} // namespace fedsim

#include "fedsim/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError(std::string("csv: bad ") + what + " value '" + s + "'");
    return v;
}

std::string model_kind_str(ModelKind k) {
    return k == ModelKind::logistic ? "logistic" : "mlp1";
}
ModelKind model_kind_of(const std::string& s) {
    if (s == "logistic") return ModelKind::logistic;
    if (s == "mlp1") return ModelKind::mlp1;
    throw UsageError("config: unknown model kind '" + s + "'");
}
std::string activation_str(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
Activation activation_of(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw UsageError("config: unknown activation '" + s + "'");
}
std::string algorithm_str(LocalAlgorithm a) {
    switch (a) {
    case LocalAlgorithm::vanilla: return "vanilla";
    case LocalAlgorithm::prox: return "prox";
    case LocalAlgorithm::scaffold: return "scaffold";
    }
    return "vanilla";
}
LocalAlgorithm algorithm_of(const std::string& s) {
    if (s == "vanilla") return LocalAlgorithm::vanilla;
    if (s == "prox") return LocalAlgorithm::prox;
    if (s == "scaffold") return LocalAlgorithm::scaffold;
    throw UsageError("config: unknown local algorithm '" + s + "'");
}
std::string aggregator_str(Aggregator a) {
    switch (a) {
    case Aggregator::fedavg: return "fedavg";
    case Aggregator::fedavgm: return "fedavgm";
    case Aggregator::scaffold: return "scaffold";
    }
    return "fedavg";
}
Aggregator aggregator_of(const std::string& s) {
    if (s == "fedavg") return Aggregator::fedavg;
    if (s == "fedavgm") return Aggregator::fedavgm;
    if (s == "scaffold") return Aggregator::scaffold;
    throw UsageError("config: unknown aggregator '" + s + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

template <typename T>
T require_key(const json& j, const char* key, const char* where) {
    if (!j.contains(key))
        throw UsageError(std::string("config: missing '") + key + "' in " + where);
    return j.at(key).get<T>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        const auto& jd = j.at("dataset");
        const auto type = require_key<std::string>(jd, "type", "dataset");
        if (type == "synthetic") {
            cfg.dataset.kind = DatasetConfig::Kind::synthetic;
            auto& s = cfg.dataset.synthetic;
            s.num_classes = require_key<std::size_t>(jd, "num_classes", "dataset");
            s.input_dim = require_key<std::size_t>(jd, "input_dim", "dataset");
            s.samples_per_class = require_key<std::size_t>(jd, "samples_per_class", "dataset");
            s.class_separation = require_key<double>(jd, "class_separation", "dataset");
            s.seed = get_or<std::uint64_t>(jd, "seed", 0);
        } else if (type == "csv") {
            cfg.dataset.kind = DatasetConfig::Kind::csv;
            cfg.dataset.csv_path = require_key<std::string>(jd, "path", "dataset");
            if (jd.contains("num_classes"))
                cfg.dataset.csv_num_classes = jd.at("num_classes").get<std::size_t>();
        } else {
            throw UsageError("config: dataset type must be 'synthetic' or 'csv'");
        }

        const auto& jp = j.at("partition");
        cfg.partition.num_clients = require_key<std::size_t>(jp, "num_clients", "partition");
        cfg.partition.alpha = require_key<double>(jp, "alpha", "partition");
        cfg.partition.seed = get_or<std::uint64_t>(jp, "seed", 0);
        cfg.partition.test_fraction = get_or<double>(jp, "test_fraction", 0.2);

        const auto& jm = j.at("model");
        cfg.model.kind = model_kind_of(require_key<std::string>(jm, "kind", "model"));
        cfg.model.hidden_dim = get_or<std::size_t>(jm, "hidden_dim", 0);
        if (jm.contains("activation"))
            cfg.model.activation = activation_of(jm.at("activation").get<std::string>());

        const auto& jl = j.at("local");
        cfg.local.lr = require_key<double>(jl, "lr", "local");
        cfg.local.momentum = get_or<double>(jl, "momentum", 0.0);
        cfg.local.weight_decay = get_or<double>(jl, "weight_decay", 0.0);
        cfg.local.epochs = get_or<std::size_t>(jl, "epochs", 1);
        cfg.local.batch_size = require_key<std::size_t>(jl, "batch_size", "local");
        cfg.local.algorithm = algorithm_of(get_or<std::string>(jl, "algorithm", "vanilla"));
        cfg.local.prox_mu = get_or<double>(jl, "mu", 0.0);

        const auto& js = j.at("server");
        cfg.server.rounds = require_key<std::size_t>(js, "rounds", "server");
        cfg.server.clients_per_round =
            require_key<std::size_t>(js, "clients_per_round", "server");
        cfg.server.server_lr = get_or<double>(js, "lr", 1.0);
        cfg.server.server_momentum = get_or<double>(js, "momentum", 0.0);
        cfg.server.aggregator = aggregator_of(get_or<std::string>(js, "aggregator", "fedavg"));
        cfg.server.seed = get_or<std::uint64_t>(js, "seed", 0);
        if (js.contains("wima") && !js.at("wima").is_null()) {
            const auto& jw = js.at("wima");
            WimaConfig w;
            w.window = require_key<std::size_t>(jw, "window", "server.wima");
            if (jw.contains("mask"))
                w.mask = SegmentMask::of(jw.at("mask").get<std::vector<std::string>>());
            cfg.server.wima = std::move(w);
        }
        if (js.contains("swa") && !js.at("swa").is_null()) {
            const auto& jw = js.at("swa");
            SwaConfig s;
            s.start_round = require_key<std::size_t>(jw, "start_round", "server.swa");
            s.cycle = get_or<std::size_t>(jw, "cycle", 1);
            cfg.server.swa = s;
        }

        cfg.eval_every = get_or<std::size_t>(j, "eval_every", 1);
        if (cfg.eval_every < 1) throw UsageError("config: eval_every must be >= 1");
        cfg.audit_identity = get_or<bool>(j, "audit_identity", false);
        const auto exec = get_or<std::string>(j, "execution", "parallel");
        if (exec == "serial")
            cfg.exec = ExecMode::serial;
        else if (exec == "parallel")
            cfg.exec = ExecMode::parallel;
        else
            throw UsageError("config: execution must be 'serial' or 'parallel'");
        cfg.checkpoint_every = get_or<std::size_t>(j, "checkpoint_every", 0);
        cfg.output_dir = get_or<std::string>(j, "output_dir", "");
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    if (dataset.kind == DatasetConfig::Kind::synthetic) {
        j["dataset"] = {{"type", "synthetic"},
                        {"num_classes", dataset.synthetic.num_classes},
                        {"input_dim", dataset.synthetic.input_dim},
                        {"samples_per_class", dataset.synthetic.samples_per_class},
                        {"class_separation", dataset.synthetic.class_separation},
                        {"seed", dataset.synthetic.seed}};
    } else {
        j["dataset"] = {{"type", "csv"}, {"path", dataset.csv_path}};
        if (dataset.csv_num_classes) j["dataset"]["num_classes"] = *dataset.csv_num_classes;
    }
    j["partition"] = {{"num_clients", partition.num_clients},
                      {"alpha", partition.alpha},
                      {"seed", partition.seed},
                      {"test_fraction", partition.test_fraction}};
    j["model"] = {{"kind", model_kind_str(model.kind)}};
    if (model.kind == ModelKind::mlp1) {
        j["model"]["hidden_dim"] = model.hidden_dim;
        j["model"]["activation"] = activation_str(model.activation);
    }
    j["local"] = {{"lr", local.lr},
                  {"momentum", local.momentum},
                  {"weight_decay", local.weight_decay},
                  {"epochs", local.epochs},
                  {"batch_size", local.batch_size},
                  {"algorithm", algorithm_str(local.algorithm)},
                  {"mu", local.prox_mu}};
    j["server"] = {{"rounds", server.rounds},
                   {"clients_per_round", server.clients_per_round},
                   {"lr", server.server_lr},
                   {"momentum", server.server_momentum},
                   {"aggregator", aggregator_str(server.aggregator)},
                   {"seed", server.seed}};
    if (server.wima) {
        j["server"]["wima"] = {{"window", server.wima->window}};
        if (server.wima->mask) j["server"]["wima"]["mask"] = server.wima->mask->included;
    }
    if (server.swa)
        j["server"]["swa"] = {{"start_round", server.swa->start_round},
                              {"cycle", server.swa->cycle}};
    j["eval_every"] = eval_every;
    j["audit_identity"] = audit_identity;
    j["execution"] = exec == ExecMode::serial ? "serial" : "parallel";
    j["checkpoint_every"] = checkpoint_every;
    j["output_dir"] = output_dir;
    if (server.aggregator == Aggregator::scaffold)
        j["notes"] = {{"scaffold_control_update", "drift form, no extra gradient pass"}};
    return j.dump(2);
}

double final_score(const std::vector<double>& accuracies, std::size_t tail) {
    if (tail < 1) throw UsageError("final_score: tail must be >= 1");
    if (accuracies.size() < tail)
        throw UsageError("final_score: need at least " + std::to_string(tail) +
                         " evaluated rounds, have " + std::to_string(accuracies.size()));
    double sum = 0.0;
    for (std::size_t i = accuracies.size() - tail; i < accuracies.size(); ++i)
        sum += accuracies[i];
    return sum / static_cast<double>(tail);
}

double smoothness(const std::vector<double>& accuracies, std::size_t window) {
    if (accuracies.empty()) throw UsageError("smoothness: empty accuracy series");
    if (window < 2) throw UsageError("smoothness: window must be >= 2");
    const std::size_t w = std::min(window, accuracies.size());
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start + w <= accuracies.size(); ++start, ++count) {
        double mean = 0.0;
        for (std::size_t i = start; i < start + w; ++i) mean += accuracies[i];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t i = start; i < start + w; ++i) {
            const double d = accuracies[i] - mean;
            var += d * d;
        }
        total += std::sqrt(var / static_cast<double>(w));
    }
    return total / static_cast<double>(count);
}

std::string round_record_csv_header() {
    return "round,sampled_clients,mean_local_loss,acc_fedavg,acc_wima,acc_swa,identity_residual";
}

std::string round_record_csv_row(const RoundRecord& rec) {
    std::string row = std::to_string(rec.round);
    row += ',';
    for (std::size_t i = 0; i < rec.sampled_clients.size(); ++i) {
        if (i) row += ';';
        row += std::to_string(rec.sampled_clients[i]);
    }
    row += ',';
    row += fmt(rec.mean_local_loss);
    for (const auto& opt : {rec.acc_fedavg, rec.acc_wima, rec.acc_swa, rec.identity_residual}) {
        row += ',';
        if (opt) row += fmt(*opt);
    }
    return row;
}

std::vector<RoundRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("csv: empty file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != round_record_csv_header())
        throw IoError("csv: unexpected header in '" + path + "'");

    std::vector<RoundRecord> records;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            cells.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (cells.size() != 7) throw IoError("csv: malformed row in '" + path + "'");
        RoundRecord rec;
        rec.round = static_cast<std::size_t>(std::stoull(cells[0]));
        if (!cells[1].empty()) {
            std::size_t s = 0;
            while (true) {
                const auto pos = cells[1].find(';', s);
                rec.sampled_clients.push_back(
                    static_cast<std::size_t>(std::stoull(cells[1].substr(s, pos - s))));
                if (pos == std::string::npos) break;
                s = pos + 1;
            }
        }
        rec.mean_local_loss = parse_double(cells[2], "mean_local_loss");
        if (!cells[3].empty()) rec.acc_fedavg = parse_double(cells[3], "acc_fedavg");
        if (!cells[4].empty()) rec.acc_wima = parse_double(cells[4], "acc_wima");
        if (!cells[5].empty()) rec.acc_swa = parse_double(cells[5], "acc_swa");
        if (!cells[6].empty())
            rec.identity_residual = parse_double(cells[6], "identity_residual");
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

Dataset build_dataset(const DatasetConfig& dc) {
    if (dc.kind == DatasetConfig::Kind::synthetic) {
        const auto& s = dc.synthetic;
        return generate_synthetic(s.num_classes, s.input_dim, s.samples_per_class,
                                  s.class_separation, s.seed);
    }
    return load_csv(dc.csv_path, dc.csv_num_classes);
}

Summary summarize(const std::vector<RoundRecord>& records) {
    if (records.empty()) throw UsageError("summary: no evaluated rounds");
    std::vector<double> fedavg, wima, swa;
    for (const auto& r : records) {
        if (!r.acc_fedavg) throw UsageError("summary: record without acc_fedavg");
        fedavg.push_back(*r.acc_fedavg);
        if (r.acc_wima) wima.push_back(*r.acc_wima);
        if (r.acc_swa) swa.push_back(*r.acc_swa);
    }
    Summary s;
    s.tail = std::min<std::size_t>(100, fedavg.size());
    s.final_score_fedavg = final_score(fedavg, s.tail);
    s.smoothness_fedavg = smoothness(fedavg);
    if (wima.size() == fedavg.size()) {
        s.final_score_wima = final_score(wima, s.tail);
        s.smoothness_wima = smoothness(wima);
    }
    if (!swa.empty()) s.final_score_swa = final_score(swa, std::min<std::size_t>(100, swa.size()));
    return s;
}

json summary_to_json(const Summary& s, const ExperimentResult& res) {
    json j;
    j["final_score_fedavg"] = s.final_score_fedavg;
    j["final_score_wima"] = s.final_score_wima ? json(*s.final_score_wima) : json();
    j["final_score_swa"] = s.final_score_swa ? json(*s.final_score_swa) : json();
    j["smoothness_fedavg"] = s.smoothness_fedavg;
    j["smoothness_wima"] = s.smoothness_wima ? json(*s.smoothness_wima) : json();
    j["tail"] = s.tail;
    j["smoothness_window"] = s.smoothness_window;
    j["rounds_evaluated"] = res.records.size();
    j["max_identity_residual"] =
        res.max_identity_residual ? json(*res.max_identity_residual) : json();
    j["max_identity_residual_normalized"] = res.max_identity_residual_normalized
                                                ? json(*res.max_identity_residual_normalized)
                                                : json();
    return j;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& resume_from) {
    const Dataset pool = build_dataset(cfg.dataset);
    const FederatedDataset fed = partition_dirichlet(pool, cfg.partition.num_clients,
                                                     cfg.partition.alpha, cfg.partition.seed,
                                                     cfg.partition.test_fraction);

    ModelSpec spec = cfg.model;
    spec.input_dim = pool.input_dim;
    spec.num_classes = pool.num_classes;
    if (spec.kind == ModelKind::logistic) spec.hidden_dim = 0;

    FederatedWorld world = FederatedWorld::create(spec, fed, cfg.local, cfg.server, cfg.exec,
                                                  cfg.audit_identity);
    if (!resume_from.empty()) {
        std::ifstream in(resume_from, std::ios::binary);
        if (!in) throw IoError("resume: cannot open checkpoint '" + resume_from + "'");
        world.load_checkpoint(in);
    }

    namespace fs = std::filesystem;
    std::ofstream csv;
    std::string csv_path, checkpoint_path;
    if (!cfg.output_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) throw IoError("run: cannot create output dir '" + cfg.output_dir + "'");
        {
            std::ofstream rc(fs::path(cfg.output_dir) / "config.resolved.json");
            if (!rc) throw IoError("run: cannot write resolved config");
            rc << cfg.to_json_text() << '\n';
        }
        csv_path = (fs::path(cfg.output_dir) / "records.csv").string();
        checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();
        const bool append = !resume_from.empty() && fs::exists(csv_path);
        csv.open(csv_path, append ? std::ios::app : std::ios::trunc);
        if (!csv) throw IoError("run: cannot open '" + csv_path + "'");
        if (!append) csv << round_record_csv_header() << '\n' << std::flush;
    }

    ExperimentResult res;
    const std::size_t rounds = cfg.server.rounds;
    for (std::size_t t = world.state.round; t < rounds; ++t) {
        const bool evaluate = ((t + 1) % cfg.eval_every == 0) || t + 1 == rounds;
        RoundRecord rec;
        try {
            rec = world.run_round(evaluate);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (round " + std::to_string(t) + ")");
        }
        if (rec.identity_residual) {
            const double norm = linf_norm(world.state.wima_window->mean());
            const double normalized = *rec.identity_residual / (1.0 + norm);
            if (!res.max_identity_residual || *rec.identity_residual > *res.max_identity_residual)
                res.max_identity_residual = *rec.identity_residual;
            if (!res.max_identity_residual_normalized ||
                normalized > *res.max_identity_residual_normalized)
                res.max_identity_residual_normalized = normalized;
        }
        if (evaluate) {
            if (csv.is_open()) csv << round_record_csv_row(rec) << '\n' << std::flush;
            res.records.push_back(std::move(rec));
        }
        if (cfg.checkpoint_every > 0 && !checkpoint_path.empty() &&
            (t + 1) % cfg.checkpoint_every == 0) {
            std::ofstream out(checkpoint_path, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("run: cannot write checkpoint '" + checkpoint_path + "'");
            world.save_checkpoint(out);
        }
    }

    res.summary = summarize(res.records);
    if (!cfg.output_dir.empty()) {
        std::ofstream js(fs::path(cfg.output_dir) / "summary.json");
        if (!js) throw IoError("run: cannot write summary.json");
        js << summary_to_json(res.summary, res).dump(2) << '\n';
    }
    return res;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "window_size") return SweepAxis::window_size;
    if (s == "participation") return SweepAxis::participation;
    if (s == "swa_start") return SweepAxis::swa_start;
    if (s == "alpha") return SweepAxis::alpha;
    throw UsageError("sweep: unknown axis '" + s + "'");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::window_size: return "window_size";
    case SweepAxis::participation: return "participation";
    case SweepAxis::swa_start: return "swa_start";
    case SweepAxis::alpha: return "alpha";
    }
    return "?";
}

namespace {

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig cfg = base;
    switch (axis) {
    case SweepAxis::window_size: {
        if (!(value >= 1.0)) throw UsageError("sweep: window_size value must be >= 1");
        WimaConfig w = cfg.server.wima.value_or(WimaConfig{});
        w.window = static_cast<std::size_t>(std::llround(value));
        cfg.server.wima = std::move(w);
        break;
    }
    case SweepAxis::participation: {
        if (!(value > 0.0 && value <= 1.0))
            throw UsageError("sweep: participation value must be in (0, 1]");
        const auto k = static_cast<double>(cfg.partition.num_clients);
        const auto m = std::max<long long>(1, std::llround(value * k));
        cfg.server.clients_per_round =
            std::min<std::size_t>(cfg.partition.num_clients, static_cast<std::size_t>(m));
        break;
    }
    case SweepAxis::swa_start: {
        if (value < 0.0) throw UsageError("sweep: swa_start value must be >= 0");
        SwaConfig s = cfg.server.swa.value_or(SwaConfig{0, 10});
        s.start_round = static_cast<std::size_t>(std::llround(value));
        cfg.server.swa = s;
        break;
    }
    case SweepAxis::alpha: {
        if (value < 0.0) throw UsageError("sweep: alpha value must be >= 0");
        cfg.partition.alpha = value;
        break;
    }
    }
    return cfg;
}

} // namespace

SweepResult sweep(const ExperimentConfig& base, SweepAxis axis,
                  const std::vector<double>& values, std::size_t replicates) {
    if (values.empty()) throw UsageError("sweep: empty value list");
    if (replicates < 1) throw UsageError("sweep: replicates must be >= 1");

    namespace fs = std::filesystem;
    SweepResult result;
    result.axis = axis;

    for (double value : values) {
        for (std::size_t rep = 0; rep < replicates; ++rep) {
            ExperimentConfig cfg = apply_axis(base, axis, value);
            const std::uint64_t run_seed =
                derive_seed(base.server.seed, seed_stream::sweep,
                            static_cast<std::uint64_t>(axis), seed_bits(value), rep);
            cfg.server.seed = run_seed;
            cfg.partition.seed = derive_seed(base.partition.seed, seed_stream::sweep, rep);
            if (cfg.dataset.kind == DatasetConfig::Kind::synthetic)
                cfg.dataset.synthetic.seed =
                    derive_seed(base.dataset.synthetic.seed, seed_stream::sweep, rep);
            if (!base.output_dir.empty()) {
                cfg.output_dir = (fs::path(base.output_dir) /
                                  (to_string(axis) + "=" + fmt(value)) /
                                  ("rep" + std::to_string(rep)))
                                     .string();
            } else {
                cfg.output_dir.clear();
            }
            auto res = run_experiment(cfg);
            result.cells.push_back({value, rep, run_seed, res.summary});
        }
    }

    if (!base.output_dir.empty()) {
        std::error_code ec;
        fs::create_directories(base.output_dir, ec);
        if (ec) throw IoError("sweep: cannot create output dir '" + base.output_dir + "'");
        std::ofstream out(fs::path(base.output_dir) / "sweep.csv");
        if (!out) throw IoError("sweep: cannot write sweep.csv");
        out << "axis,value,replicate,final_score_fedavg,final_score_wima,final_score_swa,"
               "smoothness_fedavg,smoothness_wima\n";
        auto cell_row = [&](const SweepCell& c) {
            out << to_string(axis) << ',' << fmt(c.axis_value) << ',' << c.replicate << ','
                << fmt(c.summary.final_score_fedavg) << ','
                << (c.summary.final_score_wima ? fmt(*c.summary.final_score_wima) : "") << ','
                << (c.summary.final_score_swa ? fmt(*c.summary.final_score_swa) : "") << ','
                << fmt(c.summary.smoothness_fedavg) << ','
                << (c.summary.smoothness_wima ? fmt(*c.summary.smoothness_wima) : "") << '\n';
        };
        for (const auto& c : result.cells) cell_row(c);

        json j;
        j["axis"] = to_string(axis);
        for (double value : values) {
            double sum_f = 0, sum_w = 0;
            std::size_t n = 0, nw = 0;
            json reps = json::array();
            for (const auto& c : result.cells) {
                if (c.axis_value != value) continue;
                json r;
                r["replicate"] = c.replicate;
                r["run_seed"] = c.run_seed;
                r["final_score_fedavg"] = c.summary.final_score_fedavg;
                if (c.summary.final_score_wima) {
                    r["final_score_wima"] = *c.summary.final_score_wima;
                    sum_w += *c.summary.final_score_wima;
                    ++nw;
                }
                sum_f += c.summary.final_score_fedavg;
                ++n;
                reps.push_back(std::move(r));
            }
            json v;
            v["value"] = value;
            v["replicates"] = std::move(reps);
            v["mean_final_score_fedavg"] = sum_f / static_cast<double>(n);
            if (nw) v["mean_final_score_wima"] = sum_w / static_cast<double>(nw);
            j["values"].push_back(std::move(v));
        }
        std::ofstream jout(fs::path(base.output_dir) / "sweep.json");
        if (!jout) throw IoError("sweep: cannot write sweep.json");
        jout << j.dump(2) << '\n';
    }
    return result;
}

} // namespace fedsim

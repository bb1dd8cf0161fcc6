#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/server.hpp"

namespace fedsim {

struct SyntheticSpec {
    std::size_t num_classes = 2;
    std::size_t input_dim = 2;
    std::size_t samples_per_class = 100;
    double class_separation = 3.0;
    std::uint64_t seed = 0;
};

struct DatasetConfig {
    enum class Kind { synthetic, csv };
    Kind kind = Kind::synthetic;
    SyntheticSpec synthetic;
    std::string csv_path;
    std::optional<std::size_t> csv_num_classes;
};

struct PartitionConfig {
    std::size_t num_clients = 1;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    PartitionConfig partition;
    ModelSpec model; // input_dim / num_classes are filled in from the dataset
    LocalConfig local;
    ServerConfig server;
    std::size_t eval_every = 1;
    bool audit_identity = false;
    ExecMode exec = ExecMode::parallel;
    std::size_t checkpoint_every = 0;
    std::string output_dir;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
    std::string to_json_text() const; // fully resolved, written back for provenance
};

struct Summary {
    double final_score_fedavg = 0.0;
    std::optional<double> final_score_wima;
    std::optional<double> final_score_swa;
    double smoothness_fedavg = 0.0;
    std::optional<double> smoothness_wima;
    std::size_t tail = 0;              // rounds actually averaged
    std::size_t smoothness_window = 50;
};

struct ExperimentResult {
    std::vector<RoundRecord> records; // evaluated rounds only
    Summary summary;
    std::optional<double> max_identity_residual;
    std::optional<double> max_identity_residual_normalized; // residual / (1 + |wima|_inf)
};

// Mean accuracy over the last `tail` entries.
double final_score(const std::vector<double>& accuracies, std::size_t tail = 100);

// Mean rolling standard deviation (population form) over sliding windows.
double smoothness(const std::vector<double>& accuracies, std::size_t window = 50);

// Builds the federated world from the config, runs all rounds, and (when
// output_dir is set) writes records.csv, summary.json and the resolved
// config, flushing the CSV after every record. `resume_from` restores a
// checkpoint and continues the remaining rounds exactly.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& resume_from = {});

enum class SweepAxis { window_size, participation, swa_start, alpha };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis axis);

struct SweepCell {
    double axis_value = 0.0;
    std::size_t replicate = 0;
    std::uint64_t run_seed = 0;
    Summary summary;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::window_size;
    std::vector<SweepCell> cells; // every (value, replicate) pair
};

// One experiment per (value, replicate) with 3 replicates per value.
// Training randomness reseeds per cell while data/partition reseed per
// replicate only, so runs at the same replicate index share their dataset.
SweepResult sweep(const ExperimentConfig& base, SweepAxis axis,
                  const std::vector<double>& values, std::size_t replicates = 3);

// CSV helpers shared by the writer, the offline recompute check and the CLI.
std::string round_record_csv_header();
std::string round_record_csv_row(const RoundRecord& rec);
std::vector<RoundRecord> read_records_csv(const std::string& path);

} // namespace fedsim

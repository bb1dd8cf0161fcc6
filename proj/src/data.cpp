#include "fedsim/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

Batch Dataset::batch_of(const std::vector<std::size_t>& indices) const {
    Batch b;
    b.input_dim = input_dim;
    b.features.reserve(indices.size() * input_dim);
    b.labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        const double* row = features.data() + idx * input_dim;
        b.features.insert(b.features.end(), row, row + input_dim);
        b.labels.push_back(labels[idx]);
    }
    return b;
}

Batch Dataset::full_batch() const {
    Batch b;
    b.input_dim = input_dim;
    b.features = features;
    b.labels = labels;
    return b;
}

std::size_t FederatedDataset::train_size() const {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.data.size();
    return n;
}

Dataset generate_synthetic(std::size_t num_classes, std::size_t input_dim,
                           std::size_t samples_per_class, double class_separation,
                           std::uint64_t seed) {
    if (num_classes < 1 || input_dim < 1 || samples_per_class < 1)
        throw UsageError("generate_synthetic: counts must be >= 1");
    if (!(class_separation > 0.0))
        throw UsageError("generate_synthetic: class_separation must be > 0");

    const double spread = 1.5 * class_separation; // distance between adjacent means
    std::vector<double> means(num_classes * input_dim, 0.0);
    if (input_dim == 1) {
        for (std::size_t c = 0; c < num_classes; ++c)
            means[c] = spread * static_cast<double>(c);
    } else if (num_classes > 1) {
        const double radius = spread / (2.0 * std::sin(std::numbers::pi / num_classes));
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / num_classes;
            means[c * input_dim + 0] = radius * std::cos(angle);
            means[c * input_dim + 1] = radius * std::sin(angle);
        }
    }

    Dataset ds;
    ds.input_dim = input_dim;
    ds.num_classes = num_classes;
    const std::size_t n = num_classes * samples_per_class;
    ds.features.resize(n * input_dim);
    ds.labels.resize(n);

    Rng rng(derive_seed(seed, 0xb10b5));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
            double* x = ds.features.data() + row * input_dim;
            for (std::size_t j = 0; j < input_dim; ++j)
                x[j] = means[c * input_dim + j] + noise(rng);
            ds.labels[row] = static_cast<std::int32_t>(c);
        }
    }
    return ds;
}

namespace {

Dataset gather_rows(const Dataset& src, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.input_dim = src.input_dim;
    out.num_classes = src.num_classes;
    out.features.reserve(indices.size() * src.input_dim);
    out.labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        const double* row = src.features.data() + idx * src.input_dim;
        out.features.insert(out.features.end(), row, row + src.input_dim);
        out.labels.push_back(src.labels[idx]);
    }
    return out;
}

// Largest-remainder rounding of n * proportions to integers summing to n.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& proportions) {
    const std::size_t k = proportions.size();
    std::vector<std::size_t> out(k, 0);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double raw = static_cast<double>(n) * proportions[c];
        out[c] = static_cast<std::size_t>(std::floor(raw));
        assigned += out[c];
        remainders[c] = {raw - std::floor(raw), c};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) out[remainders[i % k].second]++;
    return out;
}

} // namespace

FederatedDataset partition_dirichlet(const Dataset& ds, std::size_t num_clients, double alpha,
                                     std::uint64_t seed, double test_fraction) {
    if (num_clients < 1) throw UsageError("partition_dirichlet: num_clients must be >= 1");
    if (alpha < 0.0) throw UsageError("partition_dirichlet: alpha must be >= 0");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw UsageError("partition_dirichlet: test_fraction must be in [0, 1)");
    if (ds.size() == 0) throw UsageError("partition_dirichlet: empty dataset");
    const std::size_t num_classes = ds.num_classes;
    if (num_classes == 0) throw UsageError("partition_dirichlet: dataset without classes");

    // Class-stratified test holdout, then shuffled per-class training pools.
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    std::vector<std::size_t> test_indices;
    std::vector<std::vector<std::size_t>> pools(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& rows = by_class[c];
        Rng rng(derive_seed(seed, 0x5717, c));
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto n_test =
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
        test_indices.insert(test_indices.end(), rows.begin(), rows.begin() + n_test);
        pools[c].assign(rows.begin() + n_test, rows.end());
    }
    std::sort(test_indices.begin(), test_indices.end());

    std::size_t n_train = 0;
    for (const auto& p : pools) n_train += p.size();
    if (n_train < num_clients)
        throw UsageError("partition_dirichlet: more clients than training samples");

    std::vector<std::vector<std::size_t>> client_indices(num_clients);

    if (num_clients == 1) {
        // Degenerate partition: the single client holds the whole training pool.
        for (const auto& p : pools)
            client_indices[0].insert(client_indices[0].end(), p.begin(), p.end());
    } else if (alpha == 0.0) {
        // One class per client, classes round-robin over clients. Within each
        // class the pool is split evenly over its clients, leftovers going one
        // sample per client in client-id order.
        if (num_clients < num_classes)
            throw UsageError("partition_dirichlet: alpha=0 needs num_clients >= num_classes");
        for (std::size_t c = 0; c < num_classes; ++c) {
            std::vector<std::size_t> holders;
            for (std::size_t i = c; i < num_clients; i += num_classes) holders.push_back(i);
            const auto& pool = pools[c];
            const std::size_t base = pool.size() / holders.size();
            const std::size_t extra = pool.size() % holders.size();
            std::size_t cursor = 0;
            for (std::size_t h = 0; h < holders.size(); ++h) {
                const std::size_t take = base + (h < extra ? 1 : 0);
                if (take == 0)
                    throw UsageError(
                        "partition_dirichlet: class pool too small, a client would be empty");
                auto& dst = client_indices[holders[h]];
                dst.insert(dst.end(), pool.begin() + cursor, pool.begin() + cursor + take);
                cursor += take;
            }
        }
    } else {
        // Balanced per-client sample counts with Dirichlet label proportions.
        std::vector<std::size_t> targets(num_clients);
        const std::size_t base = n_train / num_clients;
        const std::size_t extra = n_train % num_clients;
        for (std::size_t i = 0; i < num_clients; ++i) targets[i] = base + (i < extra ? 1 : 0);

        std::vector<std::size_t> taken(num_classes, 0);
        for (std::size_t i = 0; i < num_clients; ++i) {
            Rng rng(derive_seed(seed, 0xd112, i));
            const auto proportions = dirichlet_draw(rng, alpha, num_classes);
            auto want = apportion(targets[i], proportions);

            std::size_t got = 0;
            for (std::size_t c = 0; c < num_classes; ++c) {
                want[c] = std::min(want[c], pools[c].size() - taken[c]);
                got += want[c];
            }
            // Availability fell short of the drawn proportions; fill from the
            // classes with the most unconsumed samples (ties to lower id).
            while (got < targets[i]) {
                std::size_t best = num_classes;
                std::size_t best_left = 0;
                for (std::size_t c = 0; c < num_classes; ++c) {
                    const std::size_t left = pools[c].size() - taken[c] - want[c];
                    if (left > best_left) {
                        best_left = left;
                        best = c;
                    }
                }
                if (best == num_classes)
                    throw UsageError("partition_dirichlet: ran out of samples"); // unreachable
                want[best]++;
                got++;
            }
            for (std::size_t c = 0; c < num_classes; ++c) {
                auto& dst = client_indices[i];
                dst.insert(dst.end(), pools[c].begin() + taken[c],
                           pools[c].begin() + taken[c] + want[c]);
                taken[c] += want[c];
            }
        }
    }

    FederatedDataset fd;
    fd.client_indices = std::move(client_indices);
    fd.test_indices = std::move(test_indices);
    fd.test_set = gather_rows(ds, fd.test_indices);
    fd.clients.reserve(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) {
        if (fd.client_indices[i].empty())
            throw UsageError("partition_dirichlet: client " + std::to_string(i) +
                             " received no samples");
        fd.clients.push_back({i, gather_rows(ds, fd.client_indices[i])});
    }
    return fd;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

Dataset load_csv(const std::string& path, std::optional<std::size_t> expected_num_classes) {
    std::ifstream in(path);
    if (!in) throw IoError("load_csv: cannot open '" + path + "'");

    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::size_t cols = 0;
    std::int32_t max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
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
        if (cells.size() < 2)
            throw IoError("load_csv: " + path + ":" + std::to_string(line_no) +
                          ": need at least one feature column and a label");
        if (cols == 0)
            cols = cells.size();
        else if (cells.size() != cols)
            throw IoError("load_csv: " + path + ":" + std::to_string(line_no) +
                          ": inconsistent column count");

        for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
            const auto& cell = cells[j];
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw IoError("load_csv: " + path + ":" + std::to_string(line_no) +
                              ": non-numeric cell '" + cell + "'");
            ds.features.push_back(v);
        }
        const auto& label_cell = cells.back();
        std::int32_t label = 0;
        const auto res =
            std::from_chars(label_cell.data(), label_cell.data() + label_cell.size(), label);
        if (res.ec != std::errc{} || res.ptr != label_cell.data() + label_cell.size())
            throw IoError("load_csv: " + path + ":" + std::to_string(line_no) +
                          ": non-integer label '" + label_cell + "'");
        if (label < 0)
            throw IoError("load_csv: " + path + ":" + std::to_string(line_no) +
                          ": negative label");
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (ds.labels.empty()) throw UsageError("load_csv: '" + path + "' has no data rows");

    ds.input_dim = cols - 1;
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    if (expected_num_classes) {
        if (ds.num_classes > *expected_num_classes)
            throw UsageError("load_csv: label exceeds declared number of classes");
        ds.num_classes = *expected_num_classes;
    }
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_csv: cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.features.data() + i * ds.input_dim;
        for (std::size_t j = 0; j < ds.input_dim; ++j) out << format_double(row[j]) << ',';
        out << ds.labels[i] << '\n';
    }
    if (!out) throw IoError("save_csv: write failed for '" + path + "'");
}

std::string partition_manifest_json(const FederatedDataset& fd) {
    nlohmann::json j;
    j["num_clients"] = fd.num_clients();
    j["train_size"] = fd.train_size();
    j["test_size"] = fd.test_set.size();
    auto& clients = j["clients"] = nlohmann::json::object();
    for (std::size_t i = 0; i < fd.client_indices.size(); ++i)
        clients[std::to_string(i)] = fd.client_indices[i];
    j["test"] = fd.test_indices;
    return j.dump(2);
}

} // namespace fedsim

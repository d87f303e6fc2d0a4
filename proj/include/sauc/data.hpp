#pragma once

#include "sauc/dist.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sauc {

// Node x timestep matrix of non-negative integer counts, stored row-major
// (one row per node). Immutable after construction.
class CountPanel {
public:
    CountPanel(std::vector<std::string> node_ids, std::size_t steps, std::vector<std::int64_t> values,
               std::int64_t timestep_seconds = 3600);

    std::size_t nodes() const noexcept { return node_ids_.size(); }
    std::size_t steps() const noexcept { return steps_; }
    std::int64_t timestep_seconds() const noexcept { return timestep_seconds_; }

    const std::vector<std::string> &node_ids() const noexcept { return node_ids_; }
    const std::vector<std::int64_t> &values() const noexcept { return values_; }

    std::int64_t at(std::size_t node, std::size_t t) const { return values_[node * steps_ + t]; }
    std::span<const std::int64_t> row(std::size_t node) const {
        return {values_.data() + node * steps_, steps_};
    }

    // Fraction of cells equal to zero.
    double sparsity() const noexcept;
    double mean() const noexcept;

    friend bool operator==(const CountPanel &, const CountPanel &) = default;

private:
    std::vector<std::string> node_ids_;
    std::size_t steps_;
    std::vector<std::int64_t> values_;
    std::int64_t timestep_seconds_;
};

// Contiguous train / calibration / test partition of the time axis:
// train = [0, train_end), calib = [train_end, calib_end), test = [calib_end, steps).
struct SplitIndex {
    std::size_t train_end = 0;
    std::size_t calib_end = 0;
    std::size_t steps = 0;

    friend bool operator==(const SplitIndex &, const SplitIndex &) = default;
};

struct SplitFractions {
    double train = 0.6;
    double calib = 0.2;
    double test = 0.2;
};

enum class CsvLayout { Wide, Long };

CsvLayout parse_layout(std::string_view name);

// Wide: header `timestep,<node>,<node>,...`, one row per timestep.
// Long: header `node_id,timestep,count`; absent (node, timestep) cells are zero.
CountPanel parse_csv(std::istream &in, CsvLayout layout);
CountPanel ingest_csv(const std::filesystem::path &path, CsvLayout layout);

// Wide layout, timesteps numbered from 0.
void write_wide_csv(std::ostream &out, const CountPanel &panel);

// Sums consecutive blocks of `factor` timesteps; a trailing partial block is dropped.
CountPanel aggregate(const CountPanel &panel, std::size_t factor);

SplitIndex split(std::size_t steps, const SplitFractions &fractions = {});
inline SplitIndex split(const CountPanel &panel, const SplitFractions &fractions = {}) {
    return split(panel.steps(), fractions);
}

struct Centroid {
    double x = 0.0;
    double y = 0.0;
};

// Symmetric |V| x |V| kernel weights exp(-d_ij / scale).
class AdjacencyMatrix {
public:
    AdjacencyMatrix(std::size_t n, std::vector<double> weights, double scale)
        : n_(n), weights_(std::move(weights)), scale_(scale) {}

    std::size_t size() const noexcept { return n_; }
    double scale() const noexcept { return scale_; }
    double at(std::size_t i, std::size_t j) const { return weights_[i * n_ + j]; }
    const std::vector<double> &weights() const noexcept { return weights_; }

private:
    std::size_t n_;
    std::vector<double> weights_;
    double scale_;
};

AdjacencyMatrix build_adjacency(std::span<const Centroid> centroids, double scale = 0.1);

// Zero-inflated negative binomial panel generator.
//
// Node i at timestep t has base rate
//   mu_it = mu_i * (1 + amplitude * sin(2 pi (t + phase_i) / period))
// where mu_i is either given per node or, when `mu_spread` > 0, drawn as
// mu * exp(mu_spread * z_i - mu_spread^2 / 2) with z_i standard normal
// (mean-preserving log-normal heterogeneity). With probability
// `zero_inflation` a cell is a structural zero; otherwise it is drawn from
// NB(mu_it, alpha_i).
struct SyntheticSpec {
    std::size_t nodes = 0;
    std::size_t steps = 0;
    std::vector<double> mu;    // one value (shared) or one per node
    std::vector<double> alpha; // one value (shared) or one per node
    double zero_inflation = 0.0;
    double seasonal_amplitude = 0.0;
    std::size_t seasonal_period = 24;
    double mu_spread = 0.0;

    void validate() const;
};

struct SyntheticData {
    CountPanel panel;
    // NB(mu_it, alpha_i) count component for every cell, node-major like the
    // panel. The structural-zero mask is not part of these distributions.
    std::vector<PredictiveDistribution> truth;
};

SyntheticData generate_synthetic(const SyntheticSpec &spec, std::uint64_t seed);

// Base rates mu_i actually used for each node (after heterogeneity draws).
std::vector<double> synthetic_node_rates(const SyntheticSpec &spec, std::uint64_t seed);

} // namespace sauc

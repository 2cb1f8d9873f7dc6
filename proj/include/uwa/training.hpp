#pragma once

// Siamese training loop, Adam, final modulation extraction and checkpoints.

#include "uwa/channel.hpp"
#include "uwa/network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace uwa {

struct TrainConfig {
    std::uint32_t epochs = 2500;           // E
    std::uint32_t batches = 50;            // B per epoch
    std::uint32_t samples_per_batch = 200; // N_sample, pairs per batch
    double lambda = 0.005;
    double learning_rate = 2e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double train_sigma2 = 0.031622776601683794;  // 15 dB
    std::uint64_t seed = 1;
    std::uint32_t patience = 50;               // epochs without sufficient test-loss improvement
    double min_rel_improvement = 1e-4;
    TargetRule target = TargetRule::EqualShare;

    // Channels consumed per epoch, 2 B N_sample.
    std::uint64_t channels_per_epoch() const { return 2ull * batches * samples_per_batch; }

    // Throws InvalidArgument; with train_count given, also checks the epoch fits the dataset.
    void validate(std::optional<std::size_t> train_count = std::nullopt) const;

    LossSettings loss_settings() const { return {lambda, target}; }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamParams {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update of `params` in place. Throws NumericalError on a non-finite gradient.
void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad, const AdamParams& p);

struct BatchRecord {
    std::uint32_t epoch = 0;
    std::uint32_t batch = 0;
    double train_loss = 0.0;  // mean pair loss in the batch
    double f_term = 0.0;      // mean (f1 + f2) / 2
    double q_term = 0.0;      // mean q
    double wall_seconds = 0.0;
};

struct EpochRecord {
    std::uint32_t epoch = 0;
    double train_loss = 0.0;
    double train_f = 0.0;
    double train_q = 0.0;
    double test_loss = 0.0;    // mean over consecutive test pairs
    double test_f = 0.0;       // mean fairness objective over every test channel
    double test_q = 0.0;       // mean q over consecutive test pairs
    double consistency = 0.0;  // mean_m q(F_m, F) against the QR of the averaged outputs
    double wall_seconds = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainState {
    NetworkWeights weights;
    AdamState adam;
    std::uint32_t epochs_completed = 0;
    double best_test_loss = 0.0;
    std::uint32_t epochs_since_improvement = 0;
    bool stopped_early = false;
    std::vector<EpochRecord> history;
};

TrainState initial_state(std::size_t subcarriers, std::size_t guard, std::uint64_t seed);

// Precomputes H and the LMMSE core for every realization.
std::vector<ChannelSample> prepare_channels(const ChannelDataset& ds, double sigma2);

struct TestMetrics {
    double loss = 0.0;
    double f = 0.0;
    double q = 0.0;
    double consistency = 0.0;
};

TestMetrics evaluate_test(const NetworkWeights& w, std::span<const ChannelSample> test, const LossSettings& s);

// Mean fairness objective of a fixed modulation over a set of channels.
double mean_fairness(const ModulationMatrix& f, std::span<const ChannelSample> channels, TargetRule rule);

struct TrainHooks {
    std::function<void(const BatchRecord&)> on_batch;
    // Called after the epoch's record has been appended to state.history.
    std::function<void(const EpochRecord&, const TrainState&)> on_epoch;
};

// Runs epochs until `cfg.epochs` have been completed in total (counting a resumed state's
// earlier epochs) or the test loss stops improving.
//
// Per batch, N_sample pairs are drawn without replacement from an epoch-wise shuffle; their
// gradients are summed in pair order and applied with one Adam step.
TrainState train(const ChannelDataset& train_set, const ChannelDataset& test_set, const TrainConfig& cfg,
                 std::optional<TrainState> resume = std::nullopt, const TrainHooks& hooks = {});

struct FinalModulation {
    ModulationMatrix f;
    double consistency = 0.0;  // mean_m q(F_m, F)
};

// QR of the average network output over the test channels. Throws NumericalError if the
// average is rank deficient.
FinalModulation finalize_modulation(const NetworkWeights& w, std::span<const ChannelSample> test);
FinalModulation finalize_modulation(const NetworkWeights& w, const ChannelDataset& test_set);

// QR-orthonormalized mean of unitary matrices.
FinalModulation average_modulations(std::span<const ModulationMatrix> fs);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const std::filesystem::path& path);

struct Checkpoint {
    TrainConfig config;
    TrainState state;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uwa

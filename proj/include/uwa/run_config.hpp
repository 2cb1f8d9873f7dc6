#pragma once

// One JSON file describing a whole experiment: system, datasets, training, evaluation.
//
//   {
//     "system": { "subcarriers": 32, "guard": 8, "paths": 4, ... },
//     "data":   { "train_count": 2000, "test_count": 200, "train_seed": 1, "test_seed": 2 },
//     "train":  { "epochs": 100, "lambda": 0.005, "train_snr_db": 15, ... },
//     "eval":   { "snr_db": [0, 5, 10], "trials": 100, "seed": 7 }
//   }
//
// Every section and key is optional; missing keys keep their defaults. Unknown keys and
// out-of-range values are rejected with InvalidArgument naming the field.

#include "uwa/channel.hpp"
#include "uwa/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace uwa {

struct DataConfig {
    std::uint64_t train_count = 20000;
    std::uint64_t test_count = 1000;
    std::uint64_t train_seed = 1;
    std::uint64_t test_seed = 2;
};

struct EvalConfig {
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30};
    std::uint64_t trials = 10;  // per realization and SNR point
    std::uint64_t seed = 7;
};

struct RunConfig {
    SystemConfig system;
    DataConfig data;
    TrainConfig train;
    EvalConfig eval;
    bool log_wall_seconds = true;        // false writes 0 so logs are byte-reproducible
    std::uint32_t checkpoint_every = 10;  // epochs; 0 keeps only the final checkpoint

    void validate() const;
};

// Throws InvalidArgument on unknown keys, wrong types or invalid values.
RunConfig parse_run_config(const std::string& json_text);

// Throws IoError if the file cannot be read, FormatError if it is not JSON.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace uwa

#include "uwa/commands.hpp"

#include "uwa/channel.hpp"
#include "uwa/error.hpp"
#include "uwa/modem.hpp"
#include "uwa/objective.hpp"
#include "uwa/run_config.hpp"
#include "uwa/training.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace uwa {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
    cmd->add_option("--config", o.config, "JSON run configuration (defaults used when omitted)");
    cmd->add_option("--seed", o.seed, "overrides the seed taken from the configuration");
    cmd->add_option("--jobs", o.jobs, "worker threads; 1 runs the sequential path")->check(CLI::Range(1, 4096));
    auto* out = cmd->add_option("--out", o.out, "output file");
    if (out_required) out->required();
}

RunConfig load_config(const CommonOptions& o) {
    return o.config.empty() ? RunConfig{} : load_run_config(o.config);
}

void apply_jobs(const CommonOptions& o) {
    if (o.jobs) omp_set_num_threads(*o.jobs);
}

// Loads a dataset and checks it against the configured system. Without --config the
// dataset's own system parameters are adopted.
ChannelDataset load_matching_dataset(const std::string& path, RunConfig& rc, bool have_config) {
    ChannelDataset ds = load_dataset(path);
    if (!have_config) {
        rc.system = ds.config;
    } else if (!(ds.config == rc.system)) {
        std::ostringstream m;
        m << "dataset " << path << " does not match the configured system (dataset N=" << ds.config.subcarriers
          << ", N_g=" << ds.config.guard << ", P=" << ds.config.paths << "; config N=" << rc.system.subcarriers
          << ", N_g=" << rc.system.guard << ", P=" << rc.system.paths << ")";
        throw InvalidArgument(m.str());
    }
    return ds;
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_output(const fs::path& path, bool append = false) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    return f;
}

void check_written(std::ofstream& f, const fs::path& path) {
    f.flush();
    if (!f) throw IoError("write failed for " + path.string());
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
    fs::path p = base;
    p.replace_extension();
    return fs::path(p.string() + suffix);
}

// ---------------------------------------------------------------- gen-dataset

struct GenOptions {
    CommonOptions common;
    std::string split = "train";
    std::optional<std::uint64_t> count;
};

int gen_dataset(const GenOptions& o, std::ostream& out) {
    const RunConfig rc = load_config(o.common);
    apply_jobs(o.common);
    const bool train = o.split == "train";
    const std::uint64_t count = o.count.value_or(train ? rc.data.train_count : rc.data.test_count);
    const std::uint64_t seed = o.common.seed.value_or(train ? rc.data.train_seed : rc.data.test_seed);
    if (count == 0) throw InvalidArgument("--count must be >= 1");
    if (count > 0xFFFFFFFFull) throw InvalidArgument("--count exceeds the dataset format limit");

    const ChannelDataset ds = generate_dataset(rc.system, seed, count);
    save_dataset(ds, o.common.out);
    const DatasetSummary s = summarize(ds);
    out << "wrote " << ds.size() << " realizations (" << s.path_count << " paths, seed " << seed << ") to "
        << o.common.out << "\n"
        << "mean inter-arrival: " << s.mean_interarrival * 1e3 << " ms\n"
        << "decay slope over the guard interval: " << s.decay_slope_db << " dB\n"
        << "Doppler scale range: [" << s.min_scale << ", " << s.max_scale << "] (a_max "
        << rc.system.max_doppler_scale() << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------- train

struct TrainOptions {
    CommonOptions common;
    std::string train_path;
    std::string test_path;
    std::string fmatrix;
    std::string log;
    std::string epoch_log;
    std::string resume;
};

class TrainingLog {
public:
    TrainingLog(const fs::path& batch_path, const fs::path& epoch_path, bool append, bool wall)
        : batch_path_(batch_path), epoch_path_(epoch_path), wall_(wall) {
        const bool batch_exists = append && fs::exists(batch_path);
        const bool epoch_exists = append && fs::exists(epoch_path);
        batch_ = open_output(batch_path, append);
        epoch_ = open_output(epoch_path, append);
        if (!batch_exists) batch_ << "epoch,batch,train_loss,f_term,q_term,test_loss,wall_seconds\n";
        if (!epoch_exists) {
            epoch_ << "epoch,train_loss,train_f,train_q,test_loss,test_f,test_q,consistency,wall_seconds\n";
        }
    }

    void batch(const BatchRecord& b) { pending_.push_back(b); }

    // Batch rows are held until the epoch's test loss is known; it goes on the last row.
    void epoch(const EpochRecord& e) {
        for (std::size_t i = 0; i < pending_.size(); ++i) {
            const auto& b = pending_[i];
            batch_ << b.epoch << ',' << b.batch << ',' << fmt(b.train_loss) << ',' << fmt(b.f_term) << ','
                   << fmt(b.q_term) << ',' << (i + 1 == pending_.size() ? fmt(e.test_loss) : "") << ','
                   << wall(b.wall_seconds) << '\n';
        }
        pending_.clear();
        epoch_ << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.train_f) << ',' << fmt(e.train_q) << ','
               << fmt(e.test_loss) << ',' << fmt(e.test_f) << ',' << fmt(e.test_q) << ',' << fmt(e.consistency)
               << ',' << wall(e.wall_seconds) << '\n';
        check_written(batch_, batch_path_);
        check_written(epoch_, epoch_path_);
    }

private:
    std::string wall(double s) const { return wall_ ? fmt(s) : "0"; }

    fs::path batch_path_, epoch_path_;
    std::ofstream batch_, epoch_;
    bool wall_;
    std::vector<BatchRecord> pending_;
};

int train_command(const TrainOptions& o, std::ostream& out) {
    RunConfig rc = load_config(o.common);
    if (o.common.seed) rc.train.seed = *o.common.seed;
    apply_jobs(o.common);
    const bool have_config = !o.common.config.empty();
    const ChannelDataset train_set = load_matching_dataset(o.train_path, rc, have_config);
    const ChannelDataset test_set = load_matching_dataset(o.test_path, rc, true);
    rc.train.validate(train_set.size());

    std::optional<TrainState> resume;
    if (!o.resume.empty()) {
        Checkpoint cp = load_checkpoint(o.resume);
        if (cp.state.weights.subcarriers() != rc.system.subcarriers || cp.state.weights.guard() != rc.system.guard) {
            throw InvalidArgument("checkpoint " + o.resume + " was trained for different N / N_g");
        }
        cp.state.stopped_early = false;
        cp.state.epochs_since_improvement = 0;
        out << "resuming after epoch " << cp.state.epochs_completed << " (Adam step " << cp.state.adam.step << ")\n";
        resume = std::move(cp.state);
    }

    const fs::path checkpoint = o.common.out;
    const fs::path fmatrix = o.fmatrix.empty() ? with_suffix(checkpoint, ".uwaf") : fs::path(o.fmatrix);
    const fs::path log = o.log.empty() ? with_suffix(checkpoint, ".log.csv") : fs::path(o.log);
    const fs::path epoch_log = o.epoch_log.empty() ? with_suffix(checkpoint, ".epochs.csv") : fs::path(o.epoch_log);
    TrainingLog logger(log, epoch_log, resume.has_value(), rc.log_wall_seconds);

    TrainHooks hooks;
    hooks.on_batch = [&](const BatchRecord& b) { logger.batch(b); };
    hooks.on_epoch = [&](const EpochRecord& e, const TrainState& s) {
        logger.epoch(e);
        out << "epoch " << e.epoch << ": train loss " << e.train_loss << ", test loss " << e.test_loss
            << ", test f " << e.test_f << ", consistency " << e.consistency << "\n";
        if (rc.checkpoint_every != 0 && e.epoch % rc.checkpoint_every == 0) save_checkpoint(s, rc.train, checkpoint);
    };
    const TrainState state = train(train_set, test_set, rc.train, std::move(resume), hooks);
    save_checkpoint(state, rc.train, checkpoint);
    if (state.stopped_early) out << "stopped early after epoch " << state.epochs_completed << "\n";

    const auto test = prepare_channels(test_set, rc.train.train_sigma2);
    const FinalModulation final = finalize_modulation(state.weights, test);
    save_modulation(final.f, fmatrix);

    const std::size_t n = rc.system.subcarriers;
    const TargetRule rule = rc.train.target;
    out << "final modulation written to " << fmatrix.string() << "\n"
        << "consistency mean_m q(F_m, F): " << final.consistency << "\n"
        << "test fairness f, learned F: " << mean_fairness(final.f, test, rule) << "\n"
        << "test fairness f, DFT baseline: " << mean_fairness(dft_matrix(n), test, rule) << "\n"
        << "test fairness f, identity baseline: " << mean_fairness(identity_matrix(n), test, rule) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- eval-ber

struct EvalOptions {
    CommonOptions common;
    std::string dataset;
    std::string fmatrix;
    std::string builtin;
    std::vector<double> snr_db;
    std::optional<std::uint64_t> trials;
    std::string plot;
};

ModulationMatrix select_modulation(const std::string& fmatrix, const std::string& builtin, std::size_t n) {
    if (!fmatrix.empty()) {
        const ComplexMatrix raw = load_modulation_raw(fmatrix);
        if (!raw.square() || unitarity_residual(raw) >= kUnitarityTolerance) {
            throw InvalidArgument("modulation file fails unitarity: " + fmatrix);
        }
        ModulationMatrix f(raw);
        if (f.size() != n) {
            throw InvalidArgument("modulation file " + fmatrix + " is " + std::to_string(f.size()) +
                                  " x " + std::to_string(f.size()) + ", dataset has N = " + std::to_string(n));
        }
        return f;
    }
    return builtin == "dft" ? dft_matrix(n) : identity_matrix(n);
}

int eval_ber(const EvalOptions& o, std::ostream& out) {
    RunConfig rc = load_config(o.common);
    apply_jobs(o.common);
    const ChannelDataset ds = load_matching_dataset(o.dataset, rc, !o.common.config.empty());
    const auto snr = o.snr_db.empty() ? rc.eval.snr_db : o.snr_db;
    const std::uint64_t trials = o.trials.value_or(rc.eval.trials);
    const std::uint64_t seed = o.common.seed.value_or(rc.eval.seed);
    if (trials == 0) throw InvalidArgument("--trials must be >= 1");
    const ModulationMatrix f = select_modulation(o.fmatrix, o.builtin, rc.system.subcarriers);

    const auto points = ber_sweep(f, ds, snr, trials, seed);
    auto csv = open_output(o.common.out);
    write_ber_csv(csv, points);
    check_written(csv, o.common.out);
    if (!o.plot.empty()) {
        auto plot = open_output(o.plot);
        write_ber_plot_data(plot, points);
        check_written(plot, o.plot);
    }
    for (const auto& p : points) {
        out << "SNR " << p.snr_db << " dB: BER " << p.ber() << " (" << p.bit_errors << " / " << p.bits << " bits)\n";
    }
    return kExitOk;
}

// -------------------------------------------------------------------- inspect

struct InspectOptions {
    CommonOptions common;
    std::string dataset;
    std::string fmatrix;
    std::optional<double> snr_db;
    std::size_t channel = 0;
};

struct Spread {
    double min = 0.0, max = 0.0, std = 0.0;
};

Spread spread(const std::vector<double>& e) {
    Spread s{*std::min_element(e.begin(), e.end()), *std::max_element(e.begin(), e.end()), 0.0};
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    for (double v : e) s.std += (v - mean) * (v - mean);
    s.std = std::sqrt(s.std / static_cast<double>(e.size()));
    return s;
}

int inspect(const InspectOptions& o, std::ostream& out) {
    RunConfig rc = load_config(o.common);
    apply_jobs(o.common);
    const ChannelDataset ds = load_matching_dataset(o.dataset, rc, !o.common.config.empty());
    const ComplexMatrix raw = load_modulation_raw(o.fmatrix);
    const std::size_t n = rc.system.subcarriers;
    if (raw.rows() != n) throw InvalidArgument("modulation size differs from dataset N");
    const double residual = unitarity_residual(raw);
    out << "unitarity residual ||F^H F - I||_F: " << residual << "\n";
    if (residual >= kUnitarityTolerance) throw InvalidArgument("modulation file fails unitarity: " + o.fmatrix);
    if (o.channel >= ds.size()) throw InvalidArgument("--channel is beyond the dataset size");

    const double sigma2 = o.snr_db ? snr_db_to_sigma2(*o.snr_db) : rc.train.train_sigma2;
    const std::vector<ComplexMatrix> mods{identity_matrix(n).matrix(), dft_matrix(n).matrix(), raw};
    const char* names[] = {"identity", "dft", "F"};

    std::vector<double> deviation(ds.size());
    std::vector<std::array<double, 3>> spread_std(ds.size()), fairness(ds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const ComplexMatrix core = scaled_core_inverse(ds.channel(i), sigma2);
        double t0 = 0.0;
        for (std::size_t m = 0; m < 3; ++m) {
            const MseProfile e = mse_profile(error_correlation_from_core(core, mods[m]));
            if (m == 0) t0 = e.total;
            deviation[i] = std::max(deviation[i], std::abs(e.total - t0) / t0);
            spread_std[i][m] = spread(e.e).std;
            fairness[i][m] = fairness_objective(e, optimal_profile(e, rc.train.target));
        }
    }
    out << "trace-invariance deviation over " << ds.size()
        << " channels: " << *std::max_element(deviation.begin(), deviation.end()) << "\n";

    const ComplexMatrix core = scaled_core_inverse(ds.channel(o.channel), sigma2);
    std::vector<MseProfile> profiles;
    for (const auto& f : mods) profiles.push_back(mse_profile(error_correlation_from_core(core, f)));
    out << "per-symbol MSE e_H, channel " << o.channel << ", sigma2 " << sigma2 << ":\n";
    for (std::size_t m = 0; m < 3; ++m) {
        const Spread s = spread(profiles[m].e);
        double mean_std = 0.0, mean_f = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            mean_std += spread_std[i][m];
            mean_f += fairness[i][m];
        }
        out << "  " << names[m] << ": min " << s.min << ", max " << s.max << ", std " << s.std
            << "; dataset mean std " << mean_std / ds.size() << ", mean f " << mean_f / ds.size() << "\n";
    }
    if (!o.common.out.empty()) {
        auto csv = open_output(o.common.out);
        csv << "symbol,e_identity,e_dft,e_f,e_target\n";
        const double target = profiles[0].total / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            csv << k << ',' << fmt(profiles[0].e[k]) << ',' << fmt(profiles[1].e[k]) << ',' << fmt(profiles[2].e[k])
                << ',' << fmt(target) << '\n';
        }
        check_written(csv, o.common.out);
    }
    return kExitOk;
}

// ------------------------------------------------------------------- export-f

struct ExportOptions {
    CommonOptions common;
    std::string fmatrix;
    std::string format = "csv";
};

int export_f(const ExportOptions& o, std::ostream& out) {
    apply_jobs(o.common);
    const ModulationMatrix f = load_modulation(o.fmatrix);
    if (o.format == "binary") {
        save_modulation(f, o.common.out);
    } else {
        auto csv = open_output(o.common.out);
        write_modulation_csv(csv, f.matrix());
        check_written(csv, o.common.out);
    }
    out << "exported " << f.size() << " x " << f.size() << " modulation to " << o.common.out << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fair waveform design for delay-scale underwater acoustic channels"};
    app.name(args.empty() ? "uwamod" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "generate a channel dataset (UWAD)");
    add_common(gen_cmd, gen.common, true);
    gen_cmd->add_option("--split", gen.split, "which data section supplies count and seed")
        ->check(CLI::IsMember({"train", "test"}));
    gen_cmd->add_option("--count", gen.count, "number of realizations");

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "train the modulation network; --out names the checkpoint");
    add_common(train_cmd, tr.common, true);
    train_cmd->add_option("--train", tr.train_path, "training dataset")->required();
    train_cmd->add_option("--test", tr.test_path, "test dataset")->required();
    train_cmd->add_option("--fmatrix", tr.fmatrix, "final modulation file (default <out>.uwaf)");
    train_cmd->add_option("--log", tr.log, "per-batch training log CSV (default <out>.log.csv)");
    train_cmd->add_option("--epoch-log", tr.epoch_log, "per-epoch CSV (default <out>.epochs.csv)");
    train_cmd->add_option("--resume", tr.resume, "continue from this checkpoint");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval-ber", "Monte Carlo BER of a modulation over a dataset");
    add_common(eval_cmd, ev.common, true);
    eval_cmd->add_option("--dataset", ev.dataset, "channel dataset")->required();
    auto* fm = eval_cmd->add_option("--fmatrix", ev.fmatrix, "modulation file (UWAF)");
    auto* bi = eval_cmd->add_option("--builtin", ev.builtin, "baseline modulation")
                   ->check(CLI::IsMember({"identity", "dft"}));
    fm->excludes(bi);
    eval_cmd->add_option("--snr", ev.snr_db, "SNR points in dB (default from the configuration)");
    eval_cmd->add_option("--trials", ev.trials, "noise trials per realization and SNR");
    eval_cmd->add_option("--plot", ev.plot, "also write snr/log10(BER) pairs for plotting");

    InspectOptions in;
    auto* inspect_cmd = app.add_subcommand("inspect", "unitarity, trace invariance and MSE profiles of a modulation");
    add_common(inspect_cmd, in.common, false);
    inspect_cmd->add_option("--dataset", in.dataset, "channel dataset")->required();
    inspect_cmd->add_option("--fmatrix", in.fmatrix, "modulation file (UWAF)")->required();
    inspect_cmd->add_option("--snr", in.snr_db, "SNR in dB (default: the training SNR)");
    inspect_cmd->add_option("--channel", in.channel, "realization used for the per-symbol profile");

    ExportOptions ex;
    auto* export_cmd = app.add_subcommand("export-f", "export a modulation file as CSV or binary");
    add_common(export_cmd, ex.common, true);
    export_cmd->add_option("--fmatrix", ex.fmatrix, "modulation file (UWAF)")->required();
    export_cmd->add_option("--format", ex.format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    const int saved_threads = omp_get_max_threads();
    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return kExitOk;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << "\n";
            return kExitValidation;
        }
        if (eval_cmd->parsed() && ev.fmatrix.empty() && ev.builtin.empty()) {
            throw InvalidArgument("eval-ber needs --fmatrix or --builtin");
        }
        int code = kExitOk;
        if (gen_cmd->parsed()) code = gen_dataset(gen, out);
        if (train_cmd->parsed()) code = train_command(tr, out);
        if (eval_cmd->parsed()) code = eval_ber(ev, out);
        if (inspect_cmd->parsed()) code = inspect(in, out);
        if (export_cmd->parsed()) code = export_f(ex, out);
        omp_set_num_threads(saved_threads);
        return code;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        omp_set_num_threads(saved_threads);
        return kExitValidation;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        omp_set_num_threads(saved_threads);
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        omp_set_num_threads(saved_threads);
        return kExitFailure;
    }
}

}  // namespace uwa

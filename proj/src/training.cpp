#include "uwa/training.hpp"

#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>

namespace uwa {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;

// Runs body(i) for i in [0, count) on the OpenMP team and rethrows the first failure.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    std::exception_ptr failure;
    std::mutex guard;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(guard);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<std::size_t> shuffled_indices(std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = count; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

}  // namespace

void TrainConfig::validate(std::optional<std::size_t> train_count) const {
    auto fail = [](const std::string& m) { throw InvalidArgument("TrainConfig: " + m); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (batches < 1) fail("batches must be >= 1");
    if (samples_per_batch < 1) fail("samples_per_batch must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
    if (!(train_sigma2 > 0.0) || !std::isfinite(train_sigma2)) fail("train_sigma2 must be > 0");
    if (!(min_rel_improvement >= 0.0 && min_rel_improvement < 1.0)) fail("min_rel_improvement must lie in [0, 1)");
    if (patience < 1) fail("patience must be >= 1");
    if (train_count && channels_per_epoch() > *train_count) {
        fail("2 * batches * samples_per_batch = " + std::to_string(channels_per_epoch()) +
             " exceeds the training set size " + std::to_string(*train_count));
    }
}

void adam_step(std::span<double> params, AdamState& s, std::span<const double> grad, const AdamParams& p) {
    if (grad.size() != params.size()) throw InvalidArgument("adam_step: gradient size differs from parameters");
    if (s.m.empty()) s.m.assign(params.size(), 0.0);
    if (s.v.empty()) s.v.assign(params.size(), 0.0);
    if (s.m.size() != params.size() || s.v.size() != params.size()) {
        throw InvalidArgument("adam_step: moment shapes differ from parameters");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericalError("adam_step: non-finite gradient at parameter " + std::to_string(i) + ", step " +
                                 std::to_string(s.step + 1) + "; training aborted");
        }
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        s.m[i] = p.beta1 * s.m[i] + (1.0 - p.beta1) * g;
        s.v[i] = p.beta2 * s.v[i] + (1.0 - p.beta2) * g * g;
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
    }
}

TrainState initial_state(std::size_t subcarriers, std::size_t guard, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, {kInitStream});
    TrainState s;
    s.weights = NetworkWeights::initialize(subcarriers, guard, rng);
    s.adam.m.assign(s.weights.parameter_count(), 0.0);
    s.adam.v.assign(s.weights.parameter_count(), 0.0);
    return s;
}

std::vector<ChannelSample> prepare_channels(const ChannelDataset& ds, double sigma2) {
    std::vector<ChannelSample> out(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) { out[i] = prepare_channel(ds.channel(i), sigma2); });
    return out;
}

FinalModulation average_modulations(std::span<const ModulationMatrix> fs) {
    if (fs.empty()) throw InvalidArgument("average_modulations: no matrices");
    const std::size_t n = fs.front().size();
    ComplexMatrix mean(n, n);
    for (const auto& f : fs) mean += f.matrix();
    mean *= 1.0 / static_cast<double>(fs.size());
    ModulationMatrix result(householder_qr(mean).q);
    double consistency = 0.0;
    for (const auto& f : fs) consistency += siamese_distance(f, result);
    return {std::move(result), consistency / static_cast<double>(fs.size())};
}

namespace {

std::vector<ModulationMatrix> forward_all(const NetworkWeights& w, std::span<const ChannelSample> channels) {
    std::vector<std::optional<ModulationMatrix>> tmp(channels.size());
    parallel_for(channels.size(), [&](std::size_t i) { tmp[i] = forward(w, channels[i].h); });
    std::vector<ModulationMatrix> out;
    out.reserve(tmp.size());
    for (auto& f : tmp) out.push_back(std::move(*f));
    return out;
}

double fairness_of(const ChannelSample& c, const ModulationMatrix& f, TargetRule rule) {
    const MseProfile e = mse_profile(error_correlation_from_core(c.core, f.matrix()));
    return fairness_objective(e, optimal_profile(e, rule));
}

}  // namespace

FinalModulation finalize_modulation(const NetworkWeights& w, std::span<const ChannelSample> test) {
    if (test.empty()) throw InvalidArgument("finalize_modulation: empty test set");
    const auto fs = forward_all(w, test);
    return average_modulations(fs);
}

FinalModulation finalize_modulation(const NetworkWeights& w, const ChannelDataset& test_set) {
    // The LMMSE core is not needed here; any positive sigma2 will do.
    std::vector<ChannelSample> channels(test_set.size());
    for (std::size_t i = 0; i < test_set.size(); ++i) channels[i].h = test_set.channel(i);
    return finalize_modulation(w, channels);
}

double mean_fairness(const ModulationMatrix& f, std::span<const ChannelSample> channels, TargetRule rule) {
    std::vector<double> values(channels.size());
    parallel_for(channels.size(), [&](std::size_t i) { values[i] = fairness_of(channels[i], f, rule); });
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(channels.size());
}

TestMetrics evaluate_test(const NetworkWeights& w, std::span<const ChannelSample> test, const LossSettings& s) {
    if (test.empty()) throw InvalidArgument("evaluate_test: empty test set");
    const auto fs = forward_all(w, test);
    std::vector<double> f(test.size());
    parallel_for(test.size(), [&](std::size_t i) { f[i] = fairness_of(test[i], fs[i], s.target); });

    TestMetrics m;
    for (double v : f) m.f += v;
    m.f /= static_cast<double>(test.size());

    const std::size_t pairs = test.size() / 2;
    if (pairs == 0) {
        // A single test channel: q is zero by construction.
        m.loss = siamese_loss(f[0], f[0], 0.0, s.lambda);
    } else {
        for (std::size_t p = 0; p < pairs; ++p) {
            const double q = siamese_distance(fs[2 * p], fs[2 * p + 1]);
            m.q += q;
            m.loss += siamese_loss(f[2 * p], f[2 * p + 1], q, s.lambda);
        }
        m.q /= static_cast<double>(pairs);
        m.loss /= static_cast<double>(pairs);
    }
    m.consistency = average_modulations(fs).consistency;
    return m;
}

TrainState train(const ChannelDataset& train_set, const ChannelDataset& test_set, const TrainConfig& cfg,
                 std::optional<TrainState> resume, const TrainHooks& hooks) {
    cfg.validate(train_set.size());
    if (test_set.realizations.empty()) throw InvalidArgument("train: empty test set");
    if (!(train_set.config == test_set.config)) throw InvalidArgument("train: train and test configurations differ");

    const std::size_t n = train_set.config.subcarriers;
    const std::size_t guard = train_set.config.guard;
    TrainState state = resume ? std::move(*resume) : initial_state(n, guard, cfg.seed);
    if (state.weights.subcarriers() != n || state.weights.guard() != guard) {
        throw InvalidArgument("train: resumed weights do not match the dataset dimensions");
    }

    const LossSettings loss = cfg.loss_settings();
    const AdamParams adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    const auto test = prepare_channels(test_set, cfg.train_sigma2);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    NetworkWeights grad(n, guard);
    std::vector<PairTrace> traces(cfg.samples_per_batch);
    std::vector<const SampleTrace*> ordered(2 * cfg.samples_per_batch);

    while (state.epochs_completed < cfg.epochs && !state.stopped_early) {
        const std::uint32_t epoch = state.epochs_completed + 1;
        Rng shuffle_rng = Rng::substream(cfg.seed, {kShuffleStream, epoch});
        const auto order = shuffled_indices(train_set.size(), shuffle_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        for (std::uint32_t b = 0; b < cfg.batches; ++b) {
            const std::size_t base = 2ull * b * cfg.samples_per_batch;
            parallel_for(cfg.samples_per_batch, [&](std::size_t s) {
                const ChannelSample first =
                    prepare_channel(train_set.channel(order[base + 2 * s]), cfg.train_sigma2);
                const ChannelSample second =
                    prepare_channel(train_set.channel(order[base + 2 * s + 1]), cfg.train_sigma2);
                traces[s] = pair_forward_backward(state.weights, first, second, loss);
            });

            BatchRecord br;
            br.epoch = epoch;
            br.batch = b + 1;
            for (std::size_t s = 0; s < traces.size(); ++s) {
                ordered[2 * s] = &traces[s].first;
                ordered[2 * s + 1] = &traces[s].second;
                br.train_loss += traces[s].terms.loss;
                br.f_term += 0.5 * (traces[s].terms.f1 + traces[s].terms.f2);
                br.q_term += traces[s].terms.q;
            }
            const auto count = static_cast<double>(traces.size());
            br.train_loss /= count;
            br.f_term /= count;
            br.q_term /= count;

            grad.set_zero();
            accumulate_gradients(ordered, grad);
            adam_step(state.weights.params(), state.adam, grad.params(), adam);

            rec.train_loss += br.train_loss;
            rec.train_f += br.f_term;
            rec.train_q += br.q_term;
            br.wall_seconds = elapsed();
            if (hooks.on_batch) hooks.on_batch(br);
        }
        rec.train_loss /= cfg.batches;
        rec.train_f /= cfg.batches;
        rec.train_q /= cfg.batches;

        const TestMetrics tm = evaluate_test(state.weights, test, loss);
        rec.test_loss = tm.loss;
        rec.test_f = tm.f;
        rec.test_q = tm.q;
        rec.consistency = tm.consistency;
        rec.wall_seconds = elapsed();

        if (state.history.empty() || rec.test_loss < state.best_test_loss * (1.0 - cfg.min_rel_improvement)) {
            state.best_test_loss = rec.test_loss;
            state.epochs_since_improvement = 0;
        } else if (++state.epochs_since_improvement >= cfg.patience) {
            state.stopped_early = true;
        }
        state.history.push_back(rec);
        state.epochs_completed = epoch;
        if (hooks.on_epoch) hooks.on_epoch(rec, state);
    }
    return state;
}

namespace {

void write_train_config(io::ByteWriter& w, const TrainConfig& c) {
    w.u32(c.epochs);
    w.u32(c.batches);
    w.u32(c.samples_per_batch);
    w.f64(c.lambda);
    w.f64(c.learning_rate);
    w.f64(c.adam_beta1);
    w.f64(c.adam_beta2);
    w.f64(c.adam_epsilon);
    w.f64(c.train_sigma2);
    w.u64(c.seed);
    w.u32(c.patience);
    w.f64(c.min_rel_improvement);
    w.u32(static_cast<std::uint32_t>(c.target));
}

TrainConfig read_train_config(io::ByteReader& r) {
    TrainConfig c;
    c.epochs = r.u32("epochs");
    c.batches = r.u32("batches");
    c.samples_per_batch = r.u32("samples_per_batch");
    c.lambda = r.f64("lambda");
    c.learning_rate = r.f64("learning_rate");
    c.adam_beta1 = r.f64("adam_beta1");
    c.adam_beta2 = r.f64("adam_beta2");
    c.adam_epsilon = r.f64("adam_epsilon");
    c.train_sigma2 = r.f64("train_sigma2");
    c.seed = r.u64("seed");
    c.patience = r.u32("patience");
    c.min_rel_improvement = r.f64("min_rel_improvement");
    const std::uint64_t at = r.offset();
    const auto target = r.u32("target_rule");
    if (target > 1) throw FormatError("unknown target rule " + std::to_string(target), at);
    c.target = static_cast<TargetRule>(target);
    return c;
}

void write_array(io::ByteWriter& w, std::span<const double> values) {
    for (double v : values) w.f64(v);
}

void read_array(io::ByteReader& r, std::span<double> values, const char* field) {
    for (auto& v : values) v = r.f64(field);
}

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("UWAT");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(state.weights.subcarriers()));
    w.u32(static_cast<std::uint32_t>(state.weights.guard()));
    write_train_config(w, cfg);
    w.u64(state.adam.step);
    w.u64(state.weights.parameter_count());
    write_array(w, state.weights.params());
    write_array(w, state.adam.m);
    write_array(w, state.adam.v);
    // Resume bookkeeping.
    w.u32(state.epochs_completed);
    w.f64(state.best_test_loss);
    w.u32(state.epochs_since_improvement);
    w.u32(state.stopped_early ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(state.history.size()));
    for (const auto& h : state.history) {
        w.u32(h.epoch);
        for (double v : {h.train_loss, h.train_f, h.train_q, h.test_loss, h.test_f, h.test_q, h.consistency,
                         h.wall_seconds})
            w.f64(v);
    }
    io::write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path));
    r.expect_magic("UWAT");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
    }
    const std::uint64_t dims_at = r.offset();
    const auto n = r.u32("N");
    const auto guard = r.u32("N_g");
    if (n < 2) throw FormatError("N must be >= 2", dims_at);

    Checkpoint cp;
    cp.config = read_train_config(r);
    auto& s = cp.state;
    s.adam.step = r.u64("step");
    s.weights = NetworkWeights(n, guard);
    const std::uint64_t count_at = r.offset();
    const auto count = r.u64("parameter_count");
    if (count != s.weights.parameter_count()) {
        throw FormatError("parameter count " + std::to_string(count) + " does not match N, N_g", count_at);
    }
    if (r.remaining() < 3 * count * sizeof(double)) throw FormatError("truncated parameter arrays", r.offset());
    read_array(r, s.weights.params(), "weights");
    s.adam.m.resize(count);
    s.adam.v.resize(count);
    read_array(r, s.adam.m, "adam_m");
    read_array(r, s.adam.v, "adam_v");
    if (!s.weights.all_finite()) throw FormatError("non-finite weights", count_at);

    s.epochs_completed = r.u32("epochs_completed");
    s.best_test_loss = r.f64("best_test_loss");
    s.epochs_since_improvement = r.u32("epochs_since_improvement");
    s.stopped_early = r.u32("stopped_early") != 0;
    const auto records = r.u32("history_count");
    if (r.remaining() != std::uint64_t{records} * (4 + 8 * 8)) throw FormatError("history size mismatch", r.offset());
    s.history.resize(records);
    for (auto& h : s.history) {
        h.epoch = r.u32("epoch");
        for (double* v : {&h.train_loss, &h.train_f, &h.train_q, &h.test_loss, &h.test_f, &h.test_q, &h.consistency,
                          &h.wall_seconds})
            *v = r.f64("history");
    }
    r.expect_end();
    return cp;
}

}  // namespace uwa

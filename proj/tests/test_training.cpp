#include "doctest.h"
#include "oracles.hpp"

#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"
#include "uwa/modem.hpp"
#include "uwa/training.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <omp.h>

using namespace uwa;

namespace {

std::filesystem::path scratch(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / "uwa_training_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

SystemConfig tiny_system() {
    SystemConfig c;
    c.subcarriers = 4;
    c.guard = 1;
    c.paths = 3;
    c.mean_interarrival = 0.5 * c.sample_period();
    return c;
}

TrainConfig tiny_train() {
    TrainConfig t;
    t.epochs = 3;
    t.batches = 2;
    t.samples_per_batch = 4;
    t.learning_rate = 1e-3;
    t.seed = 9;
    return t;
}

}  // namespace

TEST_CASE("adam") {
    const AdamParams p{2e-4, 0.9, 0.999, 1e-8};
    SUBCASE("zero gradient leaves weights and decays moments") {
        std::vector<double> w{1.0, -2.0};
        AdamState s{{0.5, -0.5}, {0.25, 0.25}, 3};
        const std::vector<double> g{0.0, 0.0};
        const auto w0 = w;
        adam_step(w, s, g, p);
        CHECK(s.m[0] == doctest::Approx(0.45).epsilon(1e-15));
        CHECK(s.v[0] == doctest::Approx(0.24975).epsilon(1e-15));
        CHECK(s.step == 4);
        // Weights move only by the decayed old momentum, never by the zero gradient.
        AdamState z;
        std::vector<double> w2 = w0;
        adam_step(w2, z, g, p);
        CHECK(w2 == w0);
    }
    SUBCASE("first step is a sign step of size lr") {
        std::vector<double> w{0.0, 0.0};
        AdamState s;
        const std::vector<double> g{3.7, -0.02};
        adam_step(w, s, g, p);
        CHECK(std::abs(w[0] + p.learning_rate) < 1e-6 * p.learning_rate);
        CHECK(std::abs(w[1] - p.learning_rate) < 1e-6 * p.learning_rate);
    }
    SUBCASE("matches scalar Adam") {
        oracle::ScalarAdam ref{p.learning_rate, p.beta1, p.beta2, p.epsilon};
        std::vector<double> w{0.3};
        double theta = 0.3;
        AdamState s;
        for (double g : {0.5, -0.5, 0.2, 1e-3, -4.0}) {
            const std::vector<double> gv{g};
            adam_step(w, s, gv, p);
            theta = ref.step(theta, g);
            CHECK(w[0] == doctest::Approx(theta).epsilon(1e-15));
            CHECK(s.v[0] == doctest::Approx(ref.v).epsilon(1e-15));
        }
    }
    SUBCASE("non-finite gradient aborts") {
        std::vector<double> w{0.0};
        AdamState s;
        const std::vector<double> g{std::nan("")};
        CHECK_THROWS_AS(adam_step(w, s, g, p), NumericalError);
    }
}

TEST_CASE("train config validation") {
    TrainConfig t;
    CHECK_NOTHROW(t.validate());
    CHECK_THROWS_AS(t.validate(100), InvalidArgument);
    t.lambda = 2.0;
    CHECK_THROWS_AS(t.validate(), InvalidArgument);
    t = {};
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("minimal training run") {
    const auto sys = tiny_system();
    const auto tr = generate_dataset(sys, 1, 2);
    const auto te = generate_dataset(sys, 2, 2);
    TrainConfig t;
    t.epochs = 1;
    t.batches = 1;
    t.samples_per_batch = 1;
    int batches = 0;
    TrainHooks hooks;
    hooks.on_batch = [&](const BatchRecord&) { ++batches; };
    const auto s = train(tr, te, t, std::nullopt, hooks);
    CHECK(batches == 1);
    CHECK(s.history.size() == 1);
    CHECK(s.adam.step == 1);
    CHECK(s.epochs_completed == 1);
    CHECK(std::isfinite(s.history[0].test_loss));
    CHECK_FALSE(s.weights == initial_state(4, 1, t.seed).weights);
}

TEST_CASE("training is deterministic across runs and thread counts") {
    const auto sys = tiny_system();
    const auto tr = generate_dataset(sys, 1, 24);
    const auto te = generate_dataset(sys, 2, 6);
    const auto t = tiny_train();
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = train(tr, te, t);
    omp_set_num_threads(4);
    const auto b = train(tr, te, t);
    omp_set_num_threads(saved);
    CHECK(a.weights == b.weights);
    CHECK(a.adam == b.adam);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].test_loss == b.history[i].test_loss);
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
    }
}

TEST_CASE("resume continues the same trajectory") {
    const auto sys = tiny_system();
    const auto tr = generate_dataset(sys, 1, 24);
    const auto te = generate_dataset(sys, 2, 6);
    const auto t = tiny_train();
    const auto full = train(tr, te, t);

    auto head_cfg = t;
    head_cfg.epochs = 1;
    const auto head = train(tr, te, head_cfg);
    const auto path = scratch("resume.uwat");
    save_checkpoint(head, head_cfg, path);
    auto cp = load_checkpoint(path);
    const auto rest = train(tr, te, t, std::move(cp.state));
    CHECK(rest.weights == full.weights);
    CHECK(rest.adam.step == full.adam.step);
    REQUIRE(rest.history.size() == 3);
    CHECK(rest.history[0].epoch == 1);
    CHECK(rest.history[2].epoch == 3);
    CHECK(rest.history[2].test_loss == full.history[2].test_loss);
}

TEST_CASE("checkpoint round-trip and corruption") {
    const auto sys = tiny_system();
    const auto tr = generate_dataset(sys, 1, 24);
    const auto te = generate_dataset(sys, 2, 6);
    auto t = tiny_train();
    t.target = TargetRule::InverseTrace;
    const auto s = train(tr, te, t);
    const auto path = scratch("cp.uwat");
    save_checkpoint(s, t, path);
    const auto cp = load_checkpoint(path);
    CHECK(cp.config == t);
    CHECK(cp.state.weights == s.weights);
    CHECK(cp.state.adam == s.adam);
    CHECK(cp.state.epochs_completed == s.epochs_completed);
    CHECK(cp.state.best_test_loss == s.best_test_loss);
    CHECK(cp.state.history == s.history);

    const auto bytes = io::read_file(path);
    const auto path2 = scratch("cp_bad.uwat");
    auto cut = bytes;
    cut.resize(cut.size() / 2);
    io::write_file_atomic(path2, cut);
    CHECK_THROWS_AS(load_checkpoint(path2), FormatError);
    auto ver = bytes;
    ver[4] = 7;
    io::write_file_atomic(path2, ver);
    CHECK_THROWS_AS(load_checkpoint(path2), VersionError);
}

TEST_CASE("early stopping") {
    const auto sys = tiny_system();
    const auto tr = generate_dataset(sys, 1, 8);
    const auto te = generate_dataset(sys, 2, 4);
    TrainConfig t;
    t.epochs = 50;
    t.batches = 1;
    t.samples_per_batch = 1;
    t.patience = 2;
    t.min_rel_improvement = 0.99;  // nothing counts as an improvement after epoch 1
    const auto s = train(tr, te, t);
    CHECK(s.stopped_early);
    CHECK(s.epochs_completed == 3);
}

TEST_CASE("modulation averaging") {
    SUBCASE("identical matrices") {
        Rng rng(3);
        const auto f = random_unitary(5, rng);
        const std::vector<ModulationMatrix> fs(4, f);
        const auto r = average_modulations(fs);
        CHECK(frob_norm(r.f.matrix() - f.matrix()) < 1e-12);
        CHECK(r.consistency < 1e-24);
    }
    SUBCASE("hand-computed 2x2") {
        // mean(I, diag(1, j)) = diag(1, (1 + j) / 2), whose Q is diag(1, e^{j pi/4}).
        std::vector<cplx> d{1.0, cplx(0.0, 1.0)};
        const std::vector<ModulationMatrix> fs{identity_matrix(2), ModulationMatrix(ComplexMatrix::diagonal(d))};
        const auto r = average_modulations(fs);
        const cplx rot = std::polar(1.0, std::numbers::pi / 4);
        CHECK(std::abs(r.f.matrix()(0, 0) - 1.0) < 1e-15);
        CHECK(std::abs(r.f.matrix()(1, 1) - rot) < 1e-15);
        CHECK(std::abs(r.f.matrix()(0, 1)) < 1e-15);
        CHECK(r.consistency == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-14));
    }
    SUBCASE("cancelling matrices are rank deficient") {
        ComplexMatrix neg = ComplexMatrix::identity(3);
        neg *= -1.0;
        const std::vector<ModulationMatrix> fs{identity_matrix(3), ModulationMatrix(neg)};
        CHECK_THROWS_AS(average_modulations(fs), NumericalError);
    }
}

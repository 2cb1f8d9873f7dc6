#include "uwa/run_config.hpp"

#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"
#include "uwa/modem.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <map>

namespace uwa {

namespace {

using json = nlohmann::json;

// Field readers for one JSON object; remembers the dotted path for messages.
class Section {
public:
    Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
        if (!obj_.is_object()) throw InvalidArgument(name_ + ": expected an object");
    }

    template <typename Apply>
    void visit(const std::map<std::string, Apply>& handlers) const {
        for (const auto& [key, value] : obj_.items()) {
            const auto it = handlers.find(key);
            if (it == handlers.end()) throw InvalidArgument(where(key) + ": unknown key");
            it->second(value, where(key));
        }
    }

private:
    std::string where(const std::string& key) const { return name_ + "." + key; }

    const json& obj_;
    std::string name_;
};

using Handler = std::function<void(const json&, const std::string&)>;

double number(const json& v, const std::string& field) {
    if (!v.is_number()) throw InvalidArgument(field + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidArgument(field + ": must be finite");
    return d;
}

std::uint64_t unsigned_int(const json& v, const std::string& field) {
    if (!v.is_number_unsigned()) throw InvalidArgument(field + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::uint32_t u32(const json& v, const std::string& field) {
    const auto x = unsigned_int(v, field);
    if (x > 0xFFFFFFFFull) throw InvalidArgument(field + ": out of range");
    return static_cast<std::uint32_t>(x);
}

bool boolean(const json& v, const std::string& field) {
    if (!v.is_boolean()) throw InvalidArgument(field + ": expected true or false");
    return v.get<bool>();
}

void read_system(const json& j, SystemConfig& s) {
    Section(j, "system").visit(std::map<std::string, Handler>{
        {"carrier_hz", [&](const json& v, const std::string& f) { s.carrier_hz = number(v, f); }},
        {"bandwidth_hz", [&](const json& v, const std::string& f) { s.bandwidth_hz = number(v, f); }},
        {"subcarriers", [&](const json& v, const std::string& f) { s.subcarriers = u32(v, f); }},
        {"guard", [&](const json& v, const std::string& f) { s.guard = u32(v, f); }},
        {"rolloff", [&](const json& v, const std::string& f) { s.rolloff = number(v, f); }},
        {"paths", [&](const json& v, const std::string& f) { s.paths = u32(v, f); }},
        {"max_speed_knots", [&](const json& v, const std::string& f) { s.max_speed = number(v, f) * kKnot; }},
        {"sound_speed", [&](const json& v, const std::string& f) { s.sound_speed = number(v, f); }},
        {"mean_interarrival", [&](const json& v, const std::string& f) { s.mean_interarrival = number(v, f); }},
        {"total_decay_db", [&](const json& v, const std::string& f) { s.total_decay_db = number(v, f); }},
    });
}

void read_data(const json& j, DataConfig& d) {
    Section(j, "data").visit(std::map<std::string, Handler>{
        {"train_count", [&](const json& v, const std::string& f) { d.train_count = unsigned_int(v, f); }},
        {"test_count", [&](const json& v, const std::string& f) { d.test_count = unsigned_int(v, f); }},
        {"train_seed", [&](const json& v, const std::string& f) { d.train_seed = unsigned_int(v, f); }},
        {"test_seed", [&](const json& v, const std::string& f) { d.test_seed = unsigned_int(v, f); }},
    });
}

void read_train(const json& j, RunConfig& rc) {
    TrainConfig& t = rc.train;
    bool have_snr = false, have_sigma2 = false;
    Section(j, "train").visit(std::map<std::string, Handler>{
        {"epochs", [&](const json& v, const std::string& f) { t.epochs = u32(v, f); }},
        {"batches", [&](const json& v, const std::string& f) { t.batches = u32(v, f); }},
        {"samples_per_batch", [&](const json& v, const std::string& f) { t.samples_per_batch = u32(v, f); }},
        {"lambda", [&](const json& v, const std::string& f) { t.lambda = number(v, f); }},
        {"learning_rate", [&](const json& v, const std::string& f) { t.learning_rate = number(v, f); }},
        {"adam_beta1", [&](const json& v, const std::string& f) { t.adam_beta1 = number(v, f); }},
        {"adam_beta2", [&](const json& v, const std::string& f) { t.adam_beta2 = number(v, f); }},
        {"adam_epsilon", [&](const json& v, const std::string& f) { t.adam_epsilon = number(v, f); }},
        {"train_snr_db",
         [&](const json& v, const std::string& f) {
             t.train_sigma2 = snr_db_to_sigma2(number(v, f));
             have_snr = true;
         }},
        {"train_sigma2",
         [&](const json& v, const std::string& f) {
             t.train_sigma2 = number(v, f);
             have_sigma2 = true;
         }},
        {"seed", [&](const json& v, const std::string& f) { t.seed = unsigned_int(v, f); }},
        {"patience", [&](const json& v, const std::string& f) { t.patience = u32(v, f); }},
        {"min_rel_improvement", [&](const json& v, const std::string& f) { t.min_rel_improvement = number(v, f); }},
        {"target_rule",
         [&](const json& v, const std::string& f) {
             if (v == "equal_share") {
                 t.target = TargetRule::EqualShare;
             } else if (v == "inverse_trace") {
                 t.target = TargetRule::InverseTrace;
             } else {
                 throw InvalidArgument(f + ": expected \"equal_share\" or \"inverse_trace\"");
             }
         }},
        {"log_wall_seconds", [&](const json& v, const std::string& f) { rc.log_wall_seconds = boolean(v, f); }},
        {"checkpoint_every", [&](const json& v, const std::string& f) { rc.checkpoint_every = u32(v, f); }},
    });
    if (have_snr && have_sigma2) throw InvalidArgument("train: give train_snr_db or train_sigma2, not both");
}

void read_eval(const json& j, EvalConfig& e) {
    Section(j, "eval").visit(std::map<std::string, Handler>{
        {"snr_db",
         [&](const json& v, const std::string& f) {
             if (!v.is_array()) throw InvalidArgument(f + ": expected an array of numbers");
             e.snr_db.clear();
             for (std::size_t i = 0; i < v.size(); ++i) e.snr_db.push_back(number(v[i], f + "[" + std::to_string(i) + "]"));
         }},
        {"trials", [&](const json& v, const std::string& f) { e.trials = unsigned_int(v, f); }},
        {"seed", [&](const json& v, const std::string& f) { e.seed = unsigned_int(v, f); }},
    });
}

}  // namespace

void RunConfig::validate() const {
    system.validate();
    train.validate();
    if (data.train_count < 1) throw InvalidArgument("data.train_count must be >= 1");
    if (data.test_count < 1) throw InvalidArgument("data.test_count must be >= 1");
    if (train.channels_per_epoch() > data.train_count) {
        throw InvalidArgument("train: 2 * batches * samples_per_batch exceeds data.train_count");
    }
    if (eval.snr_db.empty()) throw InvalidArgument("eval.snr_db must not be empty");
    if (eval.trials < 1) throw InvalidArgument("eval.trials must be >= 1");
}

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("configuration is not valid JSON: ") + e.what(), e.byte);
    }
    RunConfig rc;
    Section(j, "config").visit(std::map<std::string, Handler>{
        {"system", [&](const json& v, const std::string&) { read_system(v, rc.system); }},
        {"data", [&](const json& v, const std::string&) { read_data(v, rc.data); }},
        {"train", [&](const json& v, const std::string&) { read_train(v, rc); }},
        {"eval", [&](const json& v, const std::string&) { read_eval(v, rc.eval); }},
    });
    rc.validate();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

}  // namespace uwa

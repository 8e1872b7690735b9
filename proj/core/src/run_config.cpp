#include "fcce/run_config.hpp"

#include <fstream>
#include <sstream>

namespace fcce::harness {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    if (!(in >> out) || !(in >> std::ws).eof()) {
        throw ConfigError("config: bad value '" + value + "' for " + key);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigError("config: bad boolean '" + value + "' for " + key);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> all{
        "model", "depth", "base_channels", "dropout", "deep_supervision", "head_loss",
        "loss", "membership_source", "blend_beta", "lambda", "epsilon",
        "epochs", "batch_size", "learning_rate", "patience", "seed",
        "data_dir", "out_dir",
        "count", "size", "classes", "blur", "noise", "data_seed", "split",
        "fcm_clusters", "fcm_m", "fcm_tolerance", "fcm_max_iterations"};
    return all;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "model") cfg.model = models::parse_model_kind(value);
        else if (key == "depth") cfg.depth = parse_number<int>(key, value);
        else if (key == "base_channels") cfg.base_channels = parse_number<int>(key, value);
        else if (key == "dropout") cfg.dropout = parse_number<double>(key, value);
        else if (key == "deep_supervision") cfg.deep_supervision = parse_bool(key, value);
        else if (key == "head_loss") {
            if (value == "selected") cfg.head_loss = HeadLoss::Selected;
            else if (value == "hybrid") cfg.head_loss = HeadLoss::Hybrid;
            else throw ConfigError("config: head_loss must be 'selected' or 'hybrid'");
        }
        else if (key == "loss") cfg.loss.kind = loss::parse_loss_kind(value);
        else if (key == "membership_source") cfg.loss.membership_source = loss::parse_membership_source(value);
        else if (key == "blend_beta") cfg.loss.blend_beta = parse_number<double>(key, value);
        else if (key == "lambda") cfg.loss.lambda = parse_number<double>(key, value);
        else if (key == "epsilon") cfg.loss.epsilon = parse_number<double>(key, value);
        else if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
        else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, value);
        else if (key == "patience") cfg.early_stopping_patience = parse_number<int>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "data_dir") cfg.data_dir = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "count") cfg.phantom.count = parse_number<std::size_t>(key, value);
        else if (key == "size") cfg.phantom.size = parse_number<std::size_t>(key, value);
        else if (key == "classes") cfg.phantom.num_classes = parse_number<int>(key, value);
        else if (key == "blur") cfg.phantom.boundary_blur_sigma = parse_number<double>(key, value);
        else if (key == "noise") cfg.phantom.noise_sigma = parse_number<double>(key, value);
        else if (key == "data_seed") cfg.phantom.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "split") cfg.split_fraction = parse_number<double>(key, value);
        else if (key == "fcm_clusters") cfg.fcm.num_clusters = parse_number<int>(key, value);
        else if (key == "fcm_m") cfg.fcm.fuzzifier = parse_number<double>(key, value);
        else if (key == "fcm_tolerance") cfg.fcm.tolerance = parse_number<double>(key, value);
        else if (key == "fcm_max_iterations") cfg.fcm.max_iterations = parse_number<int>(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
}

void load_config_file(const std::filesystem::path& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (early_stopping_patience < 1) throw ConfigError("patience must be at least 1");
    if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) throw ConfigError("split must lie in [0, 1]");
    try {
        loss.validate();
        fcm.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    unet_spec().validate();
    if (deep_supervision && model != models::ModelKind::UNetPlusPlus) {
        throw ConfigError("deep_supervision requires model = unetpp");
    }
}

models::UNetSpec RunConfig::unet_spec() const {
    models::UNetSpec spec;
    spec.depth = depth;
    spec.base_channels = base_channels;
    spec.in_channels = 1;
    spec.num_classes = phantom.num_classes;
    spec.dropout_rate = dropout >= 0.0 ? dropout : (model == models::ModelKind::UNetPlusPlus ? 0.1 : 0.0);
    return spec;
}

std::string to_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "model = " << models::to_string(cfg.model) << '\n'
        << "depth = " << cfg.depth << '\n'
        << "base_channels = " << cfg.base_channels << '\n'
        << "dropout = " << cfg.dropout << '\n'
        << "deep_supervision = " << (cfg.deep_supervision ? "true" : "false") << '\n'
        << "head_loss = " << (cfg.head_loss == HeadLoss::Hybrid ? "hybrid" : "selected") << '\n'
        << "loss = " << loss::to_string(cfg.loss.kind) << '\n'
        << "membership_source = " << loss::to_string(cfg.loss.membership_source) << '\n'
        << "blend_beta = " << cfg.loss.blend_beta << '\n'
        << "lambda = " << cfg.loss.lambda << '\n'
        << "epsilon = " << cfg.loss.epsilon << '\n'
        << "epochs = " << cfg.epochs << '\n'
        << "batch_size = " << cfg.batch_size << '\n'
        << "learning_rate = " << cfg.learning_rate << '\n'
        << "patience = " << cfg.early_stopping_patience << '\n'
        << "seed = " << cfg.seed << '\n'
        << "data_dir = " << cfg.data_dir.string() << '\n'
        << "out_dir = " << cfg.out_dir.string() << '\n'
        << "count = " << cfg.phantom.count << '\n'
        << "size = " << cfg.phantom.size << '\n'
        << "classes = " << cfg.phantom.num_classes << '\n'
        << "blur = " << cfg.phantom.boundary_blur_sigma << '\n'
        << "noise = " << cfg.phantom.noise_sigma << '\n'
        << "data_seed = " << cfg.phantom.seed << '\n'
        << "split = " << cfg.split_fraction << '\n'
        << "fcm_clusters = " << cfg.fcm.num_clusters << '\n'
        << "fcm_m = " << cfg.fcm.fuzzifier << '\n'
        << "fcm_tolerance = " << cfg.fcm.tolerance << '\n'
        << "fcm_max_iterations = " << cfg.fcm.max_iterations << '\n';
    return out.str();
}

}  // namespace fcce::harness

#include "bal/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bal/error.hpp"

namespace bal {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        fail_config("config: bad number for " + key + ": '" + value + "'");
    return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        fail_config("config: bad count for " + key + ": '" + value + "'");
    return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        fail_config("config: bad integer for " + key + ": '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail_config("config: bad boolean for " + key + ": '" + value + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_size(key, trim(item)));
    return out;
}

} // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "id_dataset = " << c.id_dataset << "\n";
    o << "ood_dataset = " << c.ood_dataset << "\n";
    o << "data_dir = " << c.data_dir << "\n";
    o << "out_dir = " << c.out_dir << "\n";
    o << "toy_n_per_class = " << c.toy_n_per_class << "\n";
    o << "toy_separation = " << fmt_double(c.toy_separation) << "\n";
    o << "toy_sigma = " << fmt_double(c.toy_sigma) << "\n";
    o << "feature_dim = " << c.feature_dim << "\n";
    o << "cls_hidden = " << fmt_sizes(c.cls_hidden) << "\n";
    o << "z_dim = " << c.z_dim << "\n";
    o << "g_hidden = " << fmt_sizes(c.g_hidden) << "\n";
    o << "d_hidden = " << fmt_sizes(c.d_hidden) << "\n";
    o << "cls_epochs = " << c.cls_epochs << "\n";
    o << "cls_lr = " << fmt_double(c.cls_lr) << "\n";
    o << "batch_size = " << c.batch_size << "\n";
    o << "bal_epochs = " << c.bal_epochs << "\n";
    o << "d_lr = " << fmt_double(c.d_lr) << "\n";
    o << "g_lr = " << fmt_double(c.g_lr) << "\n";
    o << "d_steps = " << c.d_steps << "\n";
    o << "warmup_epochs = " << c.warmup_epochs << "\n";
    o << "lambda_c = " << fmt_double(c.lambda_c) << "\n";
    o << "lambda = " << fmt_double(c.lambda) << "\n";
    o << "fgsm_scale = " << fmt_double(c.fgsm_scale) << "\n";
    o << "fgsm_mode = " << c.fgsm_mode << "\n";
    o << "neg_trivial_ratio = " << fmt_double(c.neg_trivial_ratio) << "\n";
    o << "neg_hard_ratio = " << fmt_double(c.neg_hard_ratio) << "\n";
    o << "sampler = " << c.sampler << "\n";
    o << "gaussian_q = " << fmt_double(c.gaussian_q) << "\n";
    o << "use_shuffle_loss = " << (c.use_shuffle_loss ? "true" : "false") << "\n";
    o << "use_uniform_loss = " << (c.use_uniform_loss ? "true" : "false") << "\n";
    o << "bounds_margin = " << fmt_double(c.bounds_margin) << "\n";
    o << "global_bounds = " << (c.global_bounds ? "true" : "false") << "\n";
    o << "nonsaturating_g = " << (c.nonsaturating_g ? "true" : "false") << "\n";
    o << "gamma = " << fmt_double(c.gamma) << "\n";
    o << "odin_temperature = " << fmt_double(c.odin_temperature) << "\n";
    o << "odin_epsilon = " << fmt_double(c.odin_epsilon) << "\n";
    o << "seed = " << c.seed << "\n";
    o << "grid_resolution = " << c.grid_resolution << "\n";
    o << "eval_max_per_side = " << c.eval_max_per_side << "\n";
    return o.str();
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    ExperimentConfig c = std::move(base);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail_config("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "id_dataset") c.id_dataset = value;
        else if (key == "ood_dataset") c.ood_dataset = value;
        else if (key == "data_dir") c.data_dir = value;
        else if (key == "out_dir") c.out_dir = value;
        else if (key == "toy_n_per_class") c.toy_n_per_class = parse_size(key, value);
        else if (key == "toy_separation") c.toy_separation = parse_double(key, value);
        else if (key == "toy_sigma") c.toy_sigma = parse_double(key, value);
        else if (key == "feature_dim") c.feature_dim = parse_size(key, value);
        else if (key == "cls_hidden") c.cls_hidden = parse_sizes(key, value);
        else if (key == "z_dim") c.z_dim = parse_size(key, value);
        else if (key == "g_hidden") c.g_hidden = parse_sizes(key, value);
        else if (key == "d_hidden") c.d_hidden = parse_sizes(key, value);
        else if (key == "cls_epochs") c.cls_epochs = parse_size(key, value);
        else if (key == "cls_lr") c.cls_lr = parse_double(key, value);
        else if (key == "batch_size") c.batch_size = parse_size(key, value);
        else if (key == "bal_epochs") c.bal_epochs = parse_size(key, value);
        else if (key == "d_lr") c.d_lr = parse_double(key, value);
        else if (key == "g_lr") c.g_lr = parse_double(key, value);
        else if (key == "d_steps") c.d_steps = parse_size(key, value);
        else if (key == "warmup_epochs") c.warmup_epochs = parse_size(key, value);
        else if (key == "lambda_c") c.lambda_c = parse_double(key, value);
        else if (key == "lambda") c.lambda = parse_double(key, value);
        else if (key == "fgsm_scale") c.fgsm_scale = parse_double(key, value);
        else if (key == "fgsm_mode") c.fgsm_mode = value;
        else if (key == "neg_trivial_ratio") c.neg_trivial_ratio = parse_double(key, value);
        else if (key == "neg_hard_ratio") c.neg_hard_ratio = parse_double(key, value);
        else if (key == "sampler") c.sampler = value;
        else if (key == "gaussian_q") c.gaussian_q = parse_double(key, value);
        else if (key == "use_shuffle_loss") c.use_shuffle_loss = parse_bool(key, value);
        else if (key == "use_uniform_loss") c.use_uniform_loss = parse_bool(key, value);
        else if (key == "bounds_margin") c.bounds_margin = parse_double(key, value);
        else if (key == "global_bounds") c.global_bounds = parse_bool(key, value);
        else if (key == "nonsaturating_g") c.nonsaturating_g = parse_bool(key, value);
        else if (key == "gamma") c.gamma = parse_double(key, value);
        else if (key == "odin_temperature") c.odin_temperature = parse_double(key, value);
        else if (key == "odin_epsilon") c.odin_epsilon = parse_double(key, value);
        else if (key == "seed") c.seed = parse_u64(key, value);
        else if (key == "grid_resolution") c.grid_resolution = parse_size(key, value);
        else if (key == "eval_max_per_side") c.eval_max_per_side = parse_size(key, value);
        else fail_config("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream f(path);
    if (!f) fail_config("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    return parse_sizes("width list", text);
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    if (name == "toy") {
        c.id_dataset = "toy";
        c.ood_dataset = "uniform-far";
        c.feature_dim = 2;
        c.cls_hidden = {16};
        c.z_dim = 8;
        c.g_hidden = {64, 64};
        c.d_hidden = {64, 64};
        c.cls_epochs = 100;
        c.batch_size = 64;
        c.bal_epochs = 60;
        c.warmup_epochs = 10;
        c.grid_resolution = 128;
    } else if (name == "mnist-vs-fmnist") {
        c.id_dataset = "mnist";
        c.ood_dataset = "fmnist";
        c.feature_dim = 64;
        c.cls_hidden = {256};
        c.cls_epochs = 20;
        c.batch_size = 128;
        c.bal_epochs = 30;
        c.warmup_epochs = 5;
    } else if (name == "fmnist-vs-mnist") {
        c = preset_config("mnist-vs-fmnist");
        c.id_dataset = "fmnist";
        c.ood_dataset = "mnist";
    } else {
        fail_config("unknown preset: " + name + " (expected toy, mnist-vs-fmnist or "
                    "fmnist-vs-mnist)");
    }
    return c;
}

std::vector<std::string> preset_names() {
    return {"toy", "mnist-vs-fmnist", "fmnist-vs-mnist"};
}

} // namespace bal

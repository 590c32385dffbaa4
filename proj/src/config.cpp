#include "pdiv/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pdiv/error.hpp"
#include "pdiv/preset_data.hpp"

namespace pdiv {

using nlohmann::json;

namespace {

PhaseTypeDistribution phase_type_from_json(const json& node) {
    if (!node.is_object()) throw Error(ErrorCode::InvalidConfig, "phase_type must be an object");
    if (node.contains("preset")) {
        if (node.size() != 1) throw Error(ErrorCode::InvalidConfig, "phase_type.preset excludes other keys");
        const auto name = node.at("preset").get<std::string>();
        if (name != "folded_normal_ph6") {
            throw Error(ErrorCode::InvalidConfig, "unknown phase_type preset '" + name + "'");
        }
        return folded_normal_ph6();
    }
    if (!node.contains("initial_law") || !node.contains("subgenerator")) {
        throw Error(ErrorCode::InvalidConfig, "phase_type needs initial_law and subgenerator");
    }
    const auto& law = node.at("initial_law");
    const auto& sub = node.at("subgenerator");
    if (!law.is_array() || !sub.is_array()) {
        throw Error(ErrorCode::InvalidConfig, "initial_law and subgenerator must be arrays");
    }
    const auto m = static_cast<Eigen::Index>(law.size());
    PhaseTypeDistribution ph;
    ph.initial_law.resize(m);
    ph.subgenerator.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) ph.initial_law(i) = law.at(i).get<double>();
    if (static_cast<Eigen::Index>(sub.size()) != m) {
        throw Error(ErrorCode::InvalidConfig, "subgenerator row count differs from initial_law length");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& row = sub.at(i);
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
            throw Error(ErrorCode::InvalidConfig, fmt::format("subgenerator row {} must have {} entries", i, m));
        }
        for (Eigen::Index j = 0; j < m; ++j) ph.subgenerator(i, j) = row.at(j).get<double>();
    }
    return ph;
}

json phase_type_to_json(const PhaseTypeDistribution& ph) {
    json law = json::array();
    json sub = json::array();
    for (Eigen::Index i = 0; i < ph.initial_law.size(); ++i) law.push_back(ph.initial_law(i));
    for (Eigen::Index i = 0; i < ph.subgenerator.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < ph.subgenerator.cols(); ++j) row.push_back(ph.subgenerator(i, j));
        sub.push_back(row);
    }
    return {{"initial_law", law}, {"subgenerator", sub}};
}

void finalise(ProblemConfig& config) {
    const json doc = {
        {"name", config.name},
        {"drift_c", config.model.drift_c},
        {"sigma", config.model.sigma},
        {"jump_rate", config.model.jump_rate},
        {"phase_type", phase_type_to_json(config.model.jump_dist)},
        {"q", config.q},
        {"r", config.r},
        {"beta", config.beta},
    };
    config.canonical = doc.dump();
}

double number(const json& doc, const char* key) {
    const auto& node = doc.at(key);
    if (!node.is_number()) throw Error(ErrorCode::InvalidConfig, fmt::format("'{}' must be a number", key));
    return node.get<double>();
}

}  // namespace

std::string_view library_version() noexcept { return detail::library_version; }

PhaseTypeDistribution folded_normal_ph6() {
    static const PhaseTypeDistribution cached = phase_type_from_json(json::parse(detail::folded_normal_ph6_json));
    return cached;
}

ProblemConfig preset(std::string_view name) {
    ProblemConfig config;
    config.name = std::string(name);
    config.model.jump_rate = 1.0;
    config.model.jump_dist = folded_normal_ph6();
    config.q = 0.05;
    config.r = 0.5;
    if (name == "case1") {
        config.model.sigma = 0.2;
        config.model.drift_c = 1.0;
        config.beta = 1.5;
    } else if (name == "case2") {
        config.model.sigma = 0.0;
        config.model.drift_c = 0.3;
        config.beta = 1.05;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown preset '" + std::string(name) + "'");
    }
    finalise(config);
    return config;
}

ProblemConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "configuration must be a JSON object");

    static const std::set<std::string> known{"version", "name", "preset", "drift_c", "sigma", "jump_rate",
                                             "phase_type", "q", "r", "beta", "levy_measure"};
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    }
    if (doc.contains("version") && doc.at("version") != 1) {
        throw Error(ErrorCode::InvalidConfig, "unsupported configuration version");
    }
    if (doc.contains("levy_measure")) {
        throw Error(ErrorCode::UnsupportedModel,
                    "general Levy measures are not supported; describe jumps with phase_type");
    }

    ProblemConfig config;
    try {
        if (doc.contains("preset")) {
            config = preset(doc.at("preset").get<std::string>());
        } else {
            for (const char* key : {"drift_c", "sigma", "q", "r", "beta"}) {
                if (!doc.contains(key)) throw Error(ErrorCode::InvalidConfig, fmt::format("missing '{}'", key));
            }
            config.name = "custom";
        }
        if (doc.contains("name")) config.name = doc.at("name").get<std::string>();
        if (doc.contains("drift_c")) config.model.drift_c = number(doc, "drift_c");
        if (doc.contains("sigma")) config.model.sigma = number(doc, "sigma");
        if (doc.contains("jump_rate")) config.model.jump_rate = number(doc, "jump_rate");
        if (doc.contains("phase_type")) config.model.jump_dist = phase_type_from_json(doc.at("phase_type"));
        if (doc.contains("q")) config.q = number(doc, "q");
        if (doc.contains("r")) config.r = number(doc, "r");
        if (doc.contains("beta")) config.beta = number(doc, "beta");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    if (config.model.jump_rate > 0.0 && config.model.jump_dist.num_phases() == 0) {
        throw Error(ErrorCode::InvalidConfig, "jump_rate > 0 requires phase_type");
    }
    finalise(config);
    return config;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string config_hash(const ProblemConfig& config) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.canonical) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", hash);
}

}  // namespace pdiv

#include "lfm/network_io.hpp"

#include <fstream>
#include <string>

namespace lfm {

namespace {

using nlohmann::json;

double number_at(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(where + "." + key + ": missing");
    }
    if (!it->is_number()) {
        throw SchemaError(where + "." + key + ": expected a number");
    }
    return it->get<double>();
}

std::size_t index_at(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(where + "." + key + ": missing");
    }
    if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw SchemaError(where + "." + key + ": expected a non-negative integer");
    }
    return it->get<std::size_t>();
}

std::pair<double, double> shunt_pair(const json& line, const char* key, const std::string& where) {
    auto it = line.find(key);
    if (it == line.end()) {
        return {0.0, 0.0};
    }
    if (it->is_number()) {
        return {it->get<double>(), it->get<double>()};
    }
    if (it->is_array() && it->size() == 2 && (*it)[0].is_number() && (*it)[1].is_number()) {
        return {(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    throw SchemaError(where + "." + key + ": expected a number or a [from, to] pair");
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError(path.string() + ": cannot open file");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

Network parse_network(const json& doc, const std::string& where) {
    if (!doc.is_object()) {
        throw SchemaError(where + ": expected an object");
    }
    Network net;
    net.base_mva = number_at(doc, "base_mva", where);
    if (doc.contains("slack_bus")) {
        net.slack_bus = index_at(doc, "slack_bus", where);
    }

    auto buses = doc.find("buses");
    if (buses == doc.end() || !buses->is_array()) {
        throw SchemaError(where + ".buses: expected an array");
    }
    for (std::size_t k = 0; k < buses->size(); ++k) {
        const auto& jb = (*buses)[k];
        const std::string at = where + ".buses[" + std::to_string(k) + "]";
        if (!jb.is_object()) {
            throw SchemaError(at + ": expected an object");
        }
        BusSpec bus;
        bus.index = index_at(jb, "index", at);
        bus.u_min = number_at(jb, "u_min", at);
        bus.u_max = number_at(jb, "u_max", at);
        if (auto s = jb.find("slack"); s != jb.end()) {
            if (!s->is_boolean()) {
                throw SchemaError(at + ".slack: expected a boolean");
            }
            bus.slack = s->get<bool>();
        }
        net.buses.push_back(bus);
    }

    auto lines = doc.find("lines");
    if (lines == doc.end() || !lines->is_array()) {
        throw SchemaError(where + ".lines: expected an array");
    }
    for (std::size_t k = 0; k < lines->size(); ++k) {
        const auto& jl = (*lines)[k];
        const std::string at = where + ".lines[" + std::to_string(k) + "]";
        if (!jl.is_object()) {
            throw SchemaError(at + ": expected an object");
        }
        LineSpec line;
        line.index = jl.contains("index") ? index_at(jl, "index", at) : k;
        line.from_bus = index_at(jl, "from", at);
        line.to_bus = index_at(jl, "to", at);
        const bool has_impedance = jl.contains("r") || jl.contains("x");
        const bool has_admittance = jl.contains("g") || jl.contains("b");
        if (has_impedance == has_admittance) {
            throw SchemaError(at + ": give exactly one of (r, x) or (g, b)");
        }
        if (has_impedance) {
            try {
                const auto y = admittance_from_impedance(number_at(jl, "r", at), number_at(jl, "x", at));
                line.g = y.g;
                line.b = y.b;
            } catch (const NetworkError& e) {
                throw SchemaError(at + ": " + e.what());
            }
        } else {
            line.g = number_at(jl, "g", at);
            line.b = number_at(jl, "b", at);
        }
        std::tie(line.g_shunt_from, line.g_shunt_to) = shunt_pair(jl, "g_shunt", at);
        std::tie(line.b_shunt_from, line.b_shunt_to) = shunt_pair(jl, "b_shunt", at);
        line.s_max = number_at(jl, "s_max", at);
        net.lines.push_back(line);
    }
    return net;
}

Network load_network(const std::filesystem::path& path) {
    return validate_network(parse_network(read_json_file(path), path.filename().string()));
}

json network_to_json(const Network& net) {
    json doc;
    doc["base_mva"] = net.base_mva;
    doc["slack_bus"] = net.slack_bus;
    doc["buses"] = json::array();
    for (const auto& bus : net.buses) {
        doc["buses"].push_back({{"index", bus.index}, {"u_min", bus.u_min}, {"u_max", bus.u_max}});
    }
    doc["lines"] = json::array();
    for (const auto& line : net.lines) {
        doc["lines"].push_back({{"index", line.index},
                                {"from", line.from_bus},
                                {"to", line.to_bus},
                                {"g", line.g},
                                {"b", line.b},
                                {"g_shunt", {line.g_shunt_from, line.g_shunt_to}},
                                {"b_shunt", {line.b_shunt_from, line.b_shunt_to}},
                                {"s_max", line.s_max}});
    }
    return doc;
}

}  // namespace lfm

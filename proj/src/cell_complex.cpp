#include "sphereflow/cell_complex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <unordered_set>

#include <json.hpp>

#include "sphereflow/errors.hpp"
#include "sphereflow/format.hpp"

namespace sphereflow {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CellComplex::CellComplex(int num_faces, std::vector<WeightedEdge> edges,
                         std::optional<std::int64_t> vertex_count)
    : num_faces_(num_faces), vertex_count_(vertex_count), edges_(std::move(edges)) {
    constexpr double kHalfPi = std::numbers::pi / 2.0;

    if (num_faces_ < 1)
        throw DomainError("complex: need at least one face");

    std::sort(edges_.begin(), edges_.end(),
              [](const WeightedEdge& a, const WeightedEdge& b) { return a.id < b.id; });

    std::unordered_set<int> seen_ids;
    for (const WeightedEdge& e : edges_) {
        if (!seen_ids.insert(e.id).second)
            throw DomainError("complex: duplicate edge id " + std::to_string(e.id));
        if (e.face_a < 0 || e.face_a >= num_faces_ || e.face_b < 0 || e.face_b >= num_faces_)
            throw DomainError("complex: edge " + std::to_string(e.id) +
                              " references a face id outside [0, num_faces)");
        if (!(e.weight > 0.0) || !(e.weight < kHalfPi))
            throw DomainError("complex: edge " + std::to_string(e.id) +
                              " weight out of range (0, pi/2)");
    }

    incidence_.assign(num_faces_, {});
    incident_weight_.assign(num_faces_, 0.0);
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i) {
        const WeightedEdge& e = edges_[i];
        incidence_[e.face_a].push_back({i, 0});
        incidence_[e.face_b].push_back({i, 1});
        incident_weight_[e.face_a] += e.weight; // distinct-edge sum: once even
        if (e.face_b != e.face_a)               // when self-glued
            incident_weight_[e.face_b] += e.weight;
        total_weight_ += e.weight;
    }

    for (int f = 0; f < num_faces_; ++f)
        if (incidence_[f].empty())
            throw DomainError("complex: isolated face " + std::to_string(f));
}

CellComplex CellComplex::parse(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("complex: invalid JSON: ") + e.what());
    }

    if (!doc.is_object())
        throw ParseError("complex: document root must be an object");
    if (!doc.contains("num_faces") || !doc["num_faces"].is_number_integer())
        throw ParseError("complex: missing integer field \"num_faces\"");
    if (!doc.contains("edges") || !doc["edges"].is_array())
        throw ParseError("complex: missing array field \"edges\"");

    std::optional<std::int64_t> vertex_count;
    if (doc.contains("vertex_count")) {
        if (!doc["vertex_count"].is_number_integer())
            throw ParseError("complex: \"vertex_count\" must be an integer");
        vertex_count = doc["vertex_count"].get<std::int64_t>();
        if (*vertex_count < 0)
            throw ParseError("complex: \"vertex_count\" must be >= 0");
    }

    std::vector<WeightedEdge> edges;
    edges.reserve(doc["edges"].size());
    for (const auto& je : doc["edges"]) {
        if (!je.is_object() || !je.contains("id") || !je["id"].is_number_integer() ||
            !je.contains("faces") || !je["faces"].is_array() || je["faces"].size() != 2 ||
            !je["faces"][0].is_number_integer() || !je["faces"][1].is_number_integer() ||
            !je.contains("weight") || !je["weight"].is_number())
            throw ParseError("complex: each edge needs integer \"id\", two-element "
                             "integer \"faces\", and numeric \"weight\"");
        edges.push_back({je["id"].get<int>(), je["faces"][0].get<int>(),
                         je["faces"][1].get<int>(), je["weight"].get<double>()});
    }

    return CellComplex(doc["num_faces"].get<int>(), std::move(edges), vertex_count);
}

std::string CellComplex::serialize() const {
    std::string out = "{\"num_faces\":" + std::to_string(num_faces_);
    if (vertex_count_)
        out += ",\"vertex_count\":" + std::to_string(*vertex_count_);
    out += ",\"edges\":[";
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const WeightedEdge& e = edges_[i];
        if (i) out += ",";
        out += "{\"id\":" + std::to_string(e.id) + ",\"faces\":[" + std::to_string(e.face_a) +
               "," + std::to_string(e.face_b) + "],\"weight\":" + format_double(e.weight) + "}";
    }
    out += "]}";
    return out;
}

const std::vector<CellComplex::IncidentSide>& CellComplex::incident(int face) const {
    if (face < 0 || face >= num_faces_)
        throw DomainError("complex: face id out of range");
    return incidence_[face];
}

std::vector<int> CellComplex::edge_set_of(const std::vector<int>& faces) const {
    std::vector<char> in_set(num_faces_, 0);
    for (int f : faces) {
        if (f < 0 || f >= num_faces_)
            throw DomainError("edge_set_of: face id out of range");
        in_set[f] = 1;
    }
    std::vector<int> ids;
    for (const WeightedEdge& e : edges_)
        if (in_set[e.face_a] || in_set[e.face_b]) ids.push_back(e.id);
    return ids; // edges_ is id-sorted, so ids is ascending already
}

double CellComplex::incident_weight(int face) const {
    if (face < 0 || face >= num_faces_)
        throw DomainError("complex: face id out of range");
    return incident_weight_[face];
}

} // namespace sphereflow

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sphereflow {

// One weighted 1-cell.  The two incident 2-cells may coincide (a self-glued
// edge); the weight is the exterior intersection angle of the two circles
// and must lie strictly inside (0, pi/2).
struct WeightedEdge {
    int id;     // identifier from the input document, unique
    int face_a; // first incident face
    int face_b; // second incident face (== face_a for a self-glued edge)
    double weight;
};

// A weighted cellular decomposition of a closed surface, reduced to the data
// the curvature problem actually uses: faces 0..num_faces-1, weighted edges,
// and the face/edge incidence.  Vertices only matter for Euler counting, so
// only their number is (optionally) retained.
class CellComplex {
public:
    // side 0 = face_a's side of the edge, side 1 = face_b's.  A self-glued
    // edge shows up twice in its face's incidence list, once per side.
    struct IncidentSide {
        int edge_index; // index into edges() (not the document id)
        int side;       // 0 or 1
    };

    CellComplex(int num_faces, std::vector<WeightedEdge> edges,
                std::optional<std::int64_t> vertex_count = std::nullopt);

    // Parse the JSON document format:
    //   {"num_faces": n, "vertex_count": v?, "edges":
    //     [{"id": i, "faces": [a, b], "weight": w}, ...]}
    // Throws ParseError for malformed documents and DomainError for
    // structurally invalid ones (bad face ids, out-of-range weights,
    // duplicate edge ids, isolated faces).
    static CellComplex parse(std::string_view text);

    // Inverse of parse(): emits the same document shape with edges sorted by
    // id and doubles printed with 17 significant digits, so that
    // parse(serialize(c)) reproduces the bytes of serialize(c).
    std::string serialize() const;

    int num_faces() const { return num_faces_; }
    std::optional<std::int64_t> vertex_count() const { return vertex_count_; }

    // Edges sorted by document id, ascending.
    const std::vector<WeightedEdge>& edges() const { return edges_; }

    // Incidence list of one face, in (edge_index, side) order with
    // edge_index ascending and side 0 before side 1.
    const std::vector<IncidentSide>& incident(int face) const;

    // Document ids of every edge with at least one endpoint face in `faces`
    // (the 1-cells of the subcomplex spanned by those faces), ascending.
    // Monotone in `faces`: a superset of faces yields a superset of edges.
    std::vector<int> edge_set_of(const std::vector<int>& faces) const;

    // Sum of all edge weights.
    double total_weight() const { return total_weight_; }

    // Sum of weights over the distinct edges incident to one face (a
    // self-glued edge counts once; it is one 1-cell).
    double incident_weight(int face) const;

private:
    int num_faces_ = 0;
    std::optional<std::int64_t> vertex_count_;
    std::vector<WeightedEdge> edges_;
    std::vector<std::vector<IncidentSide>> incidence_;
    std::vector<double> incident_weight_;
    double total_weight_ = 0.0;
};

} // namespace sphereflow

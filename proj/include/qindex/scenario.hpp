#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qindex/fedosov.hpp"

namespace qindex {

/// A fully assembled scenario: chart ring, geometry, declared idempotent,
/// truncation request, and the hbar orders to verify. Loaded from the
/// versioned JSON schema (see docs in scenario.cpp); q q = q and d Omega_h = 0
/// are checked at load time.
struct Scenario {
    std::string name;
    int n = 1;
    FramePtr frame;
    std::shared_ptr<const ChartGeometry> geometry;
    GradedElement q;
    TruncationPolicy policy{};
    std::vector<int> orders;
    bool gamma_v_from_q = false;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& origin);

/// Parse a matrix of chart functions (the same element grammar scenarios use
/// for q) against a scenario's ring. Throws std::invalid_argument with
/// positions on malformed input.
GradedElement parse_endomorphism(const Scenario& sc, const std::string& json_text);

// Deterministic JSON renderings used in reports (arrays, not objects, so the
// byte output is order-stable).
std::string hlaurent_json(const HLaurent& h);
std::string graded_json(const GradedElement& e);

}  // namespace qindex

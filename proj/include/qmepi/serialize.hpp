#pragma once

#include "json.hpp"

#include "qmepi/core.hpp"
#include "qmepi/me_solver.hpp"
#include "qmepi/mepi_solver.hpp"
#include "qmepi/oracle.hpp"

namespace qmepi {

using Json = nlohmann::json;

Json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const Json& j);

/// Single-entry labels are written as plain integers.
Json outcome_to_json(const Outcome& o);
Outcome outcome_from_json(const Json& j);

Json ensemble_to_json(const WeightedEnsemble& e);
/// {"states":[{"weight":w,"bloch":[x,y,z]},...]}; "normalized" optional,
/// defaulting to whether the weights sum to one.
WeightedEnsemble ensemble_from_json(const Json& j);

Json mepi_to_json(const MepiEnsemble& m);
MepiEnsemble mepi_from_json(const Json& j);

void to_json(Json& j, const Povm& p);
void from_json(const Json& j, Povm& p);
void to_json(Json& j, const DualCertificate& c);
void from_json(const Json& j, DualCertificate& c);
void to_json(Json& j, const KktReport& k);
void from_json(const Json& j, KktReport& k);
void to_json(Json& j, const MeSolution& s);
void from_json(const Json& j, MeSolution& s);
void to_json(Json& j, const Certification& c);
void from_json(const Json& j, Certification& c);
void to_json(Json& j, const MinimaxResult& r);
void from_json(const Json& j, MinimaxResult& r);
void to_json(Json& j, const MepiScalars& s);
void from_json(const Json& j, MepiScalars& s);
void to_json(Json& j, const MepiClassification& c);
void from_json(const Json& j, MepiClassification& c);

}  // namespace qmepi

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace opmodel {

/// Result of one theorem-level check, serializable to the report schema
/// {check, params, max_violation, pass, witnesses[]}.
struct CheckReport {
  std::string check;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  double max_violation = 0.0;
  bool pass = true;
  std::vector<nlohmann::ordered_json> witnesses;

  void record(double violation, nlohmann::ordered_json witness, double tol) {
    if (violation > max_violation) max_violation = violation;
    if (violation > tol) {
      pass = false;
      if (witnesses.size() < 16) witnesses.push_back(std::move(witness));
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["check"] = check;
    j["params"] = params;
    j["max_violation"] = max_violation;
    j["pass"] = pass;
    j["witnesses"] = witnesses;
    return j;
  }
};

}  // namespace opmodel

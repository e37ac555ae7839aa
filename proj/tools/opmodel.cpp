// Command-line front end: parse a system spec, inspect its model data,
// compute coefficient windows, run verification suites, print dual weights.
// Reports are JSON with stable key order on stdout (or --out); human
// summaries go to stderr. Exit code 0 iff everything selected passed.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "opmodel/verify.hpp"

namespace {

using namespace opmodel;

nlohmann::ordered_json complex_json(Complex z) { return {z.real(), z.imag()}; }

void emit(const nlohmann::ordered_json& doc, const std::string& out_path) {
  std::string text = doc.dump(2);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write to '" + out_path + "'");
    out << text << "\n";
  }
}

std::pair<long, long> parse_window(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos)
    throw ParseError("--window expects 'N-,N+' (e.g. 10,10)");
  try {
    return {std::stol(s.substr(0, comma)), std::stol(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ParseError("--window expects 'N-,N+' (e.g. 10,10)");
  }
}

FinVec load_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vector file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("vector file: invalid JSON: ") + e.what());
  }
  return verify::finvec_from_json(doc.is_array() ? doc : doc.at("entries"));
}

int cmd_build(const std::string& spec_path, long depth, const std::string& out_path) {
  auto spec = verify::SystemSpec::load(spec_path);
  nlohmann::ordered_json doc;
  doc["command"] = "build";
  doc["spec"] = spec_path;
  if (spec.tree) {
    const auto& t = *spec.tree;
    doc["type"] = "tree";
    doc["rooted"] = t.rooted();
    doc["core_vertices"] = t.core_size();
    doc["branching_vertices"] = t.branching_ids();
    if (!t.rooted()) doc["omega"] = t.omega_key().str();
    doc["dim_e"] = kernel_adjoint_basis(t).dim();
    auto li = check_left_invertible(t, depth);
    doc["left_invertible"] = {{"ok", li.ok}, {"inf_d", li.inf_d}, {"sup_d", li.sup_d}};
  } else {
    const auto& s = *spec.selfmap;
    doc["type"] = "selfmap";
    doc["core_points"] = s.core_ids().size();
    doc["basepoints"] = s.basepoints();
    doc["fan_in_chains"] = s.fan_in().size();
    doc["fan_out_chains"] = s.fan_out().size();
    doc["dim_e"] = kernel_adjoint_basis_comp(s, !s.basepoints().empty()).dim();
    auto li = check_left_invertible_comp(s, depth);
    doc["left_invertible"] = {{"ok", li.ok}, {"inf_d", li.inf_d}, {"sup_d", li.sup_d}};
  }
  emit(doc, out_path);
  std::cerr << "build: ok (dim E = " << doc["dim_e"] << ")\n";
  return 0;
}

int cmd_coeffs(const std::string& spec_path, const std::string& vector_path, long wneg, long wpos,
               double tol, long depth, const std::string& out_path) {
  auto spec = verify::SystemSpec::load(spec_path);
  auto named = verify::context_for(spec, tol, wneg, wpos, depth);
  FinVec x = load_vector(vector_path);
  LaurentWindow w = analytic_model(named.ctx, x, wneg, wpos);

  nlohmann::ordered_json doc;
  doc["command"] = "coeffs";
  doc["spec"] = spec_path;
  doc["dim_e"] = named.ctx.e().dim();
  doc["window"] = {{"neg", w.neg}, {"pos", w.pos}};
  doc["exact"] = {{"neg", w.exact_neg}, {"pos", w.exact_pos}};
  doc["coefficients"] = nlohmann::ordered_json::array();
  for (long n = -w.neg; n <= w.pos; ++n) {
    nlohmann::ordered_json entry;
    entry["n"] = n;
    entry["coords"] = nlohmann::ordered_json::array();
    for (int i = 0; i < named.ctx.e().dim(); ++i)
      entry["coords"].push_back(complex_json(w.coeff(n)(i)));
    doc["coefficients"].push_back(entry);
  }
  if (w.neg >= 8 && w.pos >= 8) {
    auto est = radius_estimate(named.ctx, w);
    doc["radius"] = {{"r_minus", est.minus_vanishes ? 0.0 : est.r_minus},
                     {"r_plus", est.plus_vanishes ? nlohmann::ordered_json("inf")
                                                  : nlohmann::ordered_json(est.r_plus)},
                     {"minus_vanishes", est.minus_vanishes},
                     {"plus_vanishes", est.plus_vanishes}};
  }
  emit(doc, out_path);
  std::cerr << "coeffs: window [-" << w.neg << ", " << w.pos << "]\n";
  return 0;
}

int cmd_verify(const std::string& spec_path, const std::string& suites_csv, bool suites_given,
               long wneg, long wpos, long depth, double tol, std::uint64_t seed,
               const std::string& out_path) {
  verify::VerifyOptions opt;
  opt.seed = seed;
  opt.tol = tol;
  opt.window_neg = wneg;
  opt.window_pos = wpos;
  opt.depth = depth;
  if (!spec_path.empty()) opt.system = verify::SystemSpec::load(spec_path);
  if (suites_given) {
    std::stringstream ss(suites_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty() && item != "none") opt.suites.push_back(item);
    opt.empty_selection = opt.suites.empty();
  }
  bool pass = false;
  auto report = verify::run_verify(opt, &pass);
  emit(report, out_path);
  for (const auto& s : report["suites"])
    std::cerr << "suite " << s["suite"].get<std::string>() << ": "
              << (s["pass"].get<bool>() ? "pass" : "FAIL")
              << " (cases " << s["cases"] << ", max violation " << s["max_violation"] << ")\n";
  std::cerr << (pass ? "verify: all suites passed\n" : "verify: FAILURES\n");
  return pass ? 0 : 1;
}

int cmd_dual(const std::string& spec_path, long depth, const std::string& out_path) {
  auto spec = verify::SystemSpec::load(spec_path);
  nlohmann::ordered_json doc;
  doc["command"] = "dual";
  doc["spec"] = spec_path;
  doc["entries"] = nlohmann::ordered_json::array();
  if (spec.tree) {
    const auto& t = *spec.tree;
    auto dual = cauchy_dual_shift(t);
    doc["type"] = "tree";
    for (const auto& k : t.window_keys(depth)) {
      if (t.rooted() && k == t.root_key()) continue;
      doc["entries"].push_back({{"key", k.str()},
                                {"weight", complex_json(t.weight(k))},
                                {"dual_weight", complex_json(dual.weight(k))}});
    }
    doc["extension"] = {{"weight", complex_json(t.extension_weight())},
                        {"dual_weight", complex_json(dual.extension_weight())}};
  } else {
    const auto& s = *spec.selfmap;
    auto dual = cauchy_dual_comp(s);
    doc["type"] = "selfmap";
    for (const auto& k : s.window_keys(std::min(depth, 4L)))
      doc["entries"].push_back({{"key", k.str()},
                                {"weight", complex_json(s.weight(k))},
                                {"dual_weight", complex_json(dual.weight(k))}});
    doc["extension"] = {{"weight", complex_json(s.extension_weight())},
                        {"dual_weight", complex_json(dual.extension_weight())}};
  }
  emit(doc, out_path);
  std::cerr << "dual: " << doc["entries"].size() << " entries\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* budget = std::getenv("OPMODEL_MAX_SUPPORT")) {
    try {
      opmodel::set_support_budget(std::stoull(budget));
    } catch (const std::exception&) {
      std::cerr << "ignoring malformed OPMODEL_MAX_SUPPORT\n";
    }
  }

  CLI::App app{"analytic model laboratory for left-invertible operators"};
  app.require_subcommand(1);

  std::string spec_path, out_path, suites_csv, window_str = "10,10", vector_path;
  long depth = 10;
  double tol = 1e-10;
  std::uint64_t seed = 42;

  auto add_common = [&](CLI::App* cmd, bool spec_required) {
    auto* o = cmd->add_option("--spec", spec_path, "system spec document (JSON)");
    if (spec_required) o->required();
    cmd->add_option("--out", out_path, "write the JSON report here instead of stdout");
    cmd->add_option("--depth", depth, "exploration window depth");
    cmd->add_option("--tol", tol, "check tolerance");
  };

  auto* build = app.add_subcommand("build", "parse a spec and summarize the system");
  add_common(build, true);

  auto* coeffs = app.add_subcommand("coeffs", "coefficient window of a vector under the model");
  add_common(coeffs, true);
  coeffs->add_option("--vector", vector_path, "vector file (JSON entries)")->required();
  coeffs->add_option("--window", window_str, "window bounds 'N-,N+'");

  auto* verify_cmd = app.add_subcommand("verify", "run verification suites");
  add_common(verify_cmd, false);
  verify_cmd->add_option("--suite", suites_csv, "comma-separated suite names (default: all)");
  verify_cmd->add_option("--window", window_str, "window bounds 'N-,N+'");
  verify_cmd->add_option("--seed", seed, "seed for randomized corpora");

  auto* dual = app.add_subcommand("dual", "Cauchy dual weight table");
  add_common(dual, true);

  CLI11_PARSE(app, argc, argv);

  try {
    auto [wneg, wpos] = parse_window(window_str);
    if (build->parsed()) return cmd_build(spec_path, depth, out_path);
    if (coeffs->parsed())
      return cmd_coeffs(spec_path, vector_path, wneg, wpos, tol, depth, out_path);
    if (verify_cmd->parsed())
      return cmd_verify(spec_path, suites_csv, verify_cmd->count("--suite") > 0, wneg, wpos,
                        depth, tol, seed, out_path);
    if (dual->parsed()) return cmd_dual(spec_path, depth, out_path);
  } catch (const opmodel::ParseError& e) {
    nlohmann::ordered_json err = {{"error", "parse_error"}, {"detail", e.what()}};
    std::cout << err.dump(2) << "\n";
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const opmodel::NotLeftInvertibleError& e) {
    nlohmann::ordered_json err = {{"error", "not_left_invertible"}, {"detail", e.what()}};
    std::cout << err.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const opmodel::DomainError& e) {
    nlohmann::ordered_json err = {{"error", "domain_error"}, {"detail", e.what()}};
    std::cout << err.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const opmodel::Error& e) {
    nlohmann::ordered_json err = {{"error", "error"}, {"detail", e.what()}};
    std::cout << err.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

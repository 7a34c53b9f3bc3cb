// Configuration-driven experiment runner. One JSON document describes one
// experiment; the runner validates it strictly (unknown keys are rejected),
// executes the experiment, and writes a CSV report plus a JSON summary that
// embeds the fully resolved configuration.
//
// Exit statuses: 0 success, 2 configuration errors, 3 numerical errors,
// 4 certificate or invariant failures. Failures carry a machine-readable
// error record.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mfl/mfl.hpp"
#include "mfl/report_io.hpp"

namespace mfl::experiment {

enum ExitStatus : int {
  status_ok = 0,
  status_config_error = 2,
  status_numerical_error = 3,
  status_certificate_failure = 4,
};

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

namespace detail {

inline void expect_keys(const json& j, const std::set<std::string>& allowed,
                        const std::set<std::string>& required,
                        const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
  for (const auto& key : required)
    if (!j.contains(key))
      throw std::invalid_argument(where + ": missing key '" + key + "'");
}

inline double number_at(const json& j, const std::string& key,
                        const std::string& where) {
  if (!j.at(key).is_number())
    throw std::invalid_argument(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline int int_at(const json& j, const std::string& key,
                  const std::string& where) {
  if (!j.at(key).is_number_integer())
    throw std::invalid_argument(where + ": '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

inline std::vector<Eigen::Index> m_schedule(const json& j,
                                            const std::string& where) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(where + ": 'Ms' must be a nonempty array");
  std::vector<Eigen::Index> ms;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long>() < 1)
      throw std::invalid_argument(where + ": 'Ms' entries must be positive integers");
    ms.push_back(v.get<Eigen::Index>());
  }
  return ms;
}

}  // namespace detail

inline StateBox parse_box(const json& j) {
  detail::expect_keys(j, {"lower", "upper"}, {"lower", "upper"}, "kernel.box");
  const auto read = [&](const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.empty())
      throw std::invalid_argument("kernel.box: bounds must be nonempty arrays");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = arr.at(i).get<double>();
    return v;
  };
  return StateBox(read("lower"), read("upper"));
}

inline Kernel parse_kernel(const json& j) {
  detail::expect_keys(j, {"family", "bandwidth", "scale", "poly_weight", "box"},
                      {"family", "box"}, "kernel");
  const std::string family = j.at("family").get<std::string>();
  StateBox box = parse_box(j.at("box"));
  if (family == "gaussian") {
    detail::expect_keys(j, {"family", "bandwidth", "box"},
                        {"family", "bandwidth", "box"}, "kernel");
    return Kernel::gaussian(std::move(box),
                            detail::number_at(j, "bandwidth", "kernel"));
  }
  if (family == "inverse_multiquadric") {
    detail::expect_keys(j, {"family", "scale", "box"},
                        {"family", "scale", "box"}, "kernel");
    return Kernel::inverse_multiquadric(std::move(box),
                                        detail::number_at(j, "scale", "kernel"));
  }
  if (family == "augmented") {
    detail::expect_keys(j, {"family", "bandwidth", "poly_weight", "box"},
                        {"family", "bandwidth", "poly_weight", "box"}, "kernel");
    return Kernel::augmented(std::move(box),
                             detail::number_at(j, "bandwidth", "kernel"),
                             detail::number_at(j, "poly_weight", "kernel"));
  }
  throw std::invalid_argument("kernel: unknown family '" + family + "'");
}

inline StageCost parse_cost(const json& j, const Kernel& kernel,
                            const StateBox& box, Eigen::Index control_dim,
                            double u_max) {
  detail::expect_keys(j, {"kind", "lambda_u"}, {"kind", "lambda_u"},
                      "model.cost");
  const std::string kind = j.at("kind").get<std::string>();
  const double lambda_u = detail::number_at(j, "lambda_u", "model.cost");
  if (kind == "variance")
    return variance_cost(box, control_dim, u_max, lambda_u);
  if (kind == "kernel_cohesion")
    return kernel_cohesion_cost(kernel, control_dim, u_max, lambda_u);
  throw std::invalid_argument("model.cost: unknown kind '" + kind + "'");
}

inline SystemModel parse_model(const json& j, const Kernel& kernel) {
  detail::expect_keys(j, {"name", "h", "u_max", "radius", "beta", "cost"},
                      {"name", "h", "u_max", "cost"}, "model");
  const std::string name = j.at("name").get<std::string>();
  const StateBox& box = kernel.domain();
  const double h = detail::number_at(j, "h", "model");
  const double u_max = detail::number_at(j, "u_max", "model");
  if (name == "linear_consensus") {
    detail::expect_keys(j, {"name", "h", "u_max", "cost"},
                        {"name", "h", "u_max", "cost"}, "model");
    const StageCost cost = parse_cost(j.at("cost"), kernel, box, box.dim(), u_max);
    return linear_consensus(box, h, u_max, cost);
  }
  if (name == "bounded_confidence") {
    detail::expect_keys(j, {"name", "h", "u_max", "radius", "cost"},
                        {"name", "h", "u_max", "radius", "cost"}, "model");
    const StageCost cost = parse_cost(j.at("cost"), kernel, box, box.dim(), u_max);
    return bounded_confidence(box, h, detail::number_at(j, "radius", "model"),
                              u_max, cost);
  }
  if (name == "cucker_smale_discrete") {
    detail::expect_keys(j, {"name", "h", "u_max", "beta", "cost"},
                        {"name", "h", "u_max", "beta", "cost"}, "model");
    if (box.dim() % 2 != 0)
      throw std::invalid_argument(
          "model: cucker_smale_discrete needs an even-dimensional box");
    const StageCost cost =
        parse_cost(j.at("cost"), kernel, box, box.dim() / 2, u_max);
    return cucker_smale_discrete(box, h, detail::number_at(j, "beta", "model"),
                                 u_max, cost);
  }
  throw std::invalid_argument("model: unknown name '" + name + "'");
}

namespace detail {

struct RunContext {
  Kernel kernel;
  SystemModel model;
  json experiment;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out_dir;
  std::string prefix;
  json resolved;  // the full configuration embedded in every summary
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open output file " + path.string());
  out << content;
}

inline void write_outputs(const RunContext& ctx, const std::string& csv,
                          const json& results) {
  std::filesystem::create_directories(ctx.out_dir);
  write_file(ctx.out_dir / (ctx.prefix + ".csv"), csv);
  const json summary = {{"config", ctx.resolved}, {"results", results}};
  write_file(ctx.out_dir / (ctx.prefix + ".json"), summary.dump(2) + "\n");
}

inline int run_convergence_like(const RunContext& ctx,
                                const std::string& type) {
  const json& e = ctx.experiment;
  ConvergenceReport report;
  if (type == "one-step") {
    expect_keys(e, {"type", "Ms", "n_samples"}, {"type", "Ms", "n_samples"},
                "experiment");
    report = one_step_report(ctx.model, ctx.kernel,
                             m_schedule(e.at("Ms"), "experiment"),
                             int_at(e, "n_samples", "experiment"), ctx.seed,
                             ctx.jobs);
  } else if (type == "cost-convergence") {
    expect_keys(e, {"type", "Ms", "horizon", "n_samples"},
                {"type", "Ms", "horizon", "n_samples"}, "experiment");
    report = cost_convergence(ctx.model, ctx.kernel,
                              m_schedule(e.at("Ms"), "experiment"),
                              int_at(e, "horizon", "experiment"),
                              int_at(e, "n_samples", "experiment"), ctx.seed,
                              ctx.jobs);
  } else if (type == "stage-cost-convergence") {
    expect_keys(e, {"type", "Ms", "n_samples"}, {"type", "Ms", "n_samples"},
                "experiment");
    report = stage_cost_convergence(ctx.model, ctx.kernel,
                                    m_schedule(e.at("Ms"), "experiment"),
                                    int_at(e, "n_samples", "experiment"),
                                    ctx.seed, ctx.jobs);
  } else {  // embedding-convergence
    expect_keys(e, {"type", "Ms", "n_seeds", "reference"},
                {"type", "Ms", "n_seeds", "reference"}, "experiment");
    const json& ref = e.at("reference");
    expect_keys(ref, {"kind", "points_per_dim", "measure"}, {"kind"},
                "experiment.reference");
    const std::string kind = ref.at("kind").get<std::string>();
    std::optional<AtomicMeasure> reference;
    if (kind == "uniform_grid") {
      expect_keys(ref, {"kind", "points_per_dim"}, {"kind", "points_per_dim"},
                  "experiment.reference");
      reference = grid_quantization(
          ctx.kernel.domain(),
          int_at(ref, "points_per_dim", "experiment.reference"));
    } else if (kind == "atoms") {
      expect_keys(ref, {"kind", "measure"}, {"kind", "measure"},
                  "experiment.reference");
      reference = measure_from_json(ref.at("measure"));
    } else {
      throw std::invalid_argument("experiment.reference: unknown kind '" +
                                  kind + "'");
    }
    report = embedding_convergence(ctx.kernel, *reference,
                                   m_schedule(e.at("Ms"), "experiment"),
                                   int_at(e, "n_seeds", "experiment"), ctx.seed,
                                   ctx.jobs);
  }
  write_outputs(ctx, to_csv(report), to_json(report));
  return status_ok;
}

inline int run_simulate(const RunContext& ctx) {
  const json& e = ctx.experiment;
  expect_keys(e, {"type", "M", "horizon", "x0"}, {"type", "M", "horizon"},
              "experiment");
  const int horizon = int_at(e, "horizon", "experiment");
  if (horizon < 1)
    throw std::invalid_argument("experiment: horizon must be at least 1");
  AgentState x0;
  if (e.contains("x0")) {
    x0 = state_from_json(e.at("x0"));
    ctx.model.box.require_rows(x0, "simulate");
    if (x0.rows() != int_at(e, "M", "experiment"))
      throw std::invalid_argument("experiment: 'M' does not match the row count of 'x0'");
  } else {
    Rng rng = sample_stream(ctx.seed, StreamTag::simulate,
                            static_cast<std::uint64_t>(int_at(e, "M", "experiment")), 0);
    x0 = sample_agent_state(rng, ctx.model.box,
                            int_at(e, "M", "experiment"), false);
  }
  Rng useq_rng = sample_stream(ctx.seed, StreamTag::simulate, 0, 1);
  const ControlSequence useq = sample_control_sequence(
      useq_rng, ctx.model.control_dim, ctx.model.u_max, horizon);

  const auto micro = trajectory(ctx.model, x0, useq);
  const auto mf = mf_trajectory(ctx.model, empirical(x0), useq);

  std::ostringstream csv;
  csv << "step,entity,index,weight";
  for (Eigen::Index c = 0; c < ctx.model.box.dim(); ++c) csv << ",x" << c;
  csv << '\n';
  const auto emit = [&](int step_index, const char* entity,
                        const AtomicMeasure& mu) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      csv << step_index << ',' << entity << ',' << i << ','
          << format_double(mu.weights()[i]);
      for (Eigen::Index c = 0; c < mu.dim(); ++c)
        csv << ',' << format_double(mu.atoms()(i, c));
      csv << '\n';
    }
  };
  std::vector<double> gaps;
  for (std::size_t n = 0; n < micro.size(); ++n) {
    emit(static_cast<int>(n), "micro", empirical(micro[n]));
    emit(static_cast<int>(n), "meanfield", mf[n]);
    gaps.push_back(mmd(ctx.kernel, empirical(micro[n]), mf[n]));
  }
  write_outputs(ctx, csv.str(),
                json{{"mmd_per_step", gaps}, {"final_mmd", gaps.back()}});
  return status_ok;
}

inline int run_trajectory_bound(const RunContext& ctx) {
  const json& e = ctx.experiment;
  expect_keys(e, {"type", "Ms", "horizon", "n_instances"},
              {"type", "Ms", "horizon", "n_instances"}, "experiment");
  const auto ms = m_schedule(e.at("Ms"), "experiment");
  const int horizon = int_at(e, "horizon", "experiment");
  const int n_instances = int_at(e, "n_instances", "experiment");
  if (horizon < 1 || n_instances < 1)
    throw std::invalid_argument("experiment: horizon and n_instances must be positive");

  std::ostringstream csv;
  csv << "M,instance,lhs,rhs,margin,holds\n";
  bool all_hold = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const Eigen::Index m : ms) {
    auto checks = parallel_map<TrajectoryBoundCheck>(
        static_cast<std::size_t>(n_instances), ctx.jobs, [&](std::size_t i) {
          Rng rng = sample_stream(ctx.seed, StreamTag::trajectory_bound,
                                  static_cast<std::uint64_t>(m), i);
          const AgentState x0 = sample_agent_state(rng, ctx.model.box, m,
                                                   clustered_sample(i));
          const ControlSequence useq = sample_control_sequence(
              rng, ctx.model.control_dim, ctx.model.u_max, horizon);
          return trajectory_bound_check(ctx.model, ctx.kernel, x0, useq);
        });
    for (std::size_t i = 0; i < checks.size(); ++i) {
      const auto& c = checks[i];
      const double margin = c.rhs - c.lhs;
      worst_margin = std::min(worst_margin, margin);
      all_hold = all_hold && c.holds();
      csv << m << ',' << i << ',' << format_double(c.lhs) << ','
          << format_double(c.rhs) << ',' << format_double(margin) << ','
          << (c.holds() ? 1 : 0) << '\n';
    }
  }
  write_outputs(ctx, csv.str(),
                json{{"all_hold", all_hold},
                     {"worst_margin", worst_margin},
                     {"lip_dynamics", ctx.model.lip_dynamics}});
  return all_hold ? status_ok : status_certificate_failure;
}

inline int run_lipschitz(const RunContext& ctx) {
  const json& e = ctx.experiment;
  expect_keys(e, {"type", "target", "M", "n_pairs"},
              {"type", "target", "M", "n_pairs"}, "experiment");
  const std::string target = e.at("target").get<std::string>();
  const Eigen::Index m = int_at(e, "M", "experiment");
  const int n_pairs = int_at(e, "n_pairs", "experiment");
  double estimate = 0.0, declared = 0.0;
  if (target == "dynamics") {
    estimate = estimate_lipschitz(ctx.model, ctx.kernel,
                                  LipschitzTarget::dynamics, m, n_pairs,
                                  ctx.seed, ctx.jobs);
    declared = ctx.model.lip_dynamics;
  } else if (target == "stage_cost") {
    estimate = estimate_lipschitz(ctx.model, ctx.kernel,
                                  LipschitzTarget::stage_cost, m, n_pairs,
                                  ctx.seed, ctx.jobs);
    declared = ctx.model.lip_stage_cost;
  } else {
    throw std::invalid_argument("experiment: unknown lipschitz target '" +
                                target + "'");
  }
  const bool within = estimate <= declared;
  std::ostringstream csv;
  csv << "target,M,n_pairs,estimate,declared,within_declared\n"
      << target << ',' << m << ',' << n_pairs << ',' << format_double(estimate)
      << ',' << format_double(declared) << ',' << (within ? 1 : 0) << '\n';
  write_outputs(ctx, csv.str(),
                json{{"target", target},
                     {"estimate", estimate},
                     {"declared", declared},
                     {"within_declared", within}});
  return within ? status_ok : status_certificate_failure;
}

inline int run_rdp(const RunContext& ctx) {
  const json& e = ctx.experiment;
  expect_keys(e,
              {"type", "M", "n_samples", "n_measures", "alpha", "value",
               "feedback"},
              {"type", "M", "n_samples", "n_measures", "alpha", "value",
               "feedback"},
              "experiment");
  const Eigen::Index m = int_at(e, "M", "experiment");
  const int n_samples = int_at(e, "n_samples", "experiment");
  const int n_measures = int_at(e, "n_measures", "experiment");
  const double alpha = number_at(e, "alpha", "experiment");

  const json& vj = e.at("value");
  expect_keys(vj, {"kind", "scale"}, {"kind", "scale"}, "experiment.value");
  const std::string vkind = vj.at("kind").get<std::string>();
  ValueCandidate value;
  if (vkind == "variance")
    value = variance_value(number_at(vj, "scale", "experiment.value"));
  else if (vkind == "kernel_cohesion")
    value = kernel_cohesion_value(ctx.kernel,
                                  number_at(vj, "scale", "experiment.value"));
  else
    throw std::invalid_argument("experiment.value: unknown kind '" + vkind + "'");

  const json& fj = e.at("feedback");
  expect_keys(fj, {"kind", "grid_res"}, {"kind"}, "experiment.feedback");
  const std::string fkind = fj.at("kind").get<std::string>();
  FeedbackMap feedback;
  if (fkind == "zero") {
    feedback = zero_feedback(ctx.model.control_dim);
  } else if (fkind == "greedy_grid") {
    expect_keys(fj, {"kind", "grid_res"}, {"kind", "grid_res"},
                "experiment.feedback");
    feedback = greedy_feedback(ctx.model, value,
                               int_at(fj, "grid_res", "experiment.feedback"));
  } else {
    throw std::invalid_argument("experiment.feedback: unknown kind '" + fkind + "'");
  }

  const AlphaEstimate estimate =
      max_alpha_micro(ctx.model, value, feedback, m, n_samples, ctx.seed,
                      ctx.jobs);
  if (n_measures < 1)
    throw std::invalid_argument("experiment: n_measures must be positive");
  std::vector<AtomicMeasure> measures;
  measures.reserve(static_cast<std::size_t>(n_measures));
  for (int i = 0; i < n_measures; ++i) {
    Rng rng = sample_stream(ctx.seed, StreamTag::measures, 0,
                            static_cast<std::uint64_t>(i));
    measures.push_back(sample_atomic_measure(rng, ctx.model.box, 8));
  }
  const RdpCertificate cert =
      rdp_check_meanfield(ctx.model, value, feedback, measures, alpha,
                          ctx.jobs);

  std::ostringstream csv;
  csv << "index,residual\n";
  for (std::size_t i = 0; i < cert.residuals.size(); ++i)
    csv << i << ',' << format_double(cert.residuals[i]) << '\n';
  write_outputs(ctx, csv.str(),
                json{{"alpha_estimate", to_json(estimate)},
                     {"certificate", to_json(cert)},
                     {"value", value.name},
                     {"feedback", feedback.name}});
  return cert.pass ? status_ok : status_certificate_failure;
}

}  // namespace detail

/// Validates the configuration, runs the experiment and writes the report
/// files. `expected_type` (when nonempty) must match experiment.type; the
/// CLI passes its subcommand here. Errors are reported through `error_record`
/// as a JSON string and the matching exit status is returned.
inline int run(const json& config, const std::string& expected_type,
               const Overrides& overrides, std::string* error_record) {
  const auto fail = [&](const std::string& kind, const std::string& message,
                        int status) {
    if (error_record)
      *error_record =
          json{{"error", kind}, {"message", message}, {"status", status}}.dump();
    return status;
  };
  try {
    detail::expect_keys(config,
                        {"kernel", "model", "experiment", "seed", "jobs",
                         "output"},
                        {"kernel", "model", "experiment", "seed"}, "config");
    Kernel kernel = parse_kernel(config.at("kernel"));
    SystemModel model = parse_model(config.at("model"), kernel);
    detail::RunContext ctx{std::move(kernel), std::move(model),
                           config.at("experiment"),
                           0,
                           1,
                           {},
                           "",
                           json{}};
    if (!config.at("seed").is_number_unsigned() &&
        !config.at("seed").is_number_integer())
      throw std::invalid_argument("config: 'seed' must be an integer");
    ctx.seed = config.at("seed").get<std::uint64_t>();
    if (config.contains("jobs")) ctx.jobs = config.at("jobs").get<int>();
    std::string out_dir = "out";
    std::string prefix;
    if (config.contains("output")) {
      detail::expect_keys(config.at("output"), {"dir", "prefix"}, {},
                          "config.output");
      if (config.at("output").contains("dir"))
        out_dir = config.at("output").at("dir").get<std::string>();
      if (config.at("output").contains("prefix"))
        prefix = config.at("output").at("prefix").get<std::string>();
    }
    if (overrides.seed) ctx.seed = *overrides.seed;
    if (overrides.jobs) ctx.jobs = *overrides.jobs;
    if (overrides.out_dir) out_dir = *overrides.out_dir;
    if (ctx.jobs < 1)
      throw std::invalid_argument("config: 'jobs' must be at least 1");

    if (!ctx.experiment.is_object() || !ctx.experiment.contains("type"))
      throw std::invalid_argument("experiment: missing 'type'");
    const std::string type = ctx.experiment.at("type").get<std::string>();
    if (!expected_type.empty() && type != expected_type)
      throw std::invalid_argument("experiment type '" + type +
                                  "' does not match subcommand '" +
                                  expected_type + "'");
    ctx.out_dir = out_dir;
    ctx.prefix = prefix.empty() ? type : prefix;

    // The summary embeds the configuration exactly as resolved.
    ctx.resolved = config;
    ctx.resolved["seed"] = ctx.seed;
    ctx.resolved["jobs"] = ctx.jobs;
    ctx.resolved["output"] = {{"dir", out_dir}, {"prefix", ctx.prefix}};

    int status = status_ok;
    if (type == "one-step" || type == "cost-convergence" ||
        type == "stage-cost-convergence" || type == "embedding-convergence")
      status = detail::run_convergence_like(ctx, type);
    else if (type == "simulate")
      status = detail::run_simulate(ctx);
    else if (type == "trajectory-bound")
      status = detail::run_trajectory_bound(ctx);
    else if (type == "lipschitz")
      status = detail::run_lipschitz(ctx);
    else if (type == "rdp")
      status = detail::run_rdp(ctx);
    else
      throw std::invalid_argument("experiment: unknown type '" + type + "'");
    if (status != status_ok)
      return fail("certificate",
                  type + " check failed; details in " +
                      (ctx.out_dir / (ctx.prefix + ".json")).string(),
                  status);
    return status;
  } catch (const certificate_error& err) {
    return fail("certificate", err.what(), status_certificate_failure);
  } catch (const numerical_error& err) {
    return fail("numerical", err.what(), status_numerical_error);
  } catch (const estimation_error& err) {
    return fail("numerical", err.what(), status_numerical_error);
  } catch (const json::exception& err) {
    return fail("config", err.what(), status_config_error);
  } catch (const std::invalid_argument& err) {
    return fail("config", err.what(), status_config_error);
  } catch (const std::domain_error& err) {
    return fail("config", err.what(), status_config_error);
  } catch (const std::length_error& err) {
    return fail("config", err.what(), status_config_error);
  } catch (const std::exception& err) {
    return fail("numerical", err.what(), status_numerical_error);
  }
}

}  // namespace mfl::experiment

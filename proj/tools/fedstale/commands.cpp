#include "fedstale/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/statistics.hpp"
#include "fedstale/theory.hpp"
#include "fedstale/thread_pool.hpp"
#include "fedstale/version.hpp"

namespace fedstale::cli {

namespace fs = std::filesystem;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& field : split_trimmed(text, ',')) {
    if (field.empty()) throw ConfigError("--seeds", 0, "empty seed entry");
    const auto dash = field.find('-');
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        out.push_back(std::stoull(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } else {
        const std::string lo_text = field.substr(0, dash);
        const std::string hi_text = field.substr(dash + 1);
        const auto lo = std::stoull(lo_text, &used);
        if (used != lo_text.size()) throw std::invalid_argument(field);
        const auto hi = std::stoull(hi_text, &used);
        if (used != hi_text.size() || hi < lo) throw std::invalid_argument(field);
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("--seeds", 0, "bad seed entry '" + field + "'");
    }
  }
  if (out.empty()) throw ConfigError("--seeds", 0, "no seeds given");
  return out;
}

fs::path default_out_dir(const std::string& command, const fs::path& config) {
  const char* root = std::getenv(kOutRootEnv);
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / (command + "-" + config.stem().string());
}

namespace {

struct Context {
  const CommandOptions& opts;
  ExperimentConfig cfg;
  fs::path out;
  std::ostream& log;

  void write(const std::string& name, const std::string& content) const {
    write_text_atomic(out / name, content);
  }
};

void prepare_out_dir(const fs::path& out, bool force) {
  std::error_code ec;
  if (fs::exists(out, ec)) {
    if (!fs::is_directory(out, ec)) {
      throw IoError(out.string() + " exists and is not a directory");
    }
    if (!fs::is_empty(out, ec)) {
      if (!force) {
        throw IoError("output directory " + out.string() +
                      " is not empty; pass --force to replace it");
      }
      fs::remove_all(out, ec);
      if (ec) throw IoError("cannot clear " + out.string() + ": " + ec.message());
    }
  }
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

std::string manifest_text(const Context& ctx) {
  std::ostringstream m;
  m << "# fedstale " << kVersion << '\n';
  m << "# command: " << ctx.opts.command << '\n';
  m << "# master_seed: " << ctx.cfg.train.master_seed << '\n';
  m << render_config(ctx.cfg);
  return m.str();
}

std::string trace_csv_text(const std::vector<RoundParticipation>& rounds) {
  std::ostringstream out;
  out << "round,client_id,present\n";
  for (const auto& rp : rounds) {
    for (std::size_t i = 0; i < rp.present.size(); ++i) {
      out << rp.round << ',' << i << ',' << (rp.present[i] ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string describe_rule(const AggregatorConfig& a) {
  std::string s(to_string(a.rule));
  if (a.rule == AggregationRule::kFedStale) s += " beta=" + format_double(a.beta);
  return s;
}

int cmd_run(Context& ctx, const ParticipationSource* source) {
  const auto obj = make_objective(ctx.cfg);
  const TrainConfig train = make_train_config(ctx.cfg, *obj);
  const RunResult r = run(train, *obj, source);
  write_metrics_csv(r, ctx.out / "metrics.csv");
  ctx.write("trace.csv", trace_csv_text(participation_trace(r, obj->client_count())));
  std::ostringstream w;
  w << "index,value\n";
  for (Eigen::Index j = 0; j < r.final_w.size(); ++j) {
    w << j << ',' << format_double(r.final_w(j)) << '\n';
  }
  ctx.write("final_w.csv", w.str());

  std::ostringstream line;
  line << ctx.opts.command << ": " << describe_rule(train.aggregator)
       << " rounds=" << train.rounds << " final_loss=" << format_double(r.records.back().global_loss)
       << " min_grad_norm_sq=" << format_double(r.min_grad_norm_sq);
  if (r.test_accuracy) line << " test_accuracy=" << format_double(*r.test_accuracy);
  ctx.log << line.str() << '\n';
  ctx.write("summary.txt", line.str() + "\n");
  return kExitOk;
}

int cmd_repeat(Context& ctx) {
  const auto obj = make_objective(ctx.cfg);
  const TrainConfig train = make_train_config(ctx.cfg, *obj);
  const RepeatedResult rr = run_repeated(train, *obj, ctx.cfg.seeds, ctx.cfg.comparability);
  write_curves_csv(rr, ctx.out / "curves.csv");
  std::vector<double> finals;
  for (std::size_t k = 0; k < rr.runs.size(); ++k) {
    write_metrics_csv(rr.runs[k], ctx.out / ("metrics_seed" + std::to_string(rr.seeds[k]) + ".csv"));
    finals.push_back(rr.runs[k].records.back().global_loss);
  }
  std::ostringstream line;
  line << "repeat: " << describe_rule(train.aggregator) << " seeds=" << rr.seeds.size()
       << " rounds=" << train.rounds << " final_loss_mean=" << format_double(mean(finals))
       << " final_loss_stderr=" << format_double(standard_error(finals))
       << " min_grad_norm_sq_of_mean="
       << format_double(*std::min_element(rr.grad_norm_sq.mean.begin(),
                                          rr.grad_norm_sq.mean.end()));
  ctx.log << line.str() << '\n';
  ctx.write("summary.txt", line.str() + "\n");
  return kExitOk;
}

int cmd_grid(Context& ctx) {
  if (ctx.cfg.objective != ObjectiveKind::kSoftmax) {
    throw ConfigError("experiment.objective", ctx.cfg.key_lines["experiment.objective"],
                      "grid needs the softmax objective");
  }
  TrainConfig base = ctx.cfg.train;
  base.local.validate();
  GridOptions options = ctx.cfg.grid;
  options.comparability = ctx.cfg.comparability;
  const GridResult g = run_grid(base, make_objective_factory(ctx.cfg), options);
  write_grid_csv(g, ctx.out / "grid.csv");

  std::ostringstream table;
  table << "ratio,swap_fraction,beta_opt,p_min,rounds,best_client_lr\n";
  std::ostringstream line;
  line << "grid: cells=" << g.beta_opt.size() << " beta_opt=";
  for (const auto& row : g.rows) {
    if (!row.beta_opt) continue;
    table << format_double(row.ratio) << ',' << format_double(row.swap_fraction) << ','
          << format_double(row.beta) << ',' << format_double(row.p_min) << ',' << row.rounds
          << ',' << format_double(row.best_client_lr) << '\n';
  }
  for (std::size_t c = 0; c < g.beta_opt.size(); ++c) {
    line << (c ? "," : "") << format_double(g.beta_opt[c]);
  }
  ctx.write("beta_opt.csv", table.str());
  ctx.log << line.str() << '\n';
  ctx.write("summary.txt", line.str() + "\n");
  return kExitOk;
}

int cmd_theory(Context& ctx) {
  const auto obj = make_objective(ctx.cfg);
  const TrainConfig train = make_train_config(ctx.cfg, *obj);
  const auto& th = ctx.cfg.theory;
  const auto probes =
      random_probes(obj->dimension(), th.probes, th.probe_radius, ctx.cfg.train.master_seed);
  StatsOptions so;
  so.batch_size = th.stats_batch;
  so.seed = ctx.cfg.train.master_seed;
  const ObjectiveStats os = estimate_stats(*obj, probes, so);

  const ParamVector w1 = train.init_point.size() != 0
                             ? train.init_point
                             : ParamVector::Zero(static_cast<Eigen::Index>(obj->dimension()));
  // Without a closed-form F*, F >= 0 (cross-entropy) makes F(w1) an upper bound on the gap.
  const double f_star = obj->optimal_value().value_or(0.0);
  const MemoryBank empty(obj->client_count(), obj->dimension());

  BoundInputs in;
  in.L = os.smoothness_L;
  in.sigma_sq = os.sigma_sq;
  in.sg_sq = os.sg_sq;
  in.stats = stats(train.profile);
  in.n_clients = obj->client_count();
  in.K = train.local.local_steps;
  in.eta_c = train.local.client_lr;
  in.eta_s = train.server_lr;
  in.T = train.rounds;
  in.F_init_gap = std::max(0.0, obj->global_loss(w1) - f_star);
  in.H_init = memory_error(empty, *obj, w1);
  in.a1 = th.a1;
  in.a2 = th.a2;

  std::ostringstream table;
  table << "beta,iterate_init,memory_init,stochastic,heterogeneity,total,lr_ok,"
           "client_lr_max,server_lr_max,constraints_overridden\n";
  for (double beta : th.betas) {
    in.beta = beta;
    const LrCheck check = check_lr_constraints(in);
    BoundBreakdown b;
    try {
      b = theorem1_bound(in, th.allow_violation);
    } catch (const std::domain_error& e) {
      throw ConfigError("theory.allow_violation", 0,
                        std::string(e.what()) + " at beta=" + format_double(beta));
    }
    table << format_double(beta) << ',' << format_double(b.iterate_init_term) << ','
          << format_double(b.memory_init_term) << ',' << format_double(b.stochastic_term) << ','
          << format_double(b.heterogeneity_term) << ',' << format_double(b.total) << ','
          << (check.ok ? 1 : 0) << ',' << format_double(check.client_lr_max) << ','
          << format_double(check.server_lr_max()) << ',' << (b.constraints_overridden ? 1 : 0)
          << '\n';
  }
  ctx.write("bound.csv", table.str());

  std::string beta_star_text = "undefined";
  try {
    beta_star_text = format_double(beta_star(in));
  } catch (const std::domain_error&) {
  }
  const auto ps = in.stats;
  std::ostringstream constants;
  constants << "key,value\n"
            << "constant_convention," << BoundBreakdown::kConstantConvention << '\n'
            << "L," << format_double(in.L) << '\n'
            << "sigma_sq," << format_double(in.sigma_sq) << '\n'
            << "sg_sq," << format_double(in.sg_sq) << '\n'
            << "p_var," << format_double(ps.p_var) << '\n'
            << "p_avg," << format_double(ps.p_avg) << '\n'
            << "p_min," << format_double(ps.p_min) << '\n'
            << "F_init_gap," << format_double(in.F_init_gap) << '\n'
            << "H_init," << format_double(in.H_init) << '\n'
            << "beta_star," << beta_star_text << '\n';
  ctx.write("constants.csv", constants.str());

  std::ostringstream line;
  line << "theory: L=" << format_double(in.L) << " sigma_sq=" << format_double(in.sigma_sq)
       << " sg_sq=" << format_double(in.sg_sq) << " p_avg/p_min="
       << format_double(ps.heterogeneity_ratio()) << " beta_star=" << beta_star_text
       << " (unit constants)";
  ctx.log << line.str() << '\n';
  ctx.write("summary.txt", line.str() + "\n");
  return kExitOk;
}

int cmd_lowerbound(Context& ctx) {
  const auto& lb = ctx.cfg.lowerbound;
  const auto frontier = frontier_table(lb.taus, lb.max_t);
  std::size_t violations = 0;
  std::ostringstream ft;
  ft << "tau,t,k,bound,violation\n";
  for (const auto& r : frontier) {
    ft << r.tau << ',' << r.t << ',' << r.k << ',' << r.bound << ',' << (r.violation ? 1 : 0)
       << '\n';
    violations += r.violation ? 1 : 0;
  }
  ctx.write("frontier.csv", ft.str());

  const auto expectation = expectation_table(lb.p_mins, lb.eval_rounds, lb.schedules,
                                             std::numeric_limits<std::size_t>::max(),
                                             ctx.cfg.train.master_seed);
  std::size_t expectation_fail = 0;
  std::ostringstream et;
  et << "p_min,t,mean_k,stderr_k,bound,ok\n";
  for (const auto& r : expectation) {
    et << format_double(r.p_min) << ',' << r.t << ',' << format_double(r.mean_k) << ','
       << format_double(r.stderr_k) << ',' << format_double(r.bound) << ',' << (r.ok ? 1 : 0)
       << '\n';
    expectation_fail += r.ok ? 0 : 1;
  }
  ctx.write("expectation.csv", et.str());

  const HardInstance instance(ctx.cfg.hard.dimension, ctx.cfg.hard.horizon, ctx.cfg.hard.L,
                              ctx.cfg.hard.clients);
  std::ostringstream gt;
  gt << "k,floor\n";
  for (std::size_t k = 1; k <= instance.horizon(); ++k) {
    gt << k << ',' << format_double(frontier_gradient_floor(instance, k).value) << '\n';
  }
  ctx.write("gradient_floor.csv", gt.str());

  TrainConfig base = ctx.cfg.train;
  base.rounds = lb.rounds;
  std::vector<double> probs(instance.client_count(), 1.0);
  probs[instance.second_client()] = lb.p_min;
  base.profile = ParticipationProfile(probs);
  base.validate(instance);
  const auto dominance =
      dominance_table(instance, base, lb.betas, lb.seeds, ctx.cfg.train.threads);
  std::size_t dominance_fail = 0;
  std::ostringstream dt;
  dt << "beta,t,min_mean_grad_norm_sq,envelope,ok\n";
  for (const auto& r : dominance) {
    dt << format_double(r.beta) << ',' << r.t << ',' << format_double(r.min_mean_grad_norm_sq)
       << ',' << format_double(r.envelope) << ',' << (r.ok ? 1 : 0) << '\n';
    dominance_fail += r.ok ? 0 : 1;
  }
  ctx.write("dominance.csv", dt.str());

  std::ostringstream line;
  line << "lowerbound: frontier_violations=" << violations
       << " expectation_failures=" << expectation_fail
       << " dominance_failures=" << dominance_fail;
  ctx.log << line.str() << '\n';
  ctx.write("summary.txt", line.str() + "\n");
  return kExitOk;
}

int dispatch(Context& ctx) {
  const std::string& c = ctx.opts.command;
  if (c == "run") return cmd_run(ctx, nullptr);
  if (c == "repeat") return cmd_repeat(ctx);
  if (c == "grid") return cmd_grid(ctx);
  if (c == "theory") return cmd_theory(ctx);
  if (c == "lowerbound") return cmd_lowerbound(ctx);
  if (c == "replay") {
    if (!ctx.opts.trace) throw ConfigError("--trace", 0, "replay needs --trace FILE");
    const TraceParticipation trace = read_trace_csv(*ctx.opts.trace);
    return cmd_run(ctx, &trace);
  }
  throw ConfigError("command", 0, "unknown command '" + c + "'");
}

}  // namespace

int run_command(const CommandOptions& opts) {
  std::ostream& log = opts.out_stream ? *opts.out_stream : std::cout;
  std::ostream& err = opts.err_stream ? *opts.err_stream : std::cerr;
  fs::path out;
  bool out_ready = false;

  const auto fail = [&](int code, const std::string& kind, const std::string& message) {
    err << "fedstale " << opts.command << ": " << kind << ": " << message << '\n';
    if (out_ready) {
      try {
        write_text_atomic(out / "FAILED", kind + ": " + message + "\n");
      } catch (const std::exception&) {
      }
    }
    return code;
  };

  try {
    std::vector<std::string> overrides = opts.overrides;
    if (opts.threads) {
      overrides.push_back("train.threads=" + std::to_string(*opts.threads));
      overrides.push_back("grid.threads=" + std::to_string(*opts.threads));
    }
    if (opts.comparability) overrides.push_back("experiment.comparability=true");
    if (opts.seeds) {
      std::string list;
      for (std::size_t k = 0; k < opts.seeds->size(); ++k) {
        list += (k ? "," : "") + std::to_string((*opts.seeds)[k]);
      }
      overrides.push_back("experiment.seeds=" + list);
    }
    ExperimentConfig cfg = parse_config(opts.config, overrides);
    // Unset thread counts default to the available parallelism.
    if (!cfg.key_lines.count("train.threads")) cfg.train.threads = default_thread_count();
    if (!cfg.key_lines.count("grid.threads")) cfg.grid.threads = default_thread_count();

    out = opts.out ? *opts.out : default_out_dir(opts.command, opts.config);
    prepare_out_dir(out, opts.force);
    out_ready = true;

    Context ctx{opts, std::move(cfg), out, log};
    write_text_atomic(out / "manifest.txt", manifest_text(ctx));
    return dispatch(ctx);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config error", e.what());
  } catch (const DivergenceError& e) {
    return fail(kExitDivergence, "divergence", e.what());
  } catch (const IoError& e) {
    return fail(kExitIo, "I/O error", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kExitIo, "I/O error", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kExitConfig, "invalid setting", e.what());
  } catch (const std::exception& e) {
    return fail(1, "error", e.what());
  }
}

}  // namespace fedstale::cli

#include "latcompass/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <ostream>

#include "latcompass/builtin_generator.hpp"
#include "latcompass/direction_store.hpp"
#include "latcompass/error.hpp"
#include "latcompass/eval.hpp"
#include "latcompass/service.hpp"
#include "latcompass/wire_server.hpp"

namespace latcompass {
namespace {

// Blocks SIGINT/SIGTERM in the calling thread (threads started afterwards
// inherit the mask), runs `start`, then waits for a signal and runs `stop`.
template <typename Start, typename Stop>
void run_until_signal(Start&& start, Stop&& stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t old;
  pthread_sigmask(SIG_BLOCK, &set, &old);
  try {
    start();
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    throw;
  }
  int sig = 0;
  sigwait(&set, &sig);
  stop();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent compass: discover and navigate directions in a generator's latent space", "latcompass"};
  app.require_subcommand(1);

  std::string data_dir = "latcompass-data";
  app.add_option("--data-dir", data_dir, "Directory holding saved directions")->envname("LATCOMPASS_DATA_DIR");

  ServiceConfig sc;
  int ttl_seconds = static_cast<int>(sc.session_ttl.count());
  int timeout_seconds = static_cast<int>(sc.backend_timeout.count());
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", sc.host)->envname("LATCOMPASS_HOST")->capture_default_str();
  serve->add_option("--port", sc.port)->envname("LATCOMPASS_PORT")->capture_default_str();
  serve->add_option("--backend", sc.backend, "'builtin' or the base URL of an external generator")
      ->envname("LATCOMPASS_BACKEND")
      ->capture_default_str();
  serve->add_option("--truncation-theta", sc.truncation_theta)->envname("LATCOMPASS_TRUNCATION_THETA")->capture_default_str();
  serve->add_option("--svm-c", sc.svm_c)->envname("LATCOMPASS_SVM_C")->capture_default_str();
  serve->add_option("--min-total", sc.min_total)->envname("LATCOMPASS_MIN_TOTAL")->capture_default_str();
  serve->add_option("--min-per-class", sc.min_per_class)->envname("LATCOMPASS_MIN_PER_CLASS")->capture_default_str();
  serve->add_option("--max-imbalance-ratio", sc.max_imbalance_ratio)
      ->envname("LATCOMPASS_MAX_IMBALANCE_RATIO")
      ->capture_default_str();
  serve->add_option("--step-multiplier", sc.step_multiplier)->envname("LATCOMPASS_STEP_MULTIPLIER")->capture_default_str();
  serve->add_option("--max-inflight-backend-calls", sc.max_inflight_backend_calls)
      ->envname("LATCOMPASS_MAX_INFLIGHT_BACKEND_CALLS")
      ->capture_default_str();
  serve->add_option("--backend-timeout", timeout_seconds, "Seconds per backend call")
      ->envname("LATCOMPASS_BACKEND_TIMEOUT")
      ->capture_default_str();
  serve->add_option("--session-ttl", ttl_seconds, "Idle seconds before a session expires")
      ->envname("LATCOMPASS_SESSION_TTL")
      ->capture_default_str();

  std::string gen_host = "127.0.0.1";
  int gen_port = 9090;
  std::string gen_backend = "builtin";
  auto* serve_gen = app.add_subcommand("serve-generator", "Expose a generator over the external wire protocol");
  serve_gen->add_option("--host", gen_host)->capture_default_str();
  serve_gen->add_option("--port", gen_port)->capture_default_str();
  serve_gen->add_option("--backend", gen_backend)->capture_default_str();

  int n_seeds = 20;
  std::int64_t seed_base = 0;
  std::string out_file;
  int attribute = 1;
  std::string space = "scene";
  int n_train = 14;
  int starts = 5;
  auto* eval_cmd = app.add_subcommand("eval", "Run a direction-recovery experiment on the builtin generator");
  eval_cmd->add_option("--seeds", n_seeds, "Number of seeded repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--seed-base", seed_base, "First seed")->capture_default_str();
  eval_cmd->add_option("--out", out_file, "Metrics JSON file")->required();
  eval_cmd->add_option("--attribute", attribute, "Planted axis 1..4")->check(CLI::Range(1, 4))->capture_default_str();
  eval_cmd->add_option("--space", space)->check(CLI::IsMember({"scene", "detail"}))->capture_default_str();
  eval_cmd->add_option("--n-train", n_train)->capture_default_str();
  eval_cmd->add_option("--starts", starts, "Navigation starts per seed")->check(CLI::NonNegativeNumber)->capture_default_str();

  std::string record_id;
  std::string status;
  auto* moderate = app.add_subcommand("moderate", "Set the moderation status of a saved direction");
  moderate->add_option("id", record_id)->required();
  moderate->add_option("status", status)->required()->check(CLI::IsMember({"pending", "approved", "rejected"}));

  std::string file;
  auto* export_cmd = app.add_subcommand("export-direction", "Write a saved direction to a file");
  export_cmd->add_option("id", record_id)->required();
  export_cmd->add_option("file", file)->required();
  auto* import_cmd = app.add_subcommand("import-direction", "Store a direction file as a new pending record");
  import_cmd->add_option("file", file)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*serve) {
      sc.data_dir = data_dir;
      sc.session_ttl = std::chrono::seconds(ttl_seconds);
      sc.backend_timeout = std::chrono::seconds(timeout_seconds);
      sc.validate();
      CompassService service(sc, make_backend(sc));
      run_until_signal(
          [&] {
            const int port = service.start(sc.host, sc.port);
            out << "serving on http://" << sc.host << ':' << port << " (backend " << sc.backend << ")" << std::endl;
          },
          [&] { service.stop(); });
      out << "stopped" << std::endl;
    } else if (*serve_gen) {
      ServiceConfig gc;
      gc.backend = gen_backend;
      GeneratorWireServer server(make_backend(gc));
      run_until_signal(
          [&] {
            const int port = server.start(gen_host, gen_port);
            out << "generator on http://" << gen_host << ':' << port << std::endl;
          },
          [&] { server.stop(); });
    } else if (*eval_cmd) {
      CompassEngine engine(std::make_shared<BuiltinGenerator>());
      std::vector<std::int64_t> seeds(static_cast<std::size_t>(n_seeds));
      for (int i = 0; i < n_seeds; ++i) seeds[static_cast<std::size_t>(i)] = seed_base + i;
      const eval::Space sp = eval::parse_space(space);
      eval::RecoveryOptions opts;
      opts.starts_per_seed = starts;
      const auto report = eval::recovery_experiment(engine, attribute, n_train, seeds, sp, opts);
      const json metrics = eval::report_to_json(report, eval::config_digest(engine, attribute, n_train, seeds, sp, opts));
      std::ofstream f(out_file, std::ios::trunc);
      if (!f) throw Error(ErrorCode::StorageFailure, "cannot write " + out_file);
      f << metrics.dump(2) << '\n';
      if (!f) throw Error(ErrorCode::StorageFailure, "cannot write " + out_file);
      out << "attribute " << attribute << " (" << space << "): median |cos| " << report.median_cosine;
      if (sp == eval::Space::Detail) out << ", median channel mass " << report.median_channel_mass;
      out << ", monotone " << report.monotone_trajectories << '/' << report.trajectories << std::endl;
    } else if (*moderate) {
      DirectionStore store(data_dir);
      const auto r = store.set_moderation_status(record_id, parse_status(status));
      out << r.id << ' ' << status_name(r.status) << std::endl;
    } else if (*export_cmd) {
      DirectionStore store(data_dir);
      store.export_record(record_id, file);
      out << "wrote " << file << std::endl;
    } else if (*import_cmd) {
      DirectionStore store(data_dir);
      const auto r = store.import_record(file);
      out << r.id << std::endl;
    }
  } catch (const Error& e) {
    err << "error: " << error_name(e.code()) << ": " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace latcompass

#include "inpaint/cli.hpp"

#include <fstream>
#include <ostream>

#include "inpaint/checkpoint.hpp"
#include "inpaint/errors.hpp"
#include "inpaint/eval.hpp"
#include "inpaint/image_io.hpp"
#include "inpaint/service.hpp"
#include "inpaint/trainer.hpp"

namespace inpaint {

namespace {

DatasetSpec load_dataset_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(": cannot read config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(": '" + path.string() + "' is not valid JSON: " + e.what());
  }
  DatasetSpec spec;
  try {
    spec = j.contains("dataset") ? j["dataset"].get<DatasetSpec>() : j.get<DatasetSpec>();
  } catch (const ConfigError& e) {
    throw ConfigError((j.contains("dataset") ? "/dataset" : "") + std::string(e.what()));
  }
  if (!spec.root.empty() && spec.root.is_relative()) spec.root = path.parent_path() / spec.root;
  return spec;
}

// "<file>: /field: message" from a ConfigError whose text starts with a
// field path or with ": ".
std::string located(const std::filesystem::path& file, const ConfigError& e) {
  const std::string what = e.what();
  return file.string() + (what.rfind(": ", 0) == 0 ? what : ": " + what);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

}  // namespace

std::filesystem::path resolve_checkpoint(const std::filesystem::path& checkpoint) {
  return checkpoint.empty() ? default_home() / "model.ckpt" : checkpoint;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  try {
    std::optional<Trainer> trainer;
    if (args.resume) {
      std::optional<DatasetSplits> data;
      if (!args.config.empty()) data = ingest_dataset(load_train_config(args.config).dataset);
      trainer.emplace(resume_trainer(*args.resume, std::move(data)));
      out << "resuming at step " << trainer->state().global_step << " of " << trainer->config().total()
          << "\n";
    } else {
      const TrainConfig config = load_train_config(args.config);
      trainer.emplace(config, ingest_dataset(config.dataset));
    }
    const std::int64_t total = trainer->config().total();
    const std::int64_t every = std::max<std::int64_t>(1, total / 20);
    trainer->run(std::nullopt, [&](const LossRecord& r) {
      if ((r.step + 1) % every == 0 || r.step + 1 == total) {
        out << "step " << r.step + 1 << "/" << total << " stage " << r.stage << " L_r " << r.reconstruction
            << " L_a^G " << r.adversarial_g << " L_a^D " << r.adversarial_d << " L_p " << r.perceptual
            << " lr " << r.lr << "\n";
      }
    });
    out << "checkpoint: " << trainer->state().last_checkpoint.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << located(args.config.empty() ? *args.resume : args.config, e) << "\n";
    return kExitUsage;
  } catch (const TrainingAborted& e) {
    err << e.what() << "\n";
    return kExitAborted;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_complete(const CompleteArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const Generator g = load_generator(resolve_checkpoint(args.checkpoint));
    const ImageTensor image = read_image(args.image);
    const Mask mask = read_mask(args.mask);
    write_png(args.out, complete_image(g, image, mask));
    out << "wrote " << args.out.string() << " (" << mask.count() << " pixels filled)\n";
    return kExitOk;
  } catch (const ResolutionError& e) {
    err << "resolution error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    EvalOptions options;
    options.mask_size = args.mask_size;
    options.seed = args.seed;
    if (args.regime != "both") options.regimes = {parse_regime(args.regime)};
    const auto checkpoint = resolve_checkpoint(args.checkpoint);
    const Generator g = load_generator(checkpoint);
    const DatasetSplits data = ingest_dataset(load_dataset_spec(args.config));
    const MetricsReport report = evaluate(generator_completer(g), data.test, options);
    const auto dir = args.out_dir.empty() ? default_home() / "eval" : args.out_dir;
    std::filesystem::create_directories(dir);
    write_text(dir / "report.txt", emit_report(report, ReportFormat::kText));
    write_text(dir / "report.csv", emit_report(report, ReportFormat::kCsv));
    write_text(dir / "report.json", emit_report(report, ReportFormat::kJson));
    out << emit_report(report, ReportFormat::kText);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << located(args.config, e) << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const InpaintService service =
        InpaintService::from_checkpoint(resolve_checkpoint(args.checkpoint), ServiceOptions{args.max_side});
    ServiceServer server(service);
    const int port = server.bind(args.host, args.port);
    out << "serving model " << service.model_id() << " on http://" << args.host << ":" << port << std::endl;
    server.listen();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace inpaint

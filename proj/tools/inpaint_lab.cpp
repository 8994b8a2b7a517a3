#include <CLI11.hpp>
#include <iostream>

#include "inpaint/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Image completion toolkit: train, complete, evaluate, serve."};
  app.require_subcommand(1);

  inpaint::TrainArgs train;
  std::string resume;
  auto* t = app.add_subcommand("train", "Run the staged training schedule from a JSON config");
  t->add_option("--config", train.config, "Training config (JSON)");
  t->add_option("--resume", resume, "Continue from a checkpoint");
  t->callback([&] {
    if (train.config.empty() && resume.empty()) throw CLI::RequiredError("--config or --resume");
  });

  inpaint::CompleteArgs complete;
  auto* c = app.add_subcommand("complete", "Fill the masked region of one image");
  c->add_option("--checkpoint", complete.checkpoint, "Model checkpoint (default: $INPAINT_LAB_HOME/model.ckpt)");
  c->add_option("--image", complete.image, "Input PNG/JPEG")->required();
  c->add_option("--mask", complete.mask, "Mask PNG, >= 128 marks pixels to fill")->required();
  c->add_option("--out", complete.out, "Output PNG")->required();

  inpaint::EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Mean L1 / L2 / PSNR over the test split");
  e->add_option("--checkpoint", evaluate.checkpoint, "Model checkpoint (default: $INPAINT_LAB_HOME/model.ckpt)");
  e->add_option("--config", evaluate.config, "Training config or dataset spec (JSON)")->required();
  e->add_option("--regime", evaluate.regime, "center, random or both")
      ->check(CLI::IsMember({"center", "random", "both"}));
  e->add_option("--mask-size", evaluate.mask_size, "Side of the square hole")->check(CLI::PositiveNumber);
  e->add_option("--seed", evaluate.seed, "Seed of the random regime");
  e->add_option("--out", evaluate.out_dir, "Report directory (default: $INPAINT_LAB_HOME/eval)");

  inpaint::ServeArgs serve;
  auto* s = app.add_subcommand("serve", "HTTP service: POST /inpaint, GET /health");
  s->add_option("--checkpoint", serve.checkpoint, "Model checkpoint (default: $INPAINT_LAB_HOME/model.ckpt)");
  s->add_option("--host", serve.host, "Bind address");
  s->add_option("--port", serve.port, "Port")->check(CLI::Range(0, 65535));
  s->add_option("--max-side", serve.max_side, "Largest accepted image side")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (t->parsed()) {
    if (!resume.empty()) train.resume = resume;
    return inpaint::cmd_train(train, std::cout, std::cerr);
  }
  if (c->parsed()) return inpaint::cmd_complete(complete, std::cout, std::cerr);
  if (e->parsed()) return inpaint::cmd_evaluate(evaluate, std::cout, std::cerr);
  return inpaint::cmd_serve(serve, std::cout, std::cerr);
}

// Command-line driver: feature extraction, training, synthesis, objective
// evaluation, gradient checking, and synthetic corpus generation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "ilpc/dsp.hpp"
#include "ilpc/eval.hpp"
#include "ilpc/gradcheck.hpp"
#include "ilpc/io.hpp"
#include "ilpc/model.hpp"
#include "ilpc/trainer.hpp"

namespace {

using namespace ilpc;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  FrameConfig frame;
};

// key=value lines, '#' comments. Unknown keys are rejected so typos cannot
// silently fall back to defaults.
void apply_config_file(const std::string& path, Settings& s) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t\r");
      const auto b = v.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "context_dim") s.model.context_dim = std::stoi(value);
      else if (key == "gru1_dim") s.model.gru1_dim = std::stoi(value);
      else if (key == "gru2_dim") s.model.gru2_dim = std::stoi(value);
      else if (key == "mixtures") s.model.mixtures = std::stoi(value);
      else if (key == "lp_order") {
        s.model.lp_order = std::stoi(value);
        s.model.feature_dim = s.model.lp_order + 3;
        s.frame.lp_order = s.model.lp_order;
      } else if (key == "frame_shift") {
        s.model.frame_shift = std::stoi(value);
        s.frame.frame_shift = s.model.frame_shift;
      } else if (key == "chunk_len") s.train.chunk_len = std::stoul(value);
      else if (key == "batch_size") s.train.batch_size = std::stoul(value);
      else if (key == "lambda_pl") s.train.lambda_pl = std::stod(value);
      else if (key == "noise_sigma") s.train.noise_sigma = std::stod(value);
      else if (key == "total_steps") s.train.total_steps = std::stoul(value);
      else if (key == "eval_every") s.train.eval_every = std::stoul(value);
      else if (key == "seed") s.train.seed = std::stoull(value);
      else if (key == "base_lr") s.train.base_lr = std::stod(value);
      else if (key == "warmup") s.train.warmup = std::stoul(value);
      else if (key == "grad_clip") s.train.grad_clip = std::stod(value);
      else
        throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                         ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                       ": bad value for '" + key + "'");
    }
  }
}

int cmd_corpus(const std::string& out_dir, std::size_t count, double seconds,
               std::uint64_t seed, const Settings& s) {
  auto items = synth_corpus(count, seconds, seed, s.frame);
  write_corpus_dir(out_dir, items, s.frame);
  std::cout << "wrote " << items.size() << " utterances to " << out_dir << "\n";
  return 0;
}

int cmd_features(const std::string& wav_in, const std::string& feat_out,
                 const Settings& s) {
  AudioBuffer audio = wav_read(wav_in);
  FeatureTrack track = extract_features(audio, s.frame);
  feature_write(feat_out, track, audio.sample_rate, s.frame.frame_shift);
  std::cout << feat_out << ": " << track.frame_count << " frames\n";
  return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& ckpt_out,
              const std::string& log_path, const std::string& resume,
              std::size_t holdout, Settings s) {
  auto corpus = read_corpus_dir(corpus_dir, s.frame);
  if (corpus.empty()) throw std::runtime_error("train: empty corpus " + corpus_dir);
  std::vector<CorpusItem> held;
  if (holdout > 0) {
    if (holdout >= corpus.size())
      throw UsageError("train: holdout must leave at least one training utterance");
    held.assign(corpus.end() - holdout, corpus.end());
    corpus.resize(corpus.size() - holdout);
  }

  Rng init_rng(s.train.seed);
  Trainer trainer(Model::create(s.model, init_rng), s.train);
  if (!resume.empty()) trainer.load(resume);

  ChunkSchedule schedule(corpus, s.train);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("train: cannot open log " + log_path);
    if (resume.empty()) log << "step,nll,power,total,lr\n";
  }

  while (trainer.step() < s.train.total_steps) {
    const std::uint64_t step = trainer.step();
    Batch batch = assemble_batch(corpus, schedule.batch_for_step(step),
                                 trainer.model().cfg, s.train, s.train.noise_sigma,
                                 trainer.rng());
    LossBreakdown loss = trainer.train_step(batch);
    const double lr = noam_lr(step + 1, s.train.base_lr, s.train.warmup);
    if (log) {
      char row[160];
      std::snprintf(row, sizeof(row), "%llu,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(step + 1), loss.nll, loss.power,
                    loss.total, lr);
      log << row;
    }
    if (s.train.eval_every > 0 && (step + 1) % s.train.eval_every == 0) {
      std::cout << "step " << (step + 1) << " total " << loss.total;
      if (!held.empty()) std::cout << " heldout_nll " << held_out_nll(trainer, held);
      std::cout << std::endl;
    }
  }
  trainer.save(ckpt_out);
  std::cout << "checkpoint: " << ckpt_out << " at step " << trainer.step() << "\n";
  return 0;
}

int cmd_synth(const std::string& ckpt, const std::string& feat_in,
              const std::string& wav_out, double sharpen, std::uint64_t seed) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  FeatureTrack track = feature_read(feat_in);
  if (track.lp_order + 3 != loaded.model.cfg.feature_dim)
    throw std::runtime_error("synth: feature dim " + std::to_string(track.lp_order + 3) +
                             " does not match model feature dim " +
                             std::to_string(loaded.model.cfg.feature_dim));
  SynthesisStats stats;
  AudioBuffer audio = synthesize(loaded.model, track, seed, sharpen, &stats);
  wav_write(wav_out, audio);
  std::cout << wav_out << ": " << audio.samples.size() << " samples, "
            << stats.clipped_samples << " clipped\n";
  return 0;
}

int cmd_eval(const std::string& ref_path, const std::string& syn_path,
             const Settings& s) {
  AudioBuffer ref = wav_read(ref_path);
  AudioBuffer syn = wav_read(syn_path);
  EvalReport report = evaluate_pair(ref, syn, s.frame);
  std::printf("lsd_db %.6f\n", report.lsd_db);
  std::printf("f0_rmse_hz %.6f\n", report.f0_rmse_hz);
  std::printf("voicing_agreement %.6f\n", report.voicing_agreement);
  return 0;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed, bool corrupt) {
  GradCheckOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  opt.corrupt = corrupt;
  bool all_pass = true;
  for (const GradCheckEntry& e : run_gradient_checks(opt)) {
    std::printf("%-16s max_rel_err %.3e %s\n", e.component.c_str(), e.max_rel_err,
                e.pass ? "pass" : "FAIL");
    all_pass = all_pass && e.pass;
  }
  if (!all_pass) throw NumericError("gradcheck: at least one component failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LP-MDN vocoder toolkit"};
  app.require_subcommand(1);

  Settings settings;
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file");

  auto* corpus = app.add_subcommand("corpus", "generate a synthetic corpus");
  std::string corpus_out;
  std::size_t corpus_count = 10;
  double corpus_seconds = 1.0;
  std::uint64_t corpus_seed = 1;
  corpus->add_option("--out", corpus_out, "output directory")->required();
  corpus->add_option("--count", corpus_count, "number of utterances");
  corpus->add_option("--seconds", corpus_seconds, "utterance duration");
  corpus->add_option("--seed", corpus_seed, "generator seed");

  auto* features = app.add_subcommand("features", "extract features from a WAV file");
  std::string feat_wav, feat_out;
  features->add_option("wav", feat_wav, "input WAV")->required();
  features->add_option("out", feat_out, "output feature file")->required();

  auto* train = app.add_subcommand("train", "train on a corpus directory");
  std::string train_corpus, train_ckpt, train_log, train_resume;
  std::size_t train_holdout = 0;
  train->add_option("--corpus", train_corpus, "corpus directory")->required();
  train->add_option("--out", train_ckpt, "checkpoint path")->required();
  train->add_option("--log", train_log, "loss CSV path");
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  train->add_option("--holdout", train_holdout,
                    "utterances reserved for validation NLL");

  auto* synth = app.add_subcommand("synth", "synthesize from features");
  std::string synth_ckpt, synth_feat, synth_wav;
  double synth_sharpen = 0.7;
  std::uint64_t synth_seed = 1;
  synth->add_option("--ckpt", synth_ckpt, "checkpoint path")->required();
  synth->add_option("--features", synth_feat, "feature file")->required();
  synth->add_option("--out", synth_wav, "output WAV")->required();
  synth->add_option("--sharpen", synth_sharpen, "voiced scale factor");
  synth->add_option("--seed", synth_seed, "sampling seed");

  auto* eval = app.add_subcommand("eval", "objective copy-synthesis metrics");
  std::string eval_ref, eval_syn;
  eval->add_option("ref", eval_ref, "reference WAV")->required();
  eval->add_option("syn", eval_syn, "synthesized WAV")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::size_t gc_trials = 10;
  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  gradcheck->add_option("--trials", gc_trials, "random trials per component");
  gradcheck->add_option("--seed", gc_seed, "trial seed");
  gradcheck->add_flag("--corrupt", gc_corrupt, "")->group("");  // test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) apply_config_file(config_path, settings);
    if (corpus->parsed())
      return cmd_corpus(corpus_out, corpus_count, corpus_seconds, corpus_seed, settings);
    if (features->parsed()) return cmd_features(feat_wav, feat_out, settings);
    if (train->parsed())
      return cmd_train(train_corpus, train_ckpt, train_log, train_resume,
                       train_holdout, settings);
    if (synth->parsed())
      return cmd_synth(synth_ckpt, synth_feat, synth_wav, synth_sharpen, synth_seed);
    if (eval->parsed()) return cmd_eval(eval_ref, eval_syn, settings);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_trials, gc_seed, gc_corrupt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("non-finite") != std::string::npos ? 3 : 2;
  }
  return 1;
}

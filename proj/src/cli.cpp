#include "sentiment/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentiment/annotate.hpp"
#include "sentiment/annotate_server.hpp"
#include "sentiment/checkpoint.hpp"
#include "sentiment/corpus.hpp"
#include "sentiment/eval.hpp"
#include "sentiment/pipeline.hpp"
#include "sentiment/published_results.hpp"
#include "sentiment/translate.hpp"

namespace sentiment {

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

/// Failure tied to a file path; reported with exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

InputFormat infer_format(const std::string& path, const std::string& flag) {
  if (!flag.empty()) return parse_input_format(flag);
  return std::filesystem::path(path).extension() == ".csv" ? InputFormat::Csv : InputFormat::Jsonl;
}

std::vector<SurveyRecord> load_corpus(const std::string& path, const std::string& format) {
  if (!std::filesystem::exists(path)) throw IoError("input file not found: " + path);
  return ingest(path, infer_format(path, format));
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path);
  file << text;
  if (!file) throw IoError("write failed for " + path);
}

void write_records(const std::string& path, const std::vector<SurveyRecord>& records, std::ostream& out) {
  std::ostringstream buf;
  write_jsonl(buf, records);
  write_text(path, buf.str(), out);
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& h : history)
    out += nlohmann::json{{"epoch", h.epoch}, {"mean_loss", h.mean_loss}, {"lr", h.lr}}.dump() + "\n";
  return out;
}

// Shared flags of `train` and `eval`.
struct TrainingFlags {
  std::optional<std::size_t> epochs, batch_size, warmup_steps;
  std::optional<double> lr, weight_decay;
  bool attention_only = false;
  std::vector<std::string> freeze;
  std::size_t workers = 1;
  EncoderConfig model;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Override num_train_epochs");
    cmd->add_option("--lr", lr, "Base learning rate (default 5e-5)");
    cmd->add_option("--batch-size", batch_size, "Training batch size");
    cmd->add_option("--warmup-steps", warmup_steps, "Linear warmup steps");
    cmd->add_option("--weight-decay", weight_decay, "Decoupled weight decay");
    cmd->add_flag("--attention-only", attention_only, "Train only the attention projections");
    cmd->add_option("--freeze", freeze, "Parameter groups to freeze")
        ->check(CLI::IsMember({"token_embedding", "position_embedding", "attention", "ffn", "layer_norm",
                               "classifier"}));
    cmd->add_option("--workers", workers, "Threads for gradient computation")->capture_default_str();
    cmd->add_option("--d-model", model.d_model, "Model width")->capture_default_str();
    cmd->add_option("--heads", model.n_heads, "Attention heads")->capture_default_str();
    cmd->add_option("--layers", model.n_layers, "Encoder layers")->capture_default_str();
    cmd->add_option("--d-ff", model.d_ff, "Feed-forward width")->capture_default_str();
    cmd->add_option("--max-len", model.max_len, "Sequence length including [CLS]")->capture_default_str();
  }

  TrainOverrides overrides() const {
    TrainOverrides o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.warmup_steps = warmup_steps;
    o.learning_rate = lr;
    o.weight_decay = weight_decay;
    o.workers = workers;
    if (attention_only || !freeze.empty()) {
      std::set<ParamGroup> mask;
      if (attention_only) mask = TrainConfig::attention_only_mask();
      for (const auto& g : freeze) mask.insert(parse_param_group(g));
      o.freeze_mask = mask;
    }
    return o;
  }
};

std::atomic<AnnotationServer*> g_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survey sentiment pipeline: ingest, clean, translate, annotate, train and evaluate.",
               args.empty() ? "sentiment" : args[0]};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string input, output, format;
  std::string case_fold = "upper";
  std::uint64_t seed = kDefaultSeed;

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Read a CSV or JSONL corpus and write normalized JSONL");
  ingest_cmd->add_option("--input", input, "Corpus file")->required();
  ingest_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  ingest_cmd->add_option("--output", output, "Output JSONL (default: stdout)");

  // clean
  auto* clean_cmd = app.add_subcommand("clean", "Drop blank and unclear answers and case-fold the rest");
  clean_cmd->add_option("--input", input, "Corpus file")->required();
  clean_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  clean_cmd->add_option("--output", output, "Output JSONL (default: stdout)");
  clean_cmd->add_option("--case-fold", case_fold, "upper, lower or none")
      ->check(CLI::IsMember({"upper", "lower", "none"}))
      ->capture_default_str();

  // translate
  std::string backend = "identity", dict_path, cache_path, from = "fa", to = "en", clean_stage = "before";
  std::size_t translate_batch = 64, parallelism = 1;
  auto* translate_cmd = app.add_subcommand("translate", "Translate record texts through a batch backend");
  translate_cmd->add_option("--input", input, "Corpus file")->required();
  translate_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  translate_cmd->add_option("--output", output, "Output JSONL (default: stdout)");
  translate_cmd->add_option("--backend", backend, "identity, dictionary or http")
      ->check(CLI::IsMember({"identity", "dictionary", "http"}))
      ->capture_default_str();
  translate_cmd->add_option("--dict", dict_path, "JSON object of source -> target text (dictionary backend)");
  translate_cmd->add_option("--cache", cache_path, "Translation cache JSONL (created if missing)");
  translate_cmd->add_option("--batch-size", translate_batch, "Texts per backend call")->capture_default_str();
  translate_cmd->add_option("--parallelism", parallelism, "Backend calls in flight")->capture_default_str();
  translate_cmd->add_option("--from", from, "Source language for untagged records")->capture_default_str();
  translate_cmd->add_option("--to", to, "Target language")->capture_default_str();
  translate_cmd->add_option("--clean-stage", clean_stage, "Run clean before or after translating, or skip it")
      ->check(CLI::IsMember({"before", "after", "skip"}))
      ->capture_default_str();
  translate_cmd->add_option("--case-fold", case_fold, "Case folding used by the clean stage")
      ->check(CLI::IsMember({"upper", "lower", "none"}))
      ->capture_default_str();
  translate_cmd->footer(std::string("The http backend reads its endpoint URL from ") + kTranslateEndpointEnv +
                        " and its API key from " + kTranslateApiKeyEnv + ".");

  // annotate-serve
  std::string journal = "judgments.jsonl", host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> annotators;
  bool reject_unknown = false;
  auto* serve_cmd = app.add_subcommand("annotate-serve", "Serve the committee annotation HTTP API");
  serve_cmd->add_option("--input", input, "Corpus to annotate")->required();
  serve_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  serve_cmd->add_option("--journal", journal, "Append-only judgment journal")->capture_default_str();
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--annotators", annotators, "Known annotator ids")->delimiter(',');
  serve_cmd->add_flag("--reject-unknown", reject_unknown, "Refuse judgments from unlisted annotators");

  // train
  TrainingFlags train_flags;
  std::string checkpoint, history;
  std::optional<int> train_approach;
  bool checkpoint_every_epoch = false;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune the encoder on a labeled corpus");
  train_cmd->add_option("--input", input, "Labeled corpus")->required();
  train_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  train_cmd->add_option("--checkpoint", checkpoint, "Checkpoint output path")->required();
  train_cmd->add_option("--history", history, "Training history JSONL (default: <checkpoint>.history.jsonl)");
  train_cmd->add_option("--approach", train_approach, "Use this approach's config and train on its training split")
      ->check(CLI::Range(1, 3));
  train_cmd->add_option("--seed", seed, "Seed for shuffling and initialization")->capture_default_str();
  train_cmd->add_flag("--checkpoint-every-epoch", checkpoint_every_epoch, "Also write <checkpoint>.epoch<N>");
  train_flags.add_to(train_cmd);

  // eval
  TrainingFlags eval_flags;
  int approach = 1;
  std::string report_format = "json";
  auto* eval_cmd = app.add_subcommand("eval", "Split, train, predict and report one experimental approach");
  eval_cmd->add_option("--input", input, "Labeled corpus")->required();
  eval_cmd->add_option("--format", format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  eval_cmd->add_option("--approach", approach, "1 (80/20), 2 (balanced 350/class), 3 (90/10)")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  eval_cmd->add_option("--seed", seed, "Seed for split, shuffling and initialization")->capture_default_str();
  eval_cmd->add_option("--output", output, "Report file (default: stdout)");
  eval_cmd->add_option("--report", report_format, "json or md")->check(CLI::IsMember({"json", "md"}))->capture_default_str();
  eval_cmd->add_option("--checkpoint", checkpoint, "Also save the trained model here");
  eval_cmd->add_option("--history", history, "Training history JSONL");
  eval_flags.add_to(eval_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Render a saved report JSON");
  report_cmd->add_option("--input", input, "Report JSON")->required();
  report_cmd->add_option("--output", output, "Output file (default: stdout)");
  report_cmd->add_option("--report", report_format, "json or md")->check(CLI::IsMember({"json", "md"}))->capture_default_str();

  // reproduce-tables
  auto* tables_cmd =
      app.add_subcommand("reproduce-tables", "Recompute the published metric tables from their confusion counts");
  tables_cmd->add_option("--output", output, "Output file (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*ingest_cmd) {
      write_records(output, load_corpus(input, format), out);
    } else if (*clean_cmd) {
      write_records(output, clean(load_corpus(input, format), parse_case_fold(case_fold)), out);
    } else if (*translate_cmd) {
      auto records = load_corpus(input, format);
      const CaseFold fold = parse_case_fold(case_fold);
      if (clean_stage == "before") records = clean(records, fold);

      std::unique_ptr<TranslationBackend> impl;
      if (backend == "identity") {
        impl = std::make_unique<IdentityBackend>();
      } else if (backend == "dictionary") {
        if (dict_path.empty()) throw std::invalid_argument("--backend dictionary requires --dict");
        if (!std::filesystem::exists(dict_path)) throw IoError("dictionary not found: " + dict_path);
        impl = std::make_unique<DictionaryBackend>(DictionaryBackend::from_file(dict_path));
      } else {
        const char* endpoint = std::getenv(kTranslateEndpointEnv);
        const char* key = std::getenv(kTranslateApiKeyEnv);
        if (!endpoint || !*endpoint)
          throw std::invalid_argument(std::string("--backend http requires ") + kTranslateEndpointEnv);
        impl = std::make_unique<HttpBackend>(endpoint, key ? key : "");
      }
      std::optional<TranslationCache> cache;
      if (cache_path.empty()) cache.emplace();
      else cache.emplace(std::filesystem::path(cache_path));

      TranslateOptions options;
      options.source_lang = from;
      options.target_lang = to;
      options.batch_size = translate_batch;
      options.parallelism = parallelism;
      try {
        records = translate_corpus(records, *impl, *cache, options);
      } catch (const TranslationError& e) {
        err << "error: " << e.what() << "\nfailed record ids:";
        for (const auto& id : e.failed_ids()) err << ' ' << id;
        err << '\n';
        return 1;
      }
      if (clean_stage == "after") records = clean(records, fold);
      write_records(output, records, out);
    } else if (*serve_cmd) {
      CommitteeOptions options;
      options.journal = journal;
      options.policy = reject_unknown ? AnnotatorPolicy::RejectUnknown : AnnotatorPolicy::AutoRegister;
      options.annotators.insert(annotators.begin(), annotators.end());
      CommitteeService service(load_corpus(input, format), options);
      AnnotationServer server(service);
      const int bound = server.bind(host, port);
      if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
      err << "annotation service listening on http://" << host << ":" << bound << " (journal " << journal << ")\n";
      g_server = &server;
      std::signal(SIGINT, handle_stop_signal);
      std::signal(SIGTERM, handle_stop_signal);
      server.serve();
      g_server = nullptr;
    } else if (*train_cmd) {
      auto records = load_corpus(input, format);
      require_labels(records);
      TrainConfig config;
      config.seed = seed;
      if (train_approach) {
        auto setup = approach_config(*train_approach, seed);
        config = setup.train;
        records = split(records, setup.plan).train;
      }
      train_flags.overrides().apply_to(config);

      const auto vocab = Vocabulary::build(texts_of(records), 1);
      EncoderConfig model = train_flags.model;
      model.vocab_size = vocab.size();
      const auto examples = make_examples(records, vocab, model.max_len);
      const auto result = train(examples, config, model, [&](const EpochRecord& rec, const EncoderParams& p) {
        err << "epoch " << rec.epoch << "/" << config.num_train_epochs << " mean_loss " << rec.mean_loss << " lr "
            << rec.lr << '\n';
        if (checkpoint_every_epoch) save_checkpoint(checkpoint + ".epoch" + std::to_string(rec.epoch), p, vocab);
      });
      save_checkpoint(checkpoint, result.params, vocab);
      write_text(history.empty() ? checkpoint + ".history.jsonl" : history, history_jsonl(result.history), out);
      err << "train accuracy " << accuracy(examples, result.params) << ", checkpoint " << checkpoint << '\n';
    } else if (*eval_cmd) {
      const auto records = load_corpus(input, format);
      const auto run = run_approach(records, approach, seed, eval_flags.model, eval_flags.overrides());
      for (const auto& rec : run.training.history)
        err << "epoch " << rec.epoch << " mean_loss " << rec.mean_loss << " lr " << rec.lr << '\n';
      if (!checkpoint.empty()) save_checkpoint(checkpoint, run.training.params, run.vocab);
      if (!history.empty()) write_text(history, history_jsonl(run.training.history), out);
      write_text(output, render_report(run.report, parse_report_format(report_format)), out);
    } else if (*report_cmd) {
      std::ifstream in(input);
      if (!in) throw IoError("cannot open " + input);
      std::stringstream buf;
      buf << in.rdbuf();
      write_text(output, render_report(parse_report_json(buf.str()), parse_report_format(report_format)), out);
    } else if (*tables_cmd) {
      write_text(output, render_reproduction(reproduce_tables()), out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_command(const std::vector<std::string>& args) { return run_command(args, std::cout, std::cerr); }

}  // namespace sentiment

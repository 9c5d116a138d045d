#include "mds/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mds/error.hpp"
#include "mds/synth.hpp"
#include "mds/train.hpp"

namespace mds {

using json = nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

json column_json(const Tensor& t) {
  if (!t.defined()) return json::array();
  return std::vector<double>(t.value().data(), t.value().data() + t.value().size());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to the --out file when given, else to the supplied stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InputError("cannot write '" + path + "'");
    }
    stream_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

struct Options {
  std::string kb;
  std::string corpus;
  std::string context;
  std::string checkpoint;
  std::string out;
  std::string config;
  std::string kb_out;
  std::string corpus_out;
  std::string strategy = "greedy";
  std::vector<std::string> seeds;
  std::size_t max_len = 32;
  std::size_t entities = 40;
  std::size_t pairs = 32;
  bool images = false;
  bool no_relations = false;
  TrainingConfig train;
};

AcquisitionConfig acquisition_from_checkpoint(const std::string& checkpoint) {
  TrainingConfig cfg;
  const json meta = Model::load_training_meta(checkpoint);
  if (meta.is_object()) apply_config(cfg, meta);
  return cfg.acquisition;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-grounded multimodal dialog response generation"};
  app.name("mds");
  app.require_subcommand(1);
  app.set_version_flag("--version", MDS_VERSION);

  Options o;
  auto version = [](CLI::App* sub) { sub->set_version_flag("--version", MDS_VERSION); };

  auto* ingest = app.add_subcommand("ingest", "Parse a KB file and print summary statistics");
  ingest->add_option("--kb", o.kb, "KB JSON file")->required();
  ingest->add_option("--out", o.out, "Output file");

  auto* walk = app.add_subcommand("walk", "Print relation tuples reachable from seed entities");
  walk->add_option("--kb", o.kb, "KB JSON file")->required();
  walk->add_option("--seed", o.seeds, "Seed entity name (repeatable)")->required();
  walk->add_option("--hops", o.train.acquisition.max_hops, "Maximum hops")->check(CLI::PositiveNumber);
  walk->add_option("--out", o.out, "Output file");

  auto* retrieve = app.add_subcommand("retrieve", "Print attribute knowledge and relation tuples for a context");
  retrieve->add_option("--kb", o.kb, "KB JSON file")->required();
  retrieve->add_option("--context", o.context, "Context JSON file")->required();
  retrieve->add_option("--epsilon", o.train.acquisition.epsilon, "Visual similarity threshold");
  retrieve->add_option("--hops", o.train.acquisition.max_hops, "Maximum hops")->check(CLI::PositiveNumber);
  retrieve->add_option("--out", o.out, "Output file");

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--kb", o.kb, "KB JSON file")->required();
  train_cmd->add_option("--corpus", o.corpus, "Corpus JSON-lines file")->required();
  train_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path to write")->required();
  train_cmd->add_option("--config", o.config, "JSON config file");
  auto* epochs_opt = train_cmd->add_option("--epochs", o.train.epochs, "Training epochs");
  auto* seed_opt = train_cmd->add_option("--seed", o.train.seed, "Random seed");
  auto* lr_opt = train_cmd->add_option("--learning-rate", o.train.learning_rate, "Adam learning rate");
  auto* gamma_opt = train_cmd->add_option("--gamma", o.train.loss.gamma, "Regularization weight");
  auto* batch_opt = train_cmd->add_option("--batch-size", o.train.batch_size, "Pairs per update");
  auto* norel_opt = train_cmd->add_flag("--no-relations", o.no_relations, "Disable relation composition");
  train_cmd->add_option("--out", o.out, "Per-epoch loss log file");

  auto* generate = app.add_subcommand("generate", "Generate a response for one context");
  generate->add_option("--kb", o.kb, "KB JSON file")->required();
  generate->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  generate->add_option("--context", o.context, "Context JSON file")->required();
  generate->add_option("--max-len", o.max_len, "Maximum response tokens")->check(CLI::PositiveNumber);
  generate->add_option("--strategy", o.strategy, "greedy or beam:k");
  generate->add_option("--out", o.out, "Output file");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score greedy generations against a corpus");
  evaluate_cmd->add_option("--kb", o.kb, "KB JSON file")->required();
  evaluate_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  evaluate_cmd->add_option("--corpus", o.corpus, "Corpus JSON-lines file")->required();
  evaluate_cmd->add_option("--max-len", o.max_len, "Maximum response tokens")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--strategy", o.strategy, "greedy or beam:k");
  evaluate_cmd->add_option("--out", o.out, "Output file");

  auto* dump = app.add_subcommand("dump-attention", "Print relation attention and fusion weights per context");
  dump->add_option("--kb", o.kb, "KB JSON file")->required();
  dump->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  dump->add_option("--corpus", o.corpus, "Corpus JSON-lines file")->required();
  dump->add_option("--out", o.out, "Output file");

  auto* reps = app.add_subcommand("export-reps", "Print composed and ground-truth semantic representations");
  reps->add_option("--kb", o.kb, "KB JSON file")->required();
  reps->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  reps->add_option("--corpus", o.corpus, "Corpus JSON-lines file")->required();
  reps->add_option("--out", o.out, "Output file");

  auto* synth = app.add_subcommand("synth", "Write a synthetic KB and corpus");
  synth->add_option("--seed", o.train.seed, "Random seed");
  synth->add_option("--entities", o.entities, "Number of entities")->check(CLI::Range(4, 570));
  synth->add_option("--pairs", o.pairs, "Number of dialog pairs");
  synth->add_flag("--images", o.images, "Attach synthetic image features");
  synth->add_option("--kb-out", o.kb_out, "KB output file")->required();
  synth->add_option("--corpus-out", o.corpus_out, "Corpus output file (stdout if omitted)");

  for (auto* sub : {ingest, walk, retrieve, train_cmd, generate, evaluate_cmd, dump, reps, synth}) version(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << MDS_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (ingest->parsed()) {
      const KnowledgeBase kb = load_kb(o.kb);
      const KnowledgeGraph graph = build_graph(kb);
      std::size_t pairs = 0;
      for (const auto& [name, e] : kb.entities()) pairs += e.attributes.size();
      Sink sink(o.out, out);
      *sink << json{{"entities", kb.size()},
                    {"attribute_pairs", pairs},
                    {"mean_attributes", kb.size() ? static_cast<double>(pairs) / static_cast<double>(kb.size()) : 0.0},
                    {"feature_dim", kb.feature_dim()},
                    {"nodes", graph.nodes().size()},
                    {"edges", graph.edges().size()}}
                   .dump()
            << '\n';
    } else if (walk->parsed()) {
      const KnowledgeGraph graph = build_graph(load_kb(o.kb));
      const std::set<std::string> seeds(o.seeds.begin(), o.seeds.end());
      Sink sink(o.out, out);
      for (const auto& t : prioritize_tuples(walk_relations(graph, seeds, o.train.acquisition), std::nullopt)) {
        *sink << json{{"entries", t.entries}}.dump() << '\n';
      }
    } else if (retrieve->parsed()) {
      const KnowledgeBase kb = load_kb(o.kb);
      const DialogPair pair = parse_pair(read_file(o.context), kDefaultContextWindow, false);
      const ContextKnowledge k = acquire_knowledge(pair.context, kb, build_graph(kb), o.train.acquisition);
      json attrs = json::array();
      for (const auto& item : k.attributes.items) {
        attrs.push_back({{"entity", item.source_entity},
                         {"type", item.pair.type},
                         {"value", item.pair.value},
                         {"provenance", item.provenance == Provenance::textual ? "textual" : "visual"}});
      }
      json tuples = json::array();
      for (const auto& t : k.tuples) tuples.push_back(t.entries);
      Sink sink(o.out, out);
      *sink << json{{"attributes", attrs}, {"tuples", tuples}}.dump() << '\n';
    } else if (train_cmd->parsed()) {
      // Precedence: flag > config file > default.
      TrainingConfig cfg;
      if (!o.config.empty()) apply_config(cfg, json::parse(read_file(o.config)));
      if (epochs_opt->count()) cfg.epochs = o.train.epochs;
      if (seed_opt->count()) cfg.seed = o.train.seed;
      if (lr_opt->count()) cfg.learning_rate = o.train.learning_rate;
      if (gamma_opt->count()) cfg.loss.gamma = o.train.loss.gamma;
      if (batch_opt->count()) cfg.batch_size = o.train.batch_size;
      if (norel_opt->count()) cfg.model.use_relations = false;
      apply_config(cfg, json::object());

      const KnowledgeBase kb = load_kb(o.kb);
      const auto corpus = load_corpus(o.corpus);
      Sink sink(o.out, out);
      const Model model = train(corpus, kb, cfg, nullptr, [&](const EpochStats& s) {
        *sink << json{{"epoch", s.epoch}, {"loss", s.mean_loss}, {"ce", s.mean_ce}, {"reg", s.mean_reg}}.dump()
              << '\n';
      });
      model.save(o.checkpoint, to_json(cfg));
    } else if (generate->parsed()) {
      const KnowledgeBase kb = load_kb(o.kb);
      const Model model = Model::load(o.checkpoint);
      const DialogPair pair = parse_pair(read_file(o.context), kDefaultContextWindow, false);
      const ContextKnowledge k =
          acquire_knowledge(pair.context, kb, build_graph(kb), acquisition_from_checkpoint(o.checkpoint));
      const auto ids = model.generate(model.prepare_context(pair.context, k), parse_strategy(o.strategy, o.max_len));
      Sink sink(o.out, out);
      *sink << join(model.vocab().decode(ids)) << '\n';
    } else if (evaluate_cmd->parsed()) {
      const KnowledgeBase kb = load_kb(o.kb);
      const Model model = Model::load(o.checkpoint);
      const auto report = evaluate(model, load_corpus(o.corpus), kb, acquisition_from_checkpoint(o.checkpoint),
                                   parse_strategy(o.strategy, o.max_len));
      Sink sink(o.out, out);
      *sink << report.to_json().dump() << '\n';
    } else if (dump->parsed() || reps->parsed()) {
      const KnowledgeBase kb = load_kb(o.kb);
      const Model model = Model::load(o.checkpoint);
      const auto data = prepare_all(model, load_corpus(o.corpus), kb, acquisition_from_checkpoint(o.checkpoint));
      NoGradGuard no_grad;
      Sink sink(o.out, out);
      for (const auto& pair : data) {
        const ComposedRepresentation comp = model.compose(pair.context);
        if (dump->parsed()) {
          json tuples = json::array();
          for (const auto& t : pair.knowledge.tuples) tuples.push_back(t.entries);
          json attention = comp.relations_used() ? matrix_json(comp.relation_attention.value()) : json::array();
          *sink << json{{"tuples", tuples},
                        {"relation_attention", attention},
                        {"fusion_r_t", column_json(comp.r_t)},
                        {"fusion_r_h", column_json(comp.r_h)}}
                       .dump()
                << '\n';
        } else {
          const Tensor composed = model.regularizer().project_composed(comp.composed);
          const Tensor truth = model.regularizer().project_truth(model.truth_representation(pair.response_ids));
          *sink << json{{"composed", matrix_json(composed.value())}, {"ground_truth", matrix_json(truth.value())}}
                       .dump()
                << '\n';
        }
      }
    } else if (synth->parsed()) {
      SynthOptions so;
      so.with_images = o.images;
      const auto corpus = make_synthetic_corpus(o.train.seed, o.entities, o.pairs, so);
      {
        std::ofstream kb_out(o.kb_out);
        if (!kb_out) throw InputError("cannot write '" + o.kb_out + "'");
        write_kb(kb_out, corpus.kb);
      }
      Sink sink(o.corpus_out, out);
      write_corpus(*sink, corpus.pairs);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mds

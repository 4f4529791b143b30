#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrn/pipeline.hpp"

namespace {

std::vector<std::pair<nrn::GeneralType, int>> parse_counts(const std::string& shapes,
                                                           int count,
                                                           const std::string& overrides) {
    std::vector<std::pair<nrn::GeneralType, int>> out;
    std::stringstream ss(shapes);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        auto t = nrn::general_type_from_name(tok);
        if (!t) throw CLI::ValidationError("--shapes", "unknown query shape '" + tok + "'");
        out.emplace_back(*t, count);
    }
    std::stringstream so(overrides);
    while (std::getline(so, tok, ',')) {
        if (tok.empty()) continue;
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--counts", "expected shape=count, got '" + tok + "'");
        auto t = nrn::general_type_from_name(tok.substr(0, eq));
        if (!t) throw CLI::ValidationError("--counts", "unknown query shape in '" + tok + "'");
        int n = std::stoi(tok.substr(eq + 1));
        bool found = false;
        for (auto& [shape, c] : out)
            if (shape == *t) {
                c = n;
                found = true;
            }
        if (!found) out.emplace_back(*t, n);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical complex query answering over knowledge graphs"};
    app.require_subcommand(1);
    app.set_config("--config", "", "options file; command-line flags win");

    const char* env_dir = std::getenv("NRN_DATA_DIR");
    std::string default_dir = env_dir != nullptr ? env_dir : "data";

    // build
    nrn::BuildOptions bo;
    bo.out_dir = default_dir;
    auto* build = app.add_subcommand("build", "split a graph and add numerical edges");
    build->add_option("--rel", bo.rel_path, "relation triples (head<TAB>rel<TAB>tail)")
        ->required();
    build->add_option("--attr", bo.attr_path, "attribute triples (entity<TAB>attr<TAB>value)")
        ->required();
    build->add_option("--types", bo.type_map_path, "attribute type map (attr<TAB>type)")
        ->required();
    build->add_option("--out", bo.out_dir, "output directory");
    build->add_option("--cap", bo.cap_per_type, "numerical edges per relation type");
    build->add_option("--seed", bo.seed, "rng seed");

    // synth
    nrn::SynthOptions so;
    so.out_dir = default_dir;
    auto* synth = app.add_subcommand("synth", "write a synthetic graph as triple files");
    synth->add_option("--entities", so.entities);
    synth->add_option("--relations", so.relations);
    synth->add_option("--attr-types", so.attr_types);
    synth->add_option("--values", so.values);
    synth->add_option("--density", so.density, "per-relation edge probability");
    synth->add_option("--seed", so.seed, "rng seed");
    synth->add_option("--out", so.out_dir, "output directory");

    // sample
    nrn::SampleOptions po;
    po.splits_dir = default_dir;
    po.out_dir = default_dir;
    std::string shapes = "1p,2p,2i,3i,ip,pi,2u,up";
    int per_shape = 50;
    std::string count_overrides;
    auto* sample = app.add_subcommand("sample", "ground queries and write benchmark files");
    sample->add_option("--splits", po.splits_dir, "directory with *_graph.json");
    sample->add_option("--out", po.out_dir, "output directory");
    sample->add_option("--shapes", shapes, "comma-separated query shapes");
    sample->add_option("--count", per_shape, "queries per shape");
    sample->add_option("--counts", count_overrides, "per-shape overrides, e.g. 1p=100,2i=20");
    sample->add_option("--retry-budget", po.retry_budget, "seed resamples per query");
    sample->add_option("--value-root-period", po.value_root_period,
                       "every Nth query is value-rooted");
    sample->add_option("--seed", po.seed, "rng seed");

    // train
    nrn::TrainOptions to;
    to.data_dir = default_dir;
    std::string model_name = "nrn", encoder_name = "sinusoidal";
    auto* train = app.add_subcommand("train", "train a model on sampled queries");
    train->add_option("--data", to.data_dir, "directory with graphs and query files");
    train->add_option("--out", to.out_path, "checkpoint path")->required();
    train->add_option("--resume", to.resume_path, "checkpoint to continue from");
    train->add_option("--trace", to.trace_path, "loss trace csv path");
    train->add_option("--model", model_name, "nrn | flat (value-as-entity ablation)");
    train->add_option("--encoder", encoder_name, "sinusoidal | dice");
    train->add_option("--d", to.d, "embedding dimension");
    train->add_option("--anchor-variance", to.anchor_variance);
    train->add_option("--steps", to.steps, "optimizer steps");
    train->add_option("--batch", to.batch_size);
    train->add_option("--entity-steps", to.entity_steps, "entity steps per cycle");
    train->add_option("--attr-steps", to.attr_steps, "attribute steps per cycle");
    train->add_option("--lr", to.adam.lr);
    train->add_option("--clip", to.clip_norm, "gradient norm clip, 0 disables");
    train->add_option("--seed", to.seed, "rng seed");

    // eval
    nrn::EvalCmdOptions eo;
    eo.data_dir = default_dir;
    std::string split_name = "test";
    auto* eval = app.add_subcommand("eval", "rank hard answers and report metrics");
    eval->add_option("--checkpoint", eo.checkpoint_path)->required();
    eval->add_option("--data", eo.data_dir, "directory with graphs and query files");
    eval->add_option("--split", split_name, "val | test");
    eval->add_option("--out", eo.out_dir, "directory for rank_dump.tsv and report.json");

    // answer
    nrn::AnswerOptions ao;
    auto* answer = app.add_subcommand("answer", "answer a single query");
    answer->add_option("--checkpoint", ao.checkpoint_path)->required();
    answer->add_option("--query", ao.query, "query string")->required();
    answer->add_option("--graph", ao.graph_path, "graph json for the exact answer set");
    answer->add_option("--topk", ao.topk);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed()) {
            nrn::cmd_build(bo);
        } else if (synth->parsed()) {
            nrn::cmd_synth(so);
        } else if (sample->parsed()) {
            po.counts = parse_counts(shapes, per_shape, count_overrides);
            nrn::cmd_sample(po);
        } else if (train->parsed()) {
            auto kind = model_name == "nrn" ? nrn::ModelKind::TwoPhase
                                            : nrn::model_kind_from_name(model_name)
                                                  .value_or(nrn::ModelKind::TwoPhase);
            if (model_name != "nrn" && !nrn::model_kind_from_name(model_name)) {
                std::cerr << "error: unknown model '" << model_name << "'\n";
                return 2;
            }
            to.kind = kind;
            auto enc = nrn::encoder_kind_from_name(encoder_name);
            if (!enc) {
                std::cerr << "error: unknown encoder '" << encoder_name << "'\n";
                return 2;
            }
            to.encoder = *enc;
            nrn::cmd_train(to);
        } else if (eval->parsed()) {
            if (split_name != "val" && split_name != "test") {
                std::cerr << "error: --split must be val or test\n";
                return 2;
            }
            eo.split = split_name == "val" ? nrn::RecordSplit::Val : nrn::RecordSplit::Test;
            nrn::cmd_eval(eo, std::cout);
        } else if (answer->parsed()) {
            nrn::cmd_answer(ao, std::cout);
        }
    } catch (const nrn::KgError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nrn::QueryError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

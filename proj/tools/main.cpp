#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfdm/checkpoint.hpp"
#include "dfdm/config.hpp"
#include "dfdm/data.hpp"
#include "dfdm/errors.hpp"
#include "dfdm/fixtures.hpp"
#include "dfdm/gradcheck.hpp"
#include "dfdm/metrics.hpp"
#include "dfdm/model.hpp"
#include "dfdm/train.hpp"

namespace {

using dfdm::Label;
using dfdm::RunConfig;
using nlohmann::ordered_json;

void print_metrics(const dfdm::MetricsReport& rep) {
    std::cout << "accuracy " << dfdm::metric_text(rep.accuracy) << '\n'
              << "precision " << dfdm::metric_text(rep.precision) << '\n'
              << "recall " << dfdm::metric_text(rep.recall) << '\n'
              << "f1 " << dfdm::metric_text(rep.f1) << '\n'
              << "auc " << dfdm::metric_text(rep.auc) << '\n'
              << "confusion tp=" << rep.confusion.tp << " fp=" << rep.confusion.fp
              << " fn=" << rep.confusion.fn << " tn=" << rep.confusion.tn
              << " positive=" << dfdm::label_name(rep.confusion.positive) << '\n';
}

ordered_json metrics_block(const dfdm::MetricsReport* rep) {
    return rep ? dfdm::metrics_json(*rep) : ordered_json(nullptr);
}

ordered_json confusion_block(const dfdm::MetricsReport* rep) {
    return rep ? dfdm::confusion_json(rep->confusion) : ordered_json(nullptr);
}

ordered_json history_json(const std::vector<dfdm::EpochStats>& history) {
    ordered_json j = ordered_json::array();
    for (const dfdm::EpochStats& e : history) {
        ordered_json entry;
        entry["epoch"] = e.epoch;
        entry["train_loss"] = e.train_loss;
        entry["valid_accuracy"] =
            e.valid_accuracy ? ordered_json(*e.valid_accuracy) : ordered_json(nullptr);
        j.push_back(std::move(entry));
    }
    return j;
}

dfdm::ModelHyper hyper_from_config(const RunConfig& cfg) {
    dfdm::ModelHyper h;
    h.kernel = cfg.kernel;
    h.hidden = cfg.hidden;
    h.l2 = cfg.l2;
    h.dropout = cfg.dropout;
    return h;
}

struct Predictions {
    std::vector<Label> predicted;
    std::vector<Label> actual;
    std::vector<double> scores;  // model head outputs ("realness")
};

Predictions collect_predictions(const dfdm::Model<float>& model, const dfdm::DataPipeline& pipe) {
    Predictions out;
    auto batches = pipe.batches(0);
    dfdm::Batch batch;
    while (batches.next(batch)) {
        const dfdm::Tensor<float> scores = model.predict(batch.images);
        const std::vector<Label> predicted = dfdm::classify_outputs(model, scores);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            out.predicted.push_back(predicted[i]);
            out.actual.push_back(batch.labels[i]);
            out.scores.push_back(static_cast<double>(scores[i]));
        }
    }
    return out;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string data;
    std::string out = "model.ckpt";
    std::string report;
    RunConfig flags;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> overrides;
};

void add_config_overrides(CLI::App* cmd, TrainArgs& args) {
    auto add = [&](CLI::Option* opt, auto copy) {
        args.overrides.emplace_back(opt, copy);
    };
    RunConfig& f = args.flags;
    add(cmd->add_option("--model", f.model, "svm_hinge or cnn_sigmoid"),
        [](RunConfig& c, const RunConfig& v) { c.model = v.model; });
    add(cmd->add_option("--input-h", f.input_h, "input height"),
        [](RunConfig& c, const RunConfig& v) { c.input_h = v.input_h; });
    add(cmd->add_option("--input-w", f.input_w, "input width"),
        [](RunConfig& c, const RunConfig& v) { c.input_w = v.input_w; });
    add(cmd->add_option("--kernel", f.kernel, "convolution kernel size"),
        [](RunConfig& c, const RunConfig& v) { c.kernel = v.kernel; });
    add(cmd->add_option("--hidden", f.hidden, "hidden dense width (cnn_sigmoid)"),
        [](RunConfig& c, const RunConfig& v) { c.hidden = v.hidden; });
    add(cmd->add_option("--l2", f.l2, "L2 coefficient (svm_hinge head)"),
        [](RunConfig& c, const RunConfig& v) { c.l2 = v.l2; });
    add(cmd->add_option("--dropout", f.dropout, "dropout rate (cnn_sigmoid)"),
        [](RunConfig& c, const RunConfig& v) { c.dropout = v.dropout; });
    add(cmd->add_option("--lr", f.lr, "Adam learning rate"),
        [](RunConfig& c, const RunConfig& v) { c.lr = v.lr; });
    add(cmd->add_option("--beta1", f.beta1, "Adam beta1"),
        [](RunConfig& c, const RunConfig& v) { c.beta1 = v.beta1; });
    add(cmd->add_option("--beta2", f.beta2, "Adam beta2"),
        [](RunConfig& c, const RunConfig& v) { c.beta2 = v.beta2; });
    add(cmd->add_option("--epsilon", f.epsilon, "Adam epsilon"),
        [](RunConfig& c, const RunConfig& v) { c.epsilon = v.epsilon; });
    add(cmd->add_option("--epochs", f.epochs, "training epochs"),
        [](RunConfig& c, const RunConfig& v) { c.epochs = v.epochs; });
    add(cmd->add_option("--batch", f.batch, "batch size"),
        [](RunConfig& c, const RunConfig& v) { c.batch = v.batch; });
    add(cmd->add_option("--seed", f.seed, "master seed"),
        [](RunConfig& c, const RunConfig& v) { c.seed = v.seed; });
    add(cmd->add_option("--flip-prob", f.flip_prob, "horizontal flip probability"),
        [](RunConfig& c, const RunConfig& v) { c.flip_prob = v.flip_prob; });
    add(cmd->add_option("--shear-max", f.shear_max, "max shear factor"),
        [](RunConfig& c, const RunConfig& v) { c.shear_max = v.shear_max; });
    add(cmd->add_option("--zoom-lo", f.zoom_lo, "zoom range low"),
        [](RunConfig& c, const RunConfig& v) { c.zoom_lo = v.zoom_lo; });
    add(cmd->add_option("--zoom-hi", f.zoom_hi, "zoom range high"),
        [](RunConfig& c, const RunConfig& v) { c.zoom_hi = v.zoom_hi; });
    add(cmd->add_flag("--augment,!--no-augment", f.augment, "train-split augmentation"),
        [](RunConfig& c, const RunConfig& v) { c.augment = v.augment; });
    add(cmd->add_option("--positive-class", f.positive_class, "real or deepfake"),
        [](RunConfig& c, const RunConfig& v) { c.positive_class = v.positive_class; });
}

int cmd_train(const TrainArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) dfdm::load_config_file(cfg, args.config_path);
    for (const auto& [opt, copy] : args.overrides) {
        if (opt->count() > 0) copy(cfg, args.flags);
    }
    if (!args.data.empty()) cfg.data = args.data;
    dfdm::validate_config(cfg);
    if (cfg.data.empty()) throw dfdm::ConfigError("no dataset: pass --data or set 'data' in the config");

    const dfdm::Manifest manifest = dfdm::load_manifest(cfg.data);
    std::cerr << manifest.summary();

    dfdm::PipelineOptions train_opt;
    train_opt.split = dfdm::Split::train;
    train_opt.height = cfg.input_h;
    train_opt.width = cfg.input_w;
    train_opt.batch_size = cfg.batch;
    train_opt.seed = cfg.seed;
    train_opt.shuffle = true;
    train_opt.augment = cfg.augment;
    train_opt.aug = {cfg.flip_prob, cfg.shear_max, cfg.zoom_lo, cfg.zoom_hi};
    const dfdm::DataPipeline train_pipe(manifest, train_opt);

    dfdm::PipelineOptions valid_opt = train_opt;
    valid_opt.split = dfdm::Split::valid;
    valid_opt.shuffle = false;
    valid_opt.augment = false;
    const dfdm::DataPipeline valid_pipe(manifest, valid_opt);

    dfdm::Model<float> model = dfdm::build_model<float>(
        dfdm::parse_model_kind(cfg.model), cfg.input_h, cfg.input_w, 3,
        hyper_from_config(cfg), cfg.seed);

    dfdm::TrainOptions topt;
    topt.epochs = cfg.epochs;
    topt.lr = cfg.lr;
    topt.beta1 = cfg.beta1;
    topt.beta2 = cfg.beta2;
    topt.epsilon = cfg.epsilon;
    topt.seed = cfg.seed;
    const dfdm::TrainResult result = dfdm::train_model(model, train_pipe, &valid_pipe, topt);
    for (const dfdm::EpochStats& e : result.history) {
        std::cerr << "epoch " << e.epoch << " loss " << e.train_loss;
        if (e.valid_accuracy) std::cerr << " valid_acc " << *e.valid_accuracy;
        std::cerr << '\n';
    }

    dfdm::save_checkpoint(model, args.out);

    // Final validation metrics, when a validation split exists.
    dfdm::MetricsReport rep;
    bool have_metrics = false;
    std::vector<dfdm::RocPoint> roc;
    if (valid_pipe.sample_count() > 0 && !result.aborted) {
        const Predictions pred = collect_predictions(model, valid_pipe);
        const Label positive = dfdm::parse_label(cfg.positive_class);
        rep = dfdm::report_from_confusion(dfdm::confusion(pred.predicted, pred.actual, positive));
        try {
            std::vector<double> oriented = pred.scores;
            if (positive == Label::deepfake) {
                for (double& s : oriented) s = -s;
            }
            rep.auc = dfdm::auc_from_scores(oriented, pred.actual, positive);
            roc = dfdm::roc_curve(oriented, pred.actual, positive);
        } catch (const dfdm::ShapeError&) {
            // single-class validation split: keep the hard-label auc
        }
        have_metrics = true;
    }

    ordered_json report;
    report["positive_class"] = cfg.positive_class;
    report["metrics"] = metrics_block(have_metrics ? &rep : nullptr);
    report["confusion"] = confusion_block(have_metrics ? &rep : nullptr);
    report["config"] = dfdm::config_json(cfg);
    report["history"] = history_json(result.history);
    report["roc_points"] = dfdm::roc_json(roc);
    const std::string report_path =
        args.report.empty() ? args.out + ".report.json" : args.report;
    dfdm::write_json_file(report_path, report);

    if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_message << '\n';
        return 4;
    }
    std::cout << "checkpoint " << args.out << '\n' << "report " << report_path << '\n';
    return 0;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string model_path;
    std::string data;
    std::string split = "test";
    std::string report;
    std::string roc_csv;
    std::string positive_class = "deepfake";
    std::size_t batch = 64;
};

int cmd_eval(const EvalArgs& args) {
    const dfdm::Model<float> model = dfdm::load_checkpoint(args.model_path);
    const dfdm::Manifest manifest = dfdm::load_manifest(args.data);

    dfdm::PipelineOptions opt;
    opt.split = dfdm::parse_split(args.split);
    opt.height = model.in_h;
    opt.width = model.in_w;
    opt.batch_size = args.batch;
    const dfdm::DataPipeline pipe(manifest, opt);
    if (pipe.sample_count() == 0) {
        throw dfdm::DataError("split '" + args.split + "' is empty in " + args.data);
    }

    const Label positive = dfdm::parse_label(args.positive_class);
    const Predictions pred = collect_predictions(model, pipe);
    dfdm::MetricsReport rep =
        dfdm::report_from_confusion(dfdm::confusion(pred.predicted, pred.actual, positive));
    std::vector<dfdm::RocPoint> roc;
    try {
        std::vector<double> oriented = pred.scores;
        if (positive == Label::deepfake) {
            for (double& s : oriented) s = -s;
        }
        rep.auc = dfdm::auc_from_scores(oriented, pred.actual, positive);
        roc = dfdm::roc_curve(oriented, pred.actual, positive);
    } catch (const dfdm::ShapeError&) {
        // single-class split: hard-label auc stays
    }

    print_metrics(rep);

    if (!args.report.empty()) {
        RunConfig cfg;
        cfg.model = dfdm::model_kind_name(model.kind);
        cfg.input_h = model.in_h;
        cfg.input_w = model.in_w;
        cfg.kernel = model.hyper.kernel;
        cfg.hidden = model.hyper.hidden;
        cfg.l2 = model.hyper.l2;
        cfg.dropout = model.hyper.dropout;
        cfg.data = args.data;
        cfg.positive_class = args.positive_class;
        ordered_json report;
        report["positive_class"] = args.positive_class;
        report["metrics"] = dfdm::metrics_json(rep);
        report["confusion"] = dfdm::confusion_json(rep.confusion);
        report["split"] = args.split;
        report["config"] = dfdm::config_json(cfg);
        report["history"] = ordered_json::array();
        report["roc_points"] = dfdm::roc_json(roc);
        dfdm::write_json_file(args.report, report);
    }
    if (!args.roc_csv.empty()) dfdm::write_roc_csv(args.roc_csv, roc);
    return 0;
}

// --- predict ---------------------------------------------------------------

int cmd_predict(const std::string& model_path, const std::string& image_path) {
    const dfdm::Model<float> model = dfdm::load_checkpoint(model_path);
    dfdm::Tensor<float> img = dfdm::decode_image(image_path);
    img = dfdm::resize_bilinear(img, model.in_h, model.in_w);
    dfdm::Tensor<float> batch({1, model.in_h, model.in_w, 3}, img.values());
    const dfdm::Tensor<float> out = model.predict(batch);
    const std::vector<Label> label = dfdm::classify_outputs(model, out);
    std::cout << dfdm::label_name(label[0]) << ' ' << out[0] << '\n';
    return 0;
}

// --- metrics ---------------------------------------------------------------

int cmd_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn,
                const std::string& positive_class) {
    dfdm::ConfusionMatrix cm;
    cm.tp = tp;
    cm.fp = fp;
    cm.fn = fn;
    cm.tn = tn;
    cm.positive = dfdm::parse_label(positive_class);
    print_metrics(dfdm::report_from_confusion(cm));
    return 0;
}

// --- gradcheck ---------------------------------------------------------------

int cmd_gradcheck(const std::string& layer, std::uint64_t seed, std::size_t trials,
                  bool inject_error) {
    dfdm::GradCheckOptions opt;
    opt.seed = seed;
    opt.trials = trials;
    opt.inject_error = inject_error;
    const std::vector<dfdm::GradCheckResult> results = dfdm::run_gradcheck(layer, opt);
    bool ok = true;
    for (const dfdm::GradCheckResult& r : results) {
        const bool below_gate = r.max_rel_err < 1e-4;
        ok = ok && below_gate;
        std::cout << r.name << " max_rel_err " << r.max_rel_err << " threshold " << r.threshold
                  << (below_gate ? " [ok]" : " [FAIL]") << '\n';
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepfake image classifiers: training, evaluation and metrics"};
    app.require_subcommand(1);

    // train
    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
    train->add_option("--config", train_args.config_path, "key = value config file");
    train->add_option("--data", train_args.data, "dataset directory or manifest CSV");
    train->add_option("--out", train_args.out, "checkpoint output path");
    train->add_option("--report", train_args.report, "report JSON path (default <out>.report.json)");
    add_config_overrides(train, train_args);

    // eval
    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint over a split");
    eval->add_option("--model", eval_args.model_path, "checkpoint path")->required();
    eval->add_option("--data", eval_args.data, "dataset directory or manifest CSV")->required();
    eval->add_option("--split", eval_args.split, "train, valid or test (default test)");
    eval->add_option("--report", eval_args.report, "report JSON path");
    eval->add_option("--roc", eval_args.roc_csv, "ROC curve CSV path");
    eval->add_option("--positive-class", eval_args.positive_class, "real or deepfake");
    eval->add_option("--batch", eval_args.batch, "evaluation batch size");

    // predict
    std::string predict_model, predict_image;
    CLI::App* predict = app.add_subcommand("predict", "classify one image");
    predict->add_option("--model", predict_model, "checkpoint path")->required();
    predict->add_option("--image", predict_image, "image path (PPM/PNG/JPEG)")->required();

    // metrics
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::string metrics_positive = "deepfake";
    CLI::App* metrics = app.add_subcommand("metrics", "compute metrics from confusion counts");
    metrics->add_option("--tp", tp, "true positives");
    metrics->add_option("--fp", fp, "false positives");
    metrics->add_option("--fn", fn, "false negatives");
    metrics->add_option("--tn", tn, "true negatives");
    metrics->add_option("--positive-class", metrics_positive, "real or deepfake");

    // gradcheck
    std::string layer = "all";
    std::uint64_t gc_seed = 1;
    std::size_t gc_trials = 20;
    bool inject_error = false;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite (f64)");
    gradcheck->add_option("--layer", layer, "layer name or 'all'");
    gradcheck->add_option("--seed", gc_seed, "suite seed");
    gradcheck->add_option("--trials", gc_trials, "random instances per check");
    gradcheck->add_flag("--inject-error", inject_error,
                        "corrupt analytic gradients (checker canary)")
        ->group("");

    // fixture
    dfdm::FixtureSpec fixture_spec;
    std::string fixture_out;
    CLI::App* fixture = app.add_subcommand("fixture", "generate the synthetic PPM dataset");
    fixture->add_option("--out", fixture_out, "output directory")->required();
    fixture->add_option("--train", fixture_spec.train_per_class, "train images per class");
    fixture->add_option("--valid", fixture_spec.valid_per_class, "valid images per class");
    fixture->add_option("--test", fixture_spec.test_per_class, "test images per class");
    fixture->add_option("--size", fixture_spec.size, "square image size in pixels");
    fixture->add_option("--seed", fixture_spec.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (predict->parsed()) return cmd_predict(predict_model, predict_image);
        if (metrics->parsed()) return cmd_metrics(tp, fp, fn, tn, metrics_positive);
        if (gradcheck->parsed()) return cmd_gradcheck(layer, gc_seed, gc_trials, inject_error);
        if (fixture->parsed()) {
            dfdm::generate_fixture(fixture_out, fixture_spec);
            std::cout << "fixture " << fixture_out << '\n';
            return 0;
        }
    } catch (const dfdm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const dfdm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const dfdm::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const dfdm::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return 5;
    } catch (const dfdm::ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

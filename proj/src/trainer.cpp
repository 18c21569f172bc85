#include "mvmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <json.hpp>

#include "mvmt/checkpoint.hpp"
#include "mvmt/errors.hpp"

namespace mvmt {

using nlohmann::json;

void TrainerConfig::validate() const {
    if (labeled_batch == 0 || unlabeled_batch == 0) {
        raise(ErrorKind::Domain, "batch sizes must be at least 1");
    }
    if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "learning rate must be positive");
    if (!single_split && folds < 2) raise(ErrorKind::Config, "cross-validation needs at least 2 folds");
    if (hidden_dim < 2 || hidden_dim % 2) raise(ErrorKind::Config, "hidden dimension must be even and >= 2");
    if (contrastive_temperature <= 0.0) raise(ErrorKind::Config, "contrastive temperature must be positive");
    if (jobs == 0) raise(ErrorKind::Config, "jobs must be at least 1");
}

ModelConfig TrainerConfig::model_config(std::size_t vocab_size, std::size_t num_tasks) const {
    ModelConfig config;
    config.encoder.hidden_dim = hidden_dim;
    config.encoder.vocab_size = vocab_size;
    config.encoder.kernel_width = kernel_width;
    config.num_tasks = variant == Variant::NoTaskSpecific ? 1 : num_tasks;
    config.variant = variant;
    config.projection_dim = projection_dim;
    config.contrastive_temperature = contrastive_temperature;
    return config;
}

std::vector<double> compute_sampling_rates(const std::vector<std::size_t>& dataset_sizes,
                                           const std::vector<std::size_t>& batch_sizes) {
    if (dataset_sizes.empty() || dataset_sizes.size() != batch_sizes.size()) {
        raise(ErrorKind::Domain, "sampling rates need matching non-empty size and batch lists");
    }
    std::vector<double> rates(dataset_sizes.size());
    double total = 0.0;
    for (std::size_t k = 0; k < dataset_sizes.size(); ++k) {
        if (batch_sizes[k] == 0) raise(ErrorKind::Domain, "batch size must be positive");
        if (dataset_sizes[k] == 0) raise(ErrorKind::Domain, "dataset size must be positive");
        rates[k] = static_cast<double>(dataset_sizes[k]) / static_cast<double>(batch_sizes[k]);
        total += rates[k];
    }
    for (double& r : rates) r /= total;
    return rates;
}

std::size_t sample_task(const std::vector<double>& rates, const std::vector<bool>& alive, Rng& rng) {
    if (rates.size() != alive.size()) raise(ErrorKind::Domain, "rates/alive size mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (alive[k]) total += rates[k];
    }
    if (total <= 0.0) raise(ErrorKind::State, "no task left to sample");
    double u = rng.uniform() * total;
    std::size_t last_alive = rates.size();
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (!alive[k]) continue;
        last_alive = k;
        if (u < rates[k]) return k;
        u -= rates[k];
    }
    return last_alive; // numerical edge of the roulette walk
}

std::vector<double> score_dataset(const MultiTaskModel& model, ParamStore& store,
                                  const LabeledDataset& dataset, const CodeVocabulary& vocab,
                                  std::size_t network_task) {
    std::vector<double> scores;
    scores.reserve(dataset.size());
    for (const PatientRecord& record : dataset.records) {
        scores.push_back(model.predict_value(record, vocab, network_task, store));
    }
    return scores;
}

EpochStats train_epoch(const MultiTaskModel& model, ParamStore& store,
                       const std::vector<const LabeledDataset*>& task_train_sets,
                       const std::vector<const PatientRecord*>& unlabeled_pool,
                       const CodeVocabulary& vocab, const TrainerConfig& config, Rng& rng) {
    const std::size_t labeled_count = task_train_sets.size();
    if (labeled_count == 0) raise(ErrorKind::Domain, "train_epoch needs at least one labeled dataset");
    const bool use_unlabeled = model.config().has_unlabeled_head() && !unlabeled_pool.empty();
    const std::size_t total_tasks = labeled_count + (use_unlabeled ? 1 : 0);

    std::vector<std::size_t> sizes, batches;
    for (const LabeledDataset* d : task_train_sets) {
        sizes.push_back(d->size());
        batches.push_back(config.labeled_batch);
    }
    if (use_unlabeled) {
        sizes.push_back(unlabeled_pool.size());
        batches.push_back(config.unlabeled_batch);
    }
    const std::vector<double> rates = compute_sampling_rates(sizes, batches);

    // per-task queues consumed without replacement
    std::vector<std::vector<std::size_t>> queues(total_tasks);
    std::vector<std::size_t> cursor(total_tasks, 0);
    std::vector<bool> alive(total_tasks);
    for (std::size_t k = 0; k < total_tasks; ++k) {
        queues[k].resize(sizes[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) queues[k][i] = i;
        rng.shuffle(queues[k]);
        alive[k] = sizes[k] > 0;
    }

    EpochStats stats;
    stats.labeled_loss.assign(labeled_count, 0.0);
    stats.labeled_steps.assign(labeled_count, 0);
    stats.labeled_auroc.assign(labeled_count, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::vector<double>> epoch_scores(labeled_count);
    std::vector<std::vector<int>> epoch_labels(labeled_count);

    std::size_t step = 0;
    while (std::any_of(alive.begin(), alive.end(), [](bool a) { return a; })) {
        const std::size_t k = sample_task(rates, alive, rng);
        const std::size_t take = std::min(batches[k], sizes[k] - cursor[k]);
        ++step;
        ag::Var loss;
        std::string task_label;
        if (k < labeled_count) {
            const LabeledDataset& data = *task_train_sets[k];
            task_label = data.task_name;
            std::vector<ag::Var> predictions;
            std::vector<int> labels;
            predictions.reserve(take);
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t idx = queues[k][cursor[k] + i];
                predictions.push_back(model.predict(data.records[idx], vocab, k, store));
                labels.push_back(data.labels[idx]);
                epoch_scores[k].push_back(predictions.back()->value[0]);
                epoch_labels[k].push_back(data.labels[idx]);
            }
            loss = ag::bce_loss(predictions, labels);
            stats.labeled_loss[k] += loss->value[0];
            stats.labeled_steps[k] += 1;
        } else {
            task_label = "unlabeled";
            std::vector<const PatientRecord*> batch;
            batch.reserve(take);
            for (std::size_t i = 0; i < take; ++i) batch.push_back(unlabeled_pool[queues[k][cursor[k] + i]]);
            loss = model.unlabeled_batch_loss(batch, vocab, store);
            stats.unlabeled_loss += loss->value[0];
            stats.unlabeled_steps += 1;
        }
        if (!std::isfinite(loss->value[0])) {
            raise(ErrorKind::Divergence, "non-finite loss on task " + task_label + " at step " +
                                             std::to_string(step));
        }
        ag::backward(loss);
        store.collect_gradients();
        store.adam_step(config.learning_rate);
        cursor[k] += take;
        if (cursor[k] >= sizes[k]) alive[k] = false;
    }

    for (std::size_t k = 0; k < labeled_count; ++k) {
        if (stats.labeled_steps[k]) stats.labeled_loss[k] /= static_cast<double>(stats.labeled_steps[k]);
        try {
            stats.labeled_auroc[k] = auroc(epoch_scores[k], epoch_labels[k]);
        } catch (const Error&) {
            // single-class epoch; leave NaN
        }
    }
    if (stats.unlabeled_steps) stats.unlabeled_loss /= static_cast<double>(stats.unlabeled_steps);
    return stats;
}

EvalResult aggregate_eval(const std::vector<std::string>& task_names,
                          const std::vector<std::vector<double>>& per_fold_task_auc) {
    EvalResult result;
    result.task_names = task_names;
    const std::size_t folds = per_fold_task_auc.size();
    result.fold_auc.assign(task_names.size(), std::vector<double>(folds, 0.0));
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t t = 0; t < task_names.size(); ++t) {
            result.fold_auc[t][f] = per_fold_task_auc[f][t];
        }
    }
    double overall = 0.0;
    for (std::size_t t = 0; t < task_names.size(); ++t) {
        double mean = 0.0;
        for (double v : result.fold_auc[t]) mean += v;
        mean /= static_cast<double>(folds);
        double var = 0.0;
        for (double v : result.fold_auc[t]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(folds);
        result.mean_auc.push_back(mean);
        result.std_auc.push_back(std::sqrt(var));
        overall += mean;
    }
    result.overall_mean = overall / static_cast<double>(task_names.size());
    return result;
}

std::vector<FoldData> make_folds(const TaskBundle& bundle, const TrainerConfig& config) {
    config.validate();
    if (bundle.labeled.empty()) raise(ErrorKind::Domain, "bundle has no labeled datasets");
    const std::size_t fold_count = config.single_split ? 1 : config.folds;
    std::vector<FoldData> folds(fold_count);
    for (std::size_t t = 0; t < bundle.labeled.size(); ++t) {
        const std::uint64_t split_seed = config.seed + 7919 * (t + 1);
        if (config.single_split) {
            FoldSplit split = single_split(bundle.labeled[t], config.test_fraction,
                                           config.validation_fraction, split_seed);
            folds[0].train.push_back(std::move(split.train));
            folds[0].validation.push_back(std::move(split.validation));
            folds[0].test.push_back(std::move(split.test));
        } else {
            std::vector<FoldSplit> splits =
                kfold_split(bundle.labeled[t], config.folds, config.validation_fraction, split_seed);
            for (std::size_t f = 0; f < fold_count; ++f) {
                folds[f].train.push_back(std::move(splits[f].train));
                folds[f].validation.push_back(std::move(splits[f].validation));
                folds[f].test.push_back(std::move(splits[f].test));
            }
        }
    }
    return folds;
}

namespace {

json metric_line(std::size_t epoch, std::size_t fold, const std::string& task, const char* split,
                 double loss, double auroc_value) {
    json line = {{"epoch", epoch}, {"fold", fold}, {"task", task}, {"split", split}, {"loss", loss}};
    if (std::isfinite(auroc_value)) {
        line["auroc"] = auroc_value;
    } else {
        line["auroc"] = nullptr;
    }
    return line;
}

/// Joint training of all labeled tasks (plus the contrastive task when the
/// variant has one) in a single parameter store.
class JointFoldTrainer : public FoldTrainer {
public:
    JointFoldTrainer(const TaskBundle& bundle, FoldData data, const TrainerConfig& config,
                     std::size_t fold)
        : bundle_(bundle),
          data_(std::move(data)),
          config_(config),
          fold_(fold),
          model_config_(config.model_config(bundle.vocabulary.size(), bundle.labeled.size())),
          model_(model_config_),
          rng_(Rng::derive(config.seed, 88000 + fold)) {
        Rng init = Rng::derive(config_.seed, 77000 + fold_);
        model_.register_params(store_, init);
        for (const LabeledDataset& d : data_.train) task_names_.push_back(d.task_name);
    }

    std::size_t completed_epochs() const override { return epoch_; }
    bool done() const override { return epoch_ >= config_.epochs; }

    void run_epoch() override {
        if (done()) raise(ErrorKind::State, "fold already trained to the configured epochs");
        std::vector<const LabeledDataset*> trains;
        for (const LabeledDataset& d : data_.train) trains.push_back(&d);
        std::vector<const PatientRecord*> pool;
        if (model_config_.has_unlabeled_head()) {
            for (const PatientRecord& r : bundle_.unlabeled) pool.push_back(&r);
        }
        EpochStats stats = train_epoch(model_, store_, trains, pool, bundle_.vocabulary, config_, rng_);
        ++epoch_;

        std::vector<double> val_auc(task_names_.size()), test_auc(task_names_.size());
        double val_mean = 0.0;
        for (std::size_t t = 0; t < task_names_.size(); ++t) {
            std::vector<double> vs = score_dataset(model_, store_, data_.validation[t], bundle_.vocabulary, t);
            std::vector<double> ts = score_dataset(model_, store_, data_.test[t], bundle_.vocabulary, t);
            val_auc[t] = auroc(vs, data_.validation[t].labels);
            test_auc[t] = auroc(ts, data_.test[t].labels);
            val_mean += val_auc[t];
            lines_.push_back(metric_line(epoch_, fold_, task_names_[t], "train", stats.labeled_loss[t],
                                         stats.labeled_auroc[t]).dump());
            lines_.push_back(metric_line(epoch_, fold_, task_names_[t], "valid",
                                         bce_value(vs, data_.validation[t].labels), val_auc[t]).dump());
            lines_.push_back(metric_line(epoch_, fold_, task_names_[t], "test",
                                         bce_value(ts, data_.test[t].labels), test_auc[t]).dump());
        }
        if (stats.unlabeled_steps > 0) {
            lines_.push_back(metric_line(epoch_, fold_, "unlabeled", "train", stats.unlabeled_loss,
                                         std::numeric_limits<double>::quiet_NaN()).dump());
        }
        val_mean /= static_cast<double>(task_names_.size());
        if (val_mean > best_val_mean_) {
            best_val_mean_ = val_mean;
            best_epoch_ = epoch_;
            best_val_auc_ = val_auc;
            best_test_auc_ = test_auc;
            best_store_ = store_;
        }
    }

    FoldOutcome outcome() const override {
        FoldOutcome out;
        out.fold = fold_;
        out.metric_lines = lines_;
        auto model = std::make_shared<TrainedModel>(model_config_, task_names_);
        if (best_epoch_ == 0) {
            // untrained run (epochs = 0): evaluate the initial parameters
            model->store(0) = store_;
            out.best_epoch.assign(task_names_.size(), 0);
            for (std::size_t t = 0; t < task_names_.size(); ++t) {
                ParamStore scratch = store_;
                out.validation_auc.push_back(
                    auroc(score_dataset(model_, scratch, data_.validation[t], bundle_.vocabulary, t),
                          data_.validation[t].labels));
                out.test_auc.push_back(auroc(score_dataset(model_, scratch, data_.test[t], bundle_.vocabulary, t),
                                             data_.test[t].labels));
            }
        } else {
            model->store(0) = best_store_;
            out.best_epoch.assign(task_names_.size(), best_epoch_);
            out.validation_auc = best_val_auc_;
            out.test_auc = best_test_auc_;
        }
        out.model = std::move(model);
        return out;
    }

    std::string state() const override {
        json j = {{"kind", "joint"},
                  {"fold", fold_},
                  {"epoch", epoch_},
                  {"rng", rng_.save_state()},
                  {"store", param_store_to_json(store_)},
                  {"best_val_mean", best_val_mean_},
                  {"best_epoch", best_epoch_},
                  {"best_val_auc", best_val_auc_},
                  {"best_test_auc", best_test_auc_},
                  {"lines", lines_}};
        if (best_epoch_ > 0) j["best_store"] = param_store_to_json(best_store_);
        return j.dump();
    }

    void restore(const std::string& state) override {
        try {
            json j = json::parse(state);
            if (j.at("kind") != "joint" || j.at("fold").get<std::size_t>() != fold_) {
                raise(ErrorKind::Compatibility, "fold state does not match this fold");
            }
            epoch_ = j.at("epoch").get<std::size_t>();
            rng_.load_state(j.at("rng").get<std::string>());
            store_ = param_store_from_json(j.at("store"));
            best_val_mean_ = j.at("best_val_mean").get<double>();
            best_epoch_ = j.at("best_epoch").get<std::size_t>();
            best_val_auc_ = j.at("best_val_auc").get<std::vector<double>>();
            best_test_auc_ = j.at("best_test_auc").get<std::vector<double>>();
            lines_ = j.at("lines").get<std::vector<std::string>>();
            if (j.contains("best_store")) best_store_ = param_store_from_json(j.at("best_store"));
        } catch (const json::exception& e) {
            raise(ErrorKind::Parse, std::string("malformed fold state: ") + e.what());
        }
    }

private:
    const TaskBundle& bundle_;
    FoldData data_;
    TrainerConfig config_;
    std::size_t fold_;
    ModelConfig model_config_;
    MultiTaskModel model_;
    ParamStore store_;
    Rng rng_;
    std::vector<std::string> task_names_;
    std::size_t epoch_ = 0;

    double best_val_mean_ = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::vector<double> best_val_auc_, best_test_auc_;
    ParamStore best_store_;
    std::vector<std::string> lines_;
};

/// The -task-specific variant: each task trains its own single-task model on
/// its own dataset only, with per-task early selection.
class TaskSpecificFoldTrainer : public FoldTrainer {
public:
    TaskSpecificFoldTrainer(const TaskBundle& bundle, FoldData data, const TrainerConfig& config,
                            std::size_t fold)
        : bundle_(bundle),
          data_(std::move(data)),
          config_(config),
          fold_(fold),
          model_config_(config.model_config(bundle.vocabulary.size(), bundle.labeled.size())),
          model_(model_config_) {
        const std::size_t tasks = data_.train.size();
        for (std::size_t k = 0; k < tasks; ++k) {
            task_names_.push_back(data_.train[k].task_name);
            stores_.emplace_back();
            Rng init = Rng::derive(config_.seed, 77000 + fold_ * 131 + 13 * (k + 1));
            model_.register_params(stores_.back(), init);
            rngs_.push_back(Rng::derive(config_.seed, 88000 + fold_ * 131 + 13 * (k + 1)));
        }
        best_val_auc_.assign(tasks, -std::numeric_limits<double>::infinity());
        best_test_auc_.assign(tasks, 0.0);
        best_epoch_.assign(tasks, 0);
        best_stores_.resize(tasks);
    }

    std::size_t completed_epochs() const override { return epoch_; }
    bool done() const override { return epoch_ >= config_.epochs; }

    void run_epoch() override {
        if (done()) raise(ErrorKind::State, "fold already trained to the configured epochs");
        ++epoch_;
        for (std::size_t k = 0; k < task_names_.size(); ++k) {
            std::vector<const LabeledDataset*> one_task = {&data_.train[k]};
            EpochStats stats =
                train_epoch(model_, stores_[k], one_task, {}, bundle_.vocabulary, config_, rngs_[k]);
            std::vector<double> vs = score_dataset(model_, stores_[k], data_.validation[k], bundle_.vocabulary, 0);
            std::vector<double> ts = score_dataset(model_, stores_[k], data_.test[k], bundle_.vocabulary, 0);
            const double val = auroc(vs, data_.validation[k].labels);
            const double test = auroc(ts, data_.test[k].labels);
            lines_.push_back(metric_line(epoch_, fold_, task_names_[k], "train", stats.labeled_loss[0],
                                         stats.labeled_auroc[0]).dump());
            lines_.push_back(metric_line(epoch_, fold_, task_names_[k], "valid",
                                         bce_value(vs, data_.validation[k].labels), val).dump());
            lines_.push_back(metric_line(epoch_, fold_, task_names_[k], "test",
                                         bce_value(ts, data_.test[k].labels), test).dump());
            if (val > best_val_auc_[k]) {
                best_val_auc_[k] = val;
                best_test_auc_[k] = test;
                best_epoch_[k] = epoch_;
                best_stores_[k] = stores_[k];
            }
        }
    }

    FoldOutcome outcome() const override {
        FoldOutcome out;
        out.fold = fold_;
        out.metric_lines = lines_;
        auto model = std::make_shared<TrainedModel>(model_config_, task_names_);
        for (std::size_t k = 0; k < task_names_.size(); ++k) {
            if (best_epoch_[k] == 0) {
                model->store(k) = stores_[k];
                ParamStore scratch = stores_[k];
                out.validation_auc.push_back(
                    auroc(score_dataset(model_, scratch, data_.validation[k], bundle_.vocabulary, 0),
                          data_.validation[k].labels));
                out.test_auc.push_back(
                    auroc(score_dataset(model_, scratch, data_.test[k], bundle_.vocabulary, 0),
                          data_.test[k].labels));
            } else {
                model->store(k) = best_stores_[k];
                out.validation_auc.push_back(best_val_auc_[k]);
                out.test_auc.push_back(best_test_auc_[k]);
            }
            out.best_epoch.push_back(best_epoch_[k]);
        }
        out.model = std::move(model);
        return out;
    }

    std::string state() const override {
        json stores = json::array(), best = json::array();
        json rngs = json::array();
        for (std::size_t k = 0; k < stores_.size(); ++k) {
            stores.push_back(param_store_to_json(stores_[k]));
            best.push_back(best_epoch_[k] > 0 ? param_store_to_json(best_stores_[k]) : json());
            rngs.push_back(rngs_[k].save_state());
        }
        return json{{"kind", "per-task"}, {"fold", fold_},       {"epoch", epoch_},
                    {"rngs", rngs},       {"stores", stores},     {"best_stores", best},
                    {"best_val_auc", best_val_auc_},             {"best_test_auc", best_test_auc_},
                    {"best_epoch", best_epoch_},                 {"lines", lines_}}
            .dump();
    }

    void restore(const std::string& state) override {
        try {
            json j = json::parse(state);
            if (j.at("kind") != "per-task" || j.at("fold").get<std::size_t>() != fold_) {
                raise(ErrorKind::Compatibility, "fold state does not match this fold");
            }
            epoch_ = j.at("epoch").get<std::size_t>();
            for (std::size_t k = 0; k < stores_.size(); ++k) {
                rngs_[k].load_state(j.at("rngs")[k].get<std::string>());
                stores_[k] = param_store_from_json(j.at("stores")[k]);
                if (!j.at("best_stores")[k].is_null()) {
                    best_stores_[k] = param_store_from_json(j.at("best_stores")[k]);
                }
            }
            best_val_auc_ = j.at("best_val_auc").get<std::vector<double>>();
            best_test_auc_ = j.at("best_test_auc").get<std::vector<double>>();
            best_epoch_ = j.at("best_epoch").get<std::vector<std::size_t>>();
            lines_ = j.at("lines").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            raise(ErrorKind::Parse, std::string("malformed fold state: ") + e.what());
        }
    }

private:
    const TaskBundle& bundle_;
    FoldData data_;
    TrainerConfig config_;
    std::size_t fold_;
    ModelConfig model_config_;
    MultiTaskModel model_;
    std::vector<ParamStore> stores_;
    std::vector<Rng> rngs_;
    std::vector<std::string> task_names_;
    std::size_t epoch_ = 0;

    std::vector<double> best_val_auc_, best_test_auc_;
    std::vector<std::size_t> best_epoch_;
    std::vector<ParamStore> best_stores_;
    std::vector<std::string> lines_;
};

} // namespace

std::unique_ptr<FoldTrainer> make_fold_trainer(const TaskBundle& bundle, const FoldData& fold_data,
                                               const TrainerConfig& config, std::size_t fold_index) {
    if (config.variant == Variant::NoTaskSpecific) {
        return std::make_unique<TaskSpecificFoldTrainer>(bundle, fold_data, config, fold_index);
    }
    return std::make_unique<JointFoldTrainer>(bundle, fold_data, config, fold_index);
}

TrainOutcome train_bundle(const TaskBundle& bundle, const TrainerConfig& config) {
    config.validate();
    const std::vector<FoldData> folds = make_folds(bundle, config);
    std::vector<FoldOutcome> outcomes(folds.size());

    auto run_fold = [&](std::size_t f) {
        std::unique_ptr<FoldTrainer> trainer = make_fold_trainer(bundle, folds[f], config, f);
        while (!trainer->done()) trainer->run_epoch();
        outcomes[f] = trainer->outcome();
    };

    const std::size_t jobs = std::min<std::size_t>(config.jobs, folds.size());
    if (jobs <= 1) {
        for (std::size_t f = 0; f < folds.size(); ++f) run_fold(f);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t f = w; f < folds.size(); f += jobs) run_fold(f);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (std::thread& t : workers) t.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<std::string> task_names;
    for (const LabeledDataset& d : bundle.labeled) task_names.push_back(d.task_name);
    std::vector<std::vector<double>> per_fold;
    for (const FoldOutcome& out : outcomes) per_fold.push_back(out.test_auc);
    TrainOutcome result;
    result.eval = aggregate_eval(task_names, per_fold);
    result.folds = std::move(outcomes);
    return result;
}

} // namespace mvmt

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvmt/metrics.hpp"
#include "mvmt/model.hpp"

namespace mvmt {

struct TrainerConfig {
    std::size_t hidden_dim = 16;
    std::size_t epochs = 50;
    std::size_t labeled_batch = 16;    // n_s
    std::size_t unlabeled_batch = 256; // n_u
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;

    std::size_t folds = 5;
    bool single_split = false; // one stratified holdout instead of k-fold CV
    double validation_fraction = 0.1;
    double test_fraction = 0.2; // single-split mode only

    std::size_t kernel_width = 3;
    std::size_t projection_dim = 0; // 0 -> 2d
    double contrastive_temperature = 1.0;
    std::size_t jobs = 1; // fold-level parallelism

    void validate() const;
    ModelConfig model_config(std::size_t vocab_size, std::size_t num_tasks) const;
};

/// Sampling rates over the N+1 datasets: rate_k proportional to |D_k| / n_k.
std::vector<double> compute_sampling_rates(const std::vector<std::size_t>& dataset_sizes,
                                           const std::vector<std::size_t>& batch_sizes);

/// Draw a task index with the rates renormalized over still-alive tasks.
std::size_t sample_task(const std::vector<double>& rates, const std::vector<bool>& alive, Rng& rng);

struct EpochStats {
    std::vector<double> labeled_loss; // mean per-batch training loss per task
    std::vector<std::size_t> labeled_steps;
    std::vector<double> labeled_auroc; // over predictions accumulated during the epoch; NaN if one-class
    double unlabeled_loss = 0.0;       // mean per contrastive batch
    std::size_t unlabeled_steps = 0;
};

/// One pass of the alternating multi-task loop: sample a non-exhausted
/// dataset by rate, consume one batch without replacement, update with Adam,
/// until every dataset is exhausted.
EpochStats train_epoch(const MultiTaskModel& model, ParamStore& store,
                       const std::vector<const LabeledDataset*>& task_train_sets,
                       const std::vector<const PatientRecord*>& unlabeled_pool,
                       const CodeVocabulary& vocab, const TrainerConfig& config, Rng& rng);

struct EvalResult {
    std::vector<std::string> task_names;
    std::vector<std::vector<double>> fold_auc; // [task][fold]
    std::vector<double> mean_auc;              // per task over folds
    std::vector<double> std_auc;
    double overall_mean = 0.0;
};

EvalResult aggregate_eval(const std::vector<std::string>& task_names,
                          const std::vector<std::vector<double>>& per_fold_task_auc);

struct FoldOutcome {
    std::size_t fold = 0;
    std::vector<double> test_auc;          // per task, at the selected epoch
    std::vector<double> validation_auc;    // per task, at the selected epoch
    std::vector<std::size_t> best_epoch;   // per task (equal for jointly trained variants)
    std::shared_ptr<TrainedModel> model;   // best-validation snapshot
    std::vector<std::string> metric_lines; // one JSON object per line
};

struct TrainOutcome {
    EvalResult eval;
    std::vector<FoldOutcome> folds;
};

/// Incremental trainer for one fold so callers can checkpoint between epochs.
/// Both the jointly trained variants and the per-task -task-specific variant
/// run behind this interface.
class FoldTrainer {
public:
    virtual ~FoldTrainer() = default;
    virtual std::size_t completed_epochs() const = 0;
    virtual bool done() const = 0;
    virtual void run_epoch() = 0;
    virtual FoldOutcome outcome() const = 0;
    /// Serialized resumable state (parameters, Adam state, generator state,
    /// running best snapshot, metric lines) as a JSON string.
    virtual std::string state() const = 0;
    virtual void restore(const std::string& state) = 0;
};

struct FoldData {
    std::vector<LabeledDataset> train; // per task
    std::vector<LabeledDataset> validation;
    std::vector<LabeledDataset> test;
};

/// Assemble per-task splits for every fold: k-fold CV or a single stratified
/// holdout, depending on the config.
std::vector<FoldData> make_folds(const TaskBundle& bundle, const TrainerConfig& config);

std::unique_ptr<FoldTrainer> make_fold_trainer(const TaskBundle& bundle, const FoldData& fold_data,
                                               const TrainerConfig& config, std::size_t fold_index);

/// Full training run: splits, per-fold training with early selection on the
/// validation AU-ROC (labeled tasks only), aggregation over folds. Fold
/// training is independent and parallelized over `jobs` threads.
TrainOutcome train_bundle(const TaskBundle& bundle, const TrainerConfig& config);

/// Score every record of a dataset with one task head.
std::vector<double> score_dataset(const MultiTaskModel& model, ParamStore& store,
                                  const LabeledDataset& dataset, const CodeVocabulary& vocab,
                                  std::size_t network_task);

} // namespace mvmt

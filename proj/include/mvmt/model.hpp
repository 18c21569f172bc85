#pragma once

#include <utility>
#include <vector>

#include "mvmt/heads.hpp"

namespace mvmt {

/// The assembled network: shared multi-view encoder plus task heads, wired
/// according to the configured variant. The model is stateless; parameters
/// live in a ParamStore and every forward builds a fresh graph over them.
class MultiTaskModel {
public:
    explicit MultiTaskModel(ModelConfig config);

    const ModelConfig& config() const { return config_; }

    void register_params(ParamStore& store, Rng& rng) const;

    SharedRepresentation encode(const PatientRecord& record, const CodeVocabulary& vocab,
                                ParamStore& store) const;

    TaskOutput attend(const SharedRepresentation& shared, std::size_t task, ParamStore& store) const;
    TaskOutput attend_unlabeled(const SharedRepresentation& shared, ParamStore& store) const;

    ag::Var predict_from(const TaskOutput& output, std::size_t task, ParamStore& store) const;
    ag::Var predict(const PatientRecord& record, const CodeVocabulary& vocab, std::size_t task,
                    ParamStore& store) const;
    /// Forward pass without gradient bookkeeping; releases graph bindings.
    double predict_value(const PatientRecord& record, const CodeVocabulary& vocab, std::size_t task,
                         ParamStore& store) const;

    std::pair<ag::Var, ag::Var> project(const SharedRepresentation& shared, ParamStore& store) const;

    /// Mean BCE over one labeled batch.
    ag::Var labeled_batch_loss(const std::vector<const PatientRecord*>& records,
                               const std::vector<int>& labels, std::size_t task,
                               const CodeVocabulary& vocab, ParamStore& store) const;
    /// Cross-view contrastive loss over one unlabeled batch.
    ag::Var unlabeled_batch_loss(const std::vector<const PatientRecord*>& records,
                                 const CodeVocabulary& vocab, ParamStore& store) const;

private:
    ModelConfig config_;
};

/// A trained model ready for scoring and interpretation: the architecture
/// plus one parameter store (or one per task for the -task-specific variant,
/// whose tasks are independent single-task models).
class TrainedModel {
public:
    TrainedModel(ModelConfig config, std::vector<std::string> task_names);

    const ModelConfig& config() const { return config_; }
    const MultiTaskModel& network() const { return model_; }
    const std::vector<std::string>& task_names() const { return task_names_; }

    /// Fresh random initialization of every store.
    void init_params(Rng& rng);
    std::size_t task_index(const std::string& name) const;
    bool per_task_stores() const { return config_.shared_attention(); }

    std::size_t store_count() const { return stores_.size(); }
    ParamStore& store(std::size_t index) { return stores_[index]; }
    const ParamStore& store(std::size_t index) const { return stores_[index]; }
    ParamStore& store_for_task(std::size_t task);
    /// Task index passed to the network: 0 for per-task stores.
    std::size_t network_task(std::size_t task) const { return per_task_stores() ? 0 : task; }

    double predict_value(const PatientRecord& record, const CodeVocabulary& vocab, std::size_t task);

    /// One recorded forward pass: the prediction plus every attention weight
    /// exactly as it was computed.
    struct ExplainForward {
        double prediction = 0.0;
        Tensor feature_attention;          // beta-hat (empty without feature view)
        Tensor visit_attention;            // gamma-hat (empty without visit view)
        std::vector<Tensor> code_attention; // alpha-hat per visit
    };
    ExplainForward forward_explain(const PatientRecord& record, const CodeVocabulary& vocab,
                                   std::size_t task);

private:
    ModelConfig config_;
    MultiTaskModel model_;
    std::vector<std::string> task_names_;
    std::vector<ParamStore> stores_;
};

} // namespace mvmt

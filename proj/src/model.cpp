#include "mvmt/model.hpp"

#include "mvmt/errors.hpp"

namespace mvmt {

MultiTaskModel::MultiTaskModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
}

void MultiTaskModel::register_params(ParamStore& store, Rng& rng) const {
    register_encoder_params(store, config_.encoder, rng, config_.has_feature_view(),
                            config_.has_visit_view());
    register_head_params(store, config_, rng);
}

SharedRepresentation MultiTaskModel::encode(const PatientRecord& record, const CodeVocabulary& vocab,
                                            ParamStore& store) const {
    if (vocab.size() != config_.encoder.vocab_size) {
        raise(ErrorKind::Compatibility, "vocabulary size " + std::to_string(vocab.size()) +
                                            " does not match the model's " +
                                            std::to_string(config_.encoder.vocab_size));
    }
    SharedRepresentation shared;
    if (config_.has_feature_view()) {
        Tensor matrix = build_visit_matrix(record, vocab);
        shared.feature_view = encode_feature_view_fast(matrix, store, config_.encoder);
    } else {
        validate_record(record, vocab.size());
    }
    if (config_.has_visit_view()) {
        VisitViewOutput visit = encode_visit_view(record, store, config_.encoder);
        shared.visit_view = visit.visit_states;
        shared.patient_vector = visit.patient_vector;
        shared.code_attention = std::move(visit.code_attention);
    }
    return shared;
}

TaskOutput MultiTaskModel::attend(const SharedRepresentation& shared, std::size_t task,
                                  ParamStore& store) const {
    return task_attention(shared, head_prefix(config_, task), store, config_);
}

TaskOutput MultiTaskModel::attend_unlabeled(const SharedRepresentation& shared, ParamStore& store) const {
    if (!config_.has_unlabeled_head()) {
        raise(ErrorKind::TaskKind, "variant " + variant_name(config_.variant) + " has no unlabeled task");
    }
    return task_attention(shared, unlabeled_head_prefix(), store, config_);
}

ag::Var MultiTaskModel::predict_from(const TaskOutput& output, std::size_t task, ParamStore& store) const {
    return decode_labeled(output, head_prefix(config_, task), store, config_);
}

ag::Var MultiTaskModel::predict(const PatientRecord& record, const CodeVocabulary& vocab,
                                std::size_t task, ParamStore& store) const {
    SharedRepresentation shared = encode(record, vocab, store);
    TaskOutput output = attend(shared, task, store);
    return predict_from(output, task, store);
}

double MultiTaskModel::predict_value(const PatientRecord& record, const CodeVocabulary& vocab,
                                     std::size_t task, ParamStore& store) const {
    const double value = predict(record, vocab, task, store)->value[0];
    store.collect_gradients(); // no backward ran; this just releases bindings
    return value;
}

std::pair<ag::Var, ag::Var> MultiTaskModel::project(const SharedRepresentation& shared,
                                                    ParamStore& store) const {
    TaskOutput output = attend_unlabeled(shared, store);
    return project_unlabeled(output, store, config_);
}

ag::Var MultiTaskModel::labeled_batch_loss(const std::vector<const PatientRecord*>& records,
                                           const std::vector<int>& labels, std::size_t task,
                                           const CodeVocabulary& vocab, ParamStore& store) const {
    if (records.empty()) raise(ErrorKind::Domain, "empty labeled batch");
    std::vector<ag::Var> predictions;
    predictions.reserve(records.size());
    for (const PatientRecord* record : records) {
        predictions.push_back(predict(*record, vocab, task, store));
    }
    return ag::bce_loss(predictions, labels);
}

ag::Var MultiTaskModel::unlabeled_batch_loss(const std::vector<const PatientRecord*>& records,
                                             const CodeVocabulary& vocab, ParamStore& store) const {
    if (records.empty()) raise(ErrorKind::Domain, "empty unlabeled batch");
    std::vector<std::pair<ag::Var, ag::Var>> projections;
    projections.reserve(records.size());
    for (const PatientRecord* record : records) {
        SharedRepresentation shared = encode(*record, vocab, store);
        projections.push_back(project(shared, store));
    }
    // The raw pairwise loss grows with the anchor count while the labeled
    // objective is a batch mean; training uses the per-anchor mean so one
    // optimizer sees both objectives at the same scale. Gradient norms of the
    // raw sum run ~2B times a labeled batch's, which starves the shared
    // encoder under Adam's second-moment normalization.
    ag::Var raw = ag::contrastive_loss(projections, config_.contrastive_temperature);
    return ag::scale(raw, 1.0 / static_cast<double>(2 * projections.size()));
}

// --- TrainedModel -------------------------------------------------------------

TrainedModel::TrainedModel(ModelConfig config, std::vector<std::string> task_names)
    : config_(std::move(config)), model_(config_), task_names_(std::move(task_names)) {
    if (task_names_.empty()) raise(ErrorKind::Config, "trained model needs at least one task name");
    if (per_task_stores()) {
        if (config_.num_tasks != 1) {
            raise(ErrorKind::Config, "per-task models must be configured with a single task each");
        }
        stores_.resize(task_names_.size());
    } else {
        if (config_.num_tasks != task_names_.size()) {
            raise(ErrorKind::Config, "task name count does not match the configured task count");
        }
        stores_.resize(1);
    }
}

void TrainedModel::init_params(Rng& rng) {
    for (ParamStore& store : stores_) {
        store = ParamStore();
        model_.register_params(store, rng);
    }
}

std::size_t TrainedModel::task_index(const std::string& name) const {
    for (std::size_t i = 0; i < task_names_.size(); ++i) {
        if (task_names_[i] == name) return i;
    }
    raise(ErrorKind::Lookup, "unknown task: " + name);
}

ParamStore& TrainedModel::store_for_task(std::size_t task) {
    if (task >= task_names_.size()) raise(ErrorKind::Lookup, "task index out of range");
    return per_task_stores() ? stores_[task] : stores_[0];
}

double TrainedModel::predict_value(const PatientRecord& record, const CodeVocabulary& vocab,
                                   std::size_t task) {
    return model_.predict_value(record, vocab, network_task(task), store_for_task(task));
}

TrainedModel::ExplainForward TrainedModel::forward_explain(const PatientRecord& record,
                                                           const CodeVocabulary& vocab,
                                                           std::size_t task) {
    ParamStore& store = store_for_task(task);
    SharedRepresentation shared = model_.encode(record, vocab, store);
    TaskOutput out = model_.attend(shared, network_task(task), store);
    ag::Var prob = model_.predict_from(out, network_task(task), store);
    ExplainForward result;
    result.prediction = prob->value[0];
    if (out.feature_attention) result.feature_attention = out.feature_attention->value;
    if (out.visit_attention) result.visit_attention = out.visit_attention->value;
    for (const ag::Var& alpha : shared.code_attention) result.code_attention.push_back(alpha->value);
    store.collect_gradients();
    return result;
}

} // namespace mvmt

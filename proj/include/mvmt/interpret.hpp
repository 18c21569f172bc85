#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mvmt/model.hpp"

namespace mvmt {

/// Global per-task feature ranking from feature-view attention: per positive
/// patient the attention weights are rescaled by the number of distinct codes
/// in the record, then averaged per code over the positive patients whose
/// records contain that code.
struct FeatureImportanceTable {
    struct Row {
        std::size_t code_index = 0;
        std::string code_id;
        std::string code_label;
        double weight = 0.0;
        std::size_t support = 0; // positive patients containing the code
    };
    std::string task;
    std::vector<Row> rows; // descending weight, ties by vocabulary index
    std::size_t patients_used = 0;
    bool empty_warning = false; // no qualifying patients
};

/// Pure aggregation step, separated so it can be checked against hand-built
/// attention vectors: input is (beta-hat, distinct code indices present) per
/// patient.
FeatureImportanceTable aggregate_feature_importance(
    const std::vector<std::pair<Tensor, std::vector<std::size_t>>>& per_patient,
    const CodeVocabulary& vocab, std::size_t top_k);

FeatureImportanceTable rank_features(TrainedModel& model, const LabeledDataset& dataset,
                                     const CodeVocabulary& vocab, std::size_t task,
                                     bool positive_only = true, std::size_t top_k = 10);

struct CaseStudyReport {
    struct VisitEntry {
        std::size_t visit_index = 0;
        double weight = 0.0;
    };
    struct FeatureEntry {
        std::size_t code_index = 0;
        std::string code_id;
        std::string code_label;
        double weight = 0.0;
    };
    struct AblationEntry {
        std::string description;
        double prediction = 0.0;
    };
    std::string patient_id;
    std::string task;
    double baseline_prediction = 0.0;
    std::vector<VisitEntry> top_visits;     // by gamma-hat, descending
    std::vector<FeatureEntry> top_features; // by beta-hat among codes in the record
    std::vector<AblationEntry> ablations;
};

CaseStudyReport explain_patient(TrainedModel& model, const PatientRecord& record,
                                const CodeVocabulary& vocab, std::size_t task, std::size_t top_k);

/// One removal set: whole visits by index and/or codes (by identifier)
/// removed from every visit. Visits emptied by code removal are dropped;
/// timestamps of the remaining visits are unchanged.
struct RemovalSpec {
    std::vector<std::size_t> visit_indices;
    std::vector<std::string> code_ids;
    std::string description() const;
};

PatientRecord apply_removal(const PatientRecord& record, const CodeVocabulary& vocab,
                            const RemovalSpec& removal);

/// Re-encode the modified record and report the new prediction per removal
/// set, mirroring the remove-and-repredict case-study procedure.
std::vector<double> ablate_and_repredict(TrainedModel& model, const PatientRecord& record,
                                         const CodeVocabulary& vocab, std::size_t task,
                                         const std::vector<RemovalSpec>& removals);

// report emitters
std::string importance_to_csv(const FeatureImportanceTable& table);
nlohmann::json importance_to_json(const FeatureImportanceTable& table);
nlohmann::json case_study_to_json(const CaseStudyReport& report);
std::string case_study_to_text(const CaseStudyReport& report);

} // namespace mvmt

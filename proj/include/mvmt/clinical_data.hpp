#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvmt/rng.hpp"
#include "mvmt/tensor.hpp"

namespace mvmt {

enum class CodeCategory { Diagnosis, Procedure, Medication };

const char* category_name(CodeCategory category);
CodeCategory category_from_name(const std::string& name);

/// Global set of clinical codes with stable integer indices.
class CodeVocabulary {
public:
    struct Code {
        std::string id;
        CodeCategory category;
        std::string label; // human-readable; falls back to the id when empty
    };

    std::size_t add(std::string id, CodeCategory category, std::string label = "");
    std::size_t size() const { return codes_.size(); }
    const Code& code(std::size_t index) const;
    std::optional<std::size_t> find(const std::string& id) const;
    std::uint64_t content_hash() const;

private:
    std::vector<Code> codes_;
    std::map<std::string, std::size_t> index_;
};

/// One hospital encounter: a duplicate-free set of code indices plus a day
/// offset from the patient's first visit.
struct Visit {
    std::vector<std::size_t> code_indices;
    long timestamp_days = 0;
};

struct Demographics {
    static constexpr std::size_t kAgeGroups = 3;
    static constexpr std::size_t kRegions = 5;
    static constexpr std::size_t kDim = kAgeGroups + kRegions;

    int age_group = 0; // 0..2
    int region = 0;    // 0..4

    Tensor one_hot() const;
};

struct PatientRecord {
    std::string id;
    Demographics demographics;
    std::vector<Visit> visits; // time-ordered, non-empty
};

/// Throws on any violated record invariant (empty visits, out-of-vocabulary
/// codes, duplicate codes within a visit, decreasing timestamps, bad
/// demographics).
void validate_record(const PatientRecord& record, std::size_t vocab_size);

struct LabeledDataset {
    std::string task_name;
    std::vector<PatientRecord> records;
    std::vector<int> labels;

    std::size_t size() const { return records.size(); }
    std::size_t positive_count() const;
};

struct ComplicationInfo {
    std::string name;
    std::string icd_codes;
};

/// The default task metadata used by the synthetic generator: six cardiac
/// complications with their ICD-10 groups.
const std::vector<ComplicationInfo>& default_complications();

struct TaskBundle {
    CodeVocabulary vocabulary;
    std::vector<LabeledDataset> labeled;
    std::vector<PatientRecord> unlabeled;
    std::vector<ComplicationInfo> metadata;
};

void validate_bundle(const TaskBundle& bundle);

/// T x |C| binary matrix: row j marks the codes of visit j.
Tensor build_visit_matrix(const PatientRecord& record, const CodeVocabulary& vocab);

struct SyntheticSpec {
    std::size_t vocabulary_size = 40;
    std::size_t num_patients_per_task = 400;
    double positive_rate = 0.2;
    double negative_to_positive_ratio = 3.0; // negatives per positive
    std::pair<std::size_t, std::size_t> visit_count_range = {3, 8};
    std::pair<std::size_t, std::size_t> codes_per_visit_range = {2, 5};
    std::vector<std::vector<std::size_t>> planted_risk_codes; // one list per task
    std::uint64_t seed = 0;

    // logistic label mechanism: score = signal_strength * (# planted-code
    // occurrences) + recency_weight * [planted code within last two visits]
    // + consecutive_weight * [planted code in two adjacent visits]
    // + per-task bias calibrated to hit positive_rate
    double signal_strength = 1.25;
    double recency_weight = 0.0;
    double consecutive_weight = 0.0;
};

class SyntheticGenerator {
public:
    explicit SyntheticGenerator(SyntheticSpec spec);

    const CodeVocabulary& vocabulary() const { return vocab_; }
    std::size_t task_count() const { return spec_.planted_risk_codes.size(); }

    TaskBundle generate() const;

    PatientRecord sample_record(Rng& rng, std::string id) const;
    double raw_score(const PatientRecord& record, std::size_t task) const;
    double label_probability(const PatientRecord& record, std::size_t task, double bias) const;
    /// Bias that brings the marginal positive rate to spec.positive_rate,
    /// solved by bisection over a fixed probe sample.
    double calibrate_bias(std::size_t task) const;

private:
    SyntheticSpec spec_;
    CodeVocabulary vocab_;
};

TaskBundle generate_synthetic_bundle(const SyntheticSpec& spec);

/// Bundle directory layout: vocab.json, meta.json, task_<name>.jsonl,
/// unlabeled.jsonl. UTF-8, line-delimited records, integer code indices.
void save_bundle(const TaskBundle& bundle, const std::filesystem::path& dir);
TaskBundle load_bundle(const std::filesystem::path& dir);

struct FoldSplit {
    LabeledDataset train;
    LabeledDataset validation;
    LabeledDataset test;
};

/// Stratified k-fold split with a validation slice carved from each training
/// portion. Folds are disjoint, cover the dataset, and keep each test fold's
/// positive count within one record of the global rate.
std::vector<FoldSplit> kfold_split(const LabeledDataset& dataset, std::size_t folds,
                                   double validation_fraction, std::uint64_t seed);

/// Single holdout split with the same stratification rules.
FoldSplit single_split(const LabeledDataset& dataset, double test_fraction,
                       double validation_fraction, std::uint64_t seed);

} // namespace mvmt

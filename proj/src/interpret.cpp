#include "mvmt/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mvmt/errors.hpp"

namespace mvmt {

using nlohmann::json;

FeatureImportanceTable aggregate_feature_importance(
    const std::vector<std::pair<Tensor, std::vector<std::size_t>>>& per_patient,
    const CodeVocabulary& vocab, std::size_t top_k) {
    FeatureImportanceTable table;
    table.patients_used = per_patient.size();
    if (per_patient.empty()) {
        table.empty_warning = true;
        return table;
    }
    std::vector<double> weight_sum(vocab.size(), 0.0);
    std::vector<std::size_t> support(vocab.size(), 0);
    for (const auto& [beta, present] : per_patient) {
        if (beta.size() != vocab.size()) {
            raise(ErrorKind::Dimension, "attention vector does not match vocabulary size");
        }
        const double rescale = static_cast<double>(present.size());
        for (std::size_t code : present) {
            weight_sum[code] += beta[code] * rescale;
            support[code] += 1;
        }
    }
    for (std::size_t code = 0; code < vocab.size(); ++code) {
        if (support[code] == 0) continue; // never appears in a qualifying record
        FeatureImportanceTable::Row row;
        row.code_index = code;
        row.code_id = vocab.code(code).id;
        row.code_label = vocab.code(code).label;
        row.weight = weight_sum[code] / static_cast<double>(support[code]);
        row.support = support[code];
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.code_index < b.code_index;
    });
    if (top_k > 0 && table.rows.size() > top_k) table.rows.resize(top_k);
    return table;
}

namespace {

std::vector<std::size_t> distinct_codes(const PatientRecord& record) {
    std::set<std::size_t> codes;
    for (const Visit& visit : record.visits) codes.insert(visit.code_indices.begin(), visit.code_indices.end());
    return {codes.begin(), codes.end()};
}

} // namespace

FeatureImportanceTable rank_features(TrainedModel& model, const LabeledDataset& dataset,
                                     const CodeVocabulary& vocab, std::size_t task,
                                     bool positive_only, std::size_t top_k) {
    if (!model.config().has_feature_view()) {
        raise(ErrorKind::TaskKind, "feature ranking needs the feature-view encoder");
    }
    std::vector<std::pair<Tensor, std::vector<std::size_t>>> per_patient;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (positive_only && dataset.labels[i] != 1) continue;
        TrainedModel::ExplainForward fwd = model.forward_explain(dataset.records[i], vocab, task);
        per_patient.emplace_back(std::move(fwd.feature_attention), distinct_codes(dataset.records[i]));
    }
    FeatureImportanceTable table = aggregate_feature_importance(per_patient, vocab, top_k);
    table.task = task < model.task_names().size() ? model.task_names()[task] : dataset.task_name;
    return table;
}

CaseStudyReport explain_patient(TrainedModel& model, const PatientRecord& record,
                                const CodeVocabulary& vocab, std::size_t task, std::size_t top_k) {
    CaseStudyReport report;
    report.patient_id = record.id;
    report.task = model.task_names().at(task);
    TrainedModel::ExplainForward fwd = model.forward_explain(record, vocab, task);
    report.baseline_prediction = fwd.prediction;

    if (fwd.visit_attention.size() > 0) {
        std::vector<std::size_t> order(fwd.visit_attention.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (fwd.visit_attention[a] != fwd.visit_attention[b]) {
                return fwd.visit_attention[a] > fwd.visit_attention[b];
            }
            return a < b;
        });
        const std::size_t take = std::min<std::size_t>(top_k, order.size());
        for (std::size_t i = 0; i < take; ++i) {
            report.top_visits.push_back({order[i], fwd.visit_attention[order[i]]});
        }
    }

    if (fwd.feature_attention.size() > 0) {
        std::vector<std::size_t> present = distinct_codes(record);
        std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
            if (fwd.feature_attention[a] != fwd.feature_attention[b]) {
                return fwd.feature_attention[a] > fwd.feature_attention[b];
            }
            return a < b;
        });
        const std::size_t take = std::min<std::size_t>(top_k, present.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t code = present[i];
            report.top_features.push_back(
                {code, vocab.code(code).id, vocab.code(code).label, fwd.feature_attention[code]});
        }
    }
    return report;
}

std::string RemovalSpec::description() const {
    std::ostringstream os;
    if (visit_indices.empty() && code_ids.empty()) return "baseline (no removal)";
    if (!visit_indices.empty()) {
        os << "visits";
        for (std::size_t i = 0; i < visit_indices.size(); ++i) os << (i ? "," : "=") << visit_indices[i];
    }
    if (!code_ids.empty()) {
        if (!visit_indices.empty()) os << " ";
        os << "codes";
        for (std::size_t i = 0; i < code_ids.size(); ++i) os << (i ? "," : "=") << code_ids[i];
    }
    return os.str();
}

PatientRecord apply_removal(const PatientRecord& record, const CodeVocabulary& vocab,
                            const RemovalSpec& removal) {
    std::set<std::size_t> drop_visits;
    for (std::size_t v : removal.visit_indices) {
        if (v >= record.visits.size()) {
            raise(ErrorKind::Lookup, "removal names visit " + std::to_string(v) + " but the record has " +
                                         std::to_string(record.visits.size()) + " visits");
        }
        drop_visits.insert(v);
    }
    std::set<std::size_t> drop_codes;
    for (const std::string& id : removal.code_ids) {
        auto index = vocab.find(id);
        if (!index) raise(ErrorKind::Vocabulary, "removal names unknown code " + id);
        drop_codes.insert(*index);
    }
    PatientRecord out;
    out.id = record.id;
    out.demographics = record.demographics;
    for (std::size_t j = 0; j < record.visits.size(); ++j) {
        if (drop_visits.count(j)) continue;
        Visit visit;
        visit.timestamp_days = record.visits[j].timestamp_days;
        for (std::size_t code : record.visits[j].code_indices) {
            if (!drop_codes.count(code)) visit.code_indices.push_back(code);
        }
        if (!visit.code_indices.empty()) out.visits.push_back(std::move(visit));
    }
    if (out.visits.empty()) {
        raise(ErrorKind::DegenerateRecord, "removal leaves record " + record.id + " with no visits");
    }
    return out;
}

std::vector<double> ablate_and_repredict(TrainedModel& model, const PatientRecord& record,
                                         const CodeVocabulary& vocab, std::size_t task,
                                         const std::vector<RemovalSpec>& removals) {
    std::vector<double> predictions;
    predictions.reserve(removals.size());
    for (const RemovalSpec& removal : removals) {
        if (removal.visit_indices.empty() && removal.code_ids.empty()) {
            predictions.push_back(model.predict_value(record, vocab, task));
            continue;
        }
        PatientRecord modified = apply_removal(record, vocab, removal);
        predictions.push_back(model.predict_value(modified, vocab, task));
    }
    return predictions;
}

std::string importance_to_csv(const FeatureImportanceTable& table) {
    std::ostringstream os;
    os << "task,rank,code,label,weight\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        os << table.task << "," << (i + 1) << "," << row.code_id << "," << row.code_label << ","
           << row.weight << "\n";
    }
    return os.str();
}

json importance_to_json(const FeatureImportanceTable& table) {
    json rows = json::array();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        rows.push_back({{"rank", i + 1},
                        {"code", row.code_id},
                        {"label", row.code_label},
                        {"weight", row.weight},
                        {"support", row.support}});
    }
    return {{"task", table.task},
            {"patients_used", table.patients_used},
            {"empty", table.empty_warning},
            {"rows", rows},
            {"metadata",
             {{"rescaling", "attention weights multiplied by the count of distinct codes in the record"},
              {"averaging", "per code, over qualifying patients whose records contain the code"}}}};
}

json case_study_to_json(const CaseStudyReport& report) {
    json visits = json::array();
    for (const auto& v : report.top_visits) visits.push_back({{"visit", v.visit_index}, {"weight", v.weight}});
    json features = json::array();
    for (const auto& f : report.top_features) {
        features.push_back({{"code", f.code_id}, {"label", f.code_label}, {"weight", f.weight}});
    }
    json ablations = json::array();
    for (const auto& a : report.ablations) {
        ablations.push_back({{"removal", a.description}, {"prediction", a.prediction}});
    }
    return {{"patient", report.patient_id},
            {"task", report.task},
            {"baseline_prediction", report.baseline_prediction},
            {"top_visits", visits},
            {"top_features", features},
            {"ablations", ablations}};
}

std::string case_study_to_text(const CaseStudyReport& report) {
    std::ostringstream os;
    os << "patient " << report.patient_id << "  task " << report.task << "  p(onset) = "
       << report.baseline_prediction << "\n";
    os << "Visits  ";
    for (const auto& v : report.top_visits) {
        os << "Visit " << v.visit_index << " (" << v.weight << ")  ";
    }
    os << "\nFeatures  ";
    for (const auto& f : report.top_features) {
        os << f.code_id << " (" << f.weight << ")  ";
    }
    os << "\n";
    for (const auto& a : report.ablations) {
        os << "after removing " << a.description << ": " << a.prediction << "\n";
    }
    return os.str();
}

} // namespace mvmt

#include "mvmt/clinical_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mvmt/errors.hpp"

namespace mvmt {

using nlohmann::json;

const char* category_name(CodeCategory category) {
    switch (category) {
        case CodeCategory::Diagnosis: return "diagnosis";
        case CodeCategory::Procedure: return "procedure";
        case CodeCategory::Medication: return "medication";
    }
    return "diagnosis";
}

CodeCategory category_from_name(const std::string& name) {
    if (name == "diagnosis") return CodeCategory::Diagnosis;
    if (name == "procedure") return CodeCategory::Procedure;
    if (name == "medication") return CodeCategory::Medication;
    raise(ErrorKind::Parse, "unknown code category: " + name);
}

std::size_t CodeVocabulary::add(std::string id, CodeCategory category, std::string label) {
    if (index_.count(id)) raise(ErrorKind::Vocabulary, "duplicate code identifier: " + id);
    if (label.empty()) label = id;
    const std::size_t at = codes_.size();
    index_.emplace(id, at);
    codes_.push_back({std::move(id), category, std::move(label)});
    return at;
}

const CodeVocabulary::Code& CodeVocabulary::code(std::size_t index) const {
    if (index >= codes_.size()) {
        raise(ErrorKind::Vocabulary, "code index " + std::to_string(index) + " out of range (|C| = " +
                                         std::to_string(codes_.size()) + ")");
    }
    return codes_[index];
}

std::optional<std::size_t> CodeVocabulary::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t CodeVocabulary::content_hash() const {
    // FNV-1a over ids and categories, order-sensitive
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0x1f;
        h *= 1099511628211ULL;
    };
    for (const Code& code : codes_) {
        mix(code.id);
        mix(category_name(code.category));
    }
    return h;
}

Tensor Demographics::one_hot() const {
    Tensor out({kDim});
    out[static_cast<std::size_t>(age_group)] = 1.0;
    out[kAgeGroups + static_cast<std::size_t>(region)] = 1.0;
    return out;
}

void validate_record(const PatientRecord& record, std::size_t vocab_size) {
    if (record.visits.empty()) {
        raise(ErrorKind::Domain, "record " + record.id + " must contain at least one visit");
    }
    if (record.demographics.age_group < 0 || record.demographics.age_group >= static_cast<int>(Demographics::kAgeGroups)) {
        raise(ErrorKind::Domain, "record " + record.id + " has invalid age group");
    }
    if (record.demographics.region < 0 || record.demographics.region >= static_cast<int>(Demographics::kRegions)) {
        raise(ErrorKind::Domain, "record " + record.id + " has invalid region");
    }
    long previous = std::numeric_limits<long>::min();
    for (const Visit& visit : record.visits) {
        if (visit.code_indices.empty()) {
            raise(ErrorKind::Domain, "record " + record.id + " has an empty visit");
        }
        if (visit.timestamp_days < previous) {
            raise(ErrorKind::Ordering, "record " + record.id + " has decreasing visit timestamps");
        }
        previous = visit.timestamp_days;
        std::vector<std::size_t> sorted = visit.code_indices;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i] >= vocab_size) {
                raise(ErrorKind::Vocabulary, "record " + record.id + " refers to code index " +
                                                 std::to_string(sorted[i]) + " outside vocabulary of size " +
                                                 std::to_string(vocab_size));
            }
            if (i > 0 && sorted[i] == sorted[i - 1]) {
                raise(ErrorKind::Domain, "record " + record.id + " repeats code " + std::to_string(sorted[i]) +
                                             " within one visit");
            }
        }
    }
}

std::size_t LabeledDataset::positive_count() const {
    std::size_t n = 0;
    for (int label : labels) n += label == 1 ? 1 : 0;
    return n;
}

const std::vector<ComplicationInfo>& default_complications() {
    static const std::vector<ComplicationInfo> kTasks = {
        {"atrial_fibrillation", "I48"},
        {"coronary_artery_disease", "I20-I25"},
        {"heart_failure", "I11, I13, I42, I50"},
        {"hypertension", "I10, I16"},
        {"peripheral_arterial_disease", "I70"},
        {"stroke", "I60-I69"},
    };
    return kTasks;
}

void validate_bundle(const TaskBundle& bundle) {
    if (bundle.vocabulary.size() == 0) raise(ErrorKind::Vocabulary, "bundle has an empty vocabulary");
    if (bundle.labeled.empty()) raise(ErrorKind::Domain, "bundle must contain at least one labeled dataset");
    std::map<std::string, int> seen;
    for (const LabeledDataset& dataset : bundle.labeled) {
        if (seen[dataset.task_name]++) raise(ErrorKind::Domain, "duplicate task name: " + dataset.task_name);
        if (dataset.records.size() != dataset.labels.size()) {
            raise(ErrorKind::Domain, "task " + dataset.task_name + ": label count does not match record count");
        }
        for (int label : dataset.labels) {
            if (label != 0 && label != 1) raise(ErrorKind::Domain, "task " + dataset.task_name + ": labels must be 0/1");
        }
        for (const PatientRecord& record : dataset.records) validate_record(record, bundle.vocabulary.size());
    }
    for (const PatientRecord& record : bundle.unlabeled) validate_record(record, bundle.vocabulary.size());
}

Tensor build_visit_matrix(const PatientRecord& record, const CodeVocabulary& vocab) {
    validate_record(record, vocab.size());
    Tensor out({record.visits.size(), vocab.size()});
    for (std::size_t j = 0; j < record.visits.size(); ++j) {
        for (std::size_t idx : record.visits[j].code_indices) out.at(j, idx) = 1.0;
    }
    return out;
}

// --- synthetic generation ----------------------------------------------------

SyntheticGenerator::SyntheticGenerator(SyntheticSpec spec) : spec_(std::move(spec)) {
    if (spec_.vocabulary_size == 0) raise(ErrorKind::Spec, "vocabularySize must be positive");
    if (spec_.planted_risk_codes.empty()) raise(ErrorKind::Spec, "at least one task (planted code list) required");
    if (spec_.num_patients_per_task == 0) raise(ErrorKind::Spec, "numPatientsPerTask must be positive");
    if (!(spec_.positive_rate > 0.0 && spec_.positive_rate < 1.0)) {
        raise(ErrorKind::Spec, "positiveRate must lie strictly between 0 and 1");
    }
    if (spec_.negative_to_positive_ratio <= 0.0) raise(ErrorKind::Spec, "negativeToPositiveRatio must be positive");
    auto check_range = [](std::pair<std::size_t, std::size_t> r, const char* what) {
        if (r.first == 0 || r.first > r.second) {
            raise(ErrorKind::Spec, std::string(what) + " range must satisfy 1 <= lo <= hi");
        }
    };
    check_range(spec_.visit_count_range, "visit count");
    check_range(spec_.codes_per_visit_range, "codes per visit");
    if (spec_.codes_per_visit_range.second > spec_.vocabulary_size) {
        raise(ErrorKind::Spec, "codesPerVisit upper bound exceeds vocabularySize");
    }
    for (const auto& planted : spec_.planted_risk_codes) {
        for (std::size_t idx : planted) {
            if (idx >= spec_.vocabulary_size) {
                raise(ErrorKind::Spec, "planted risk code " + std::to_string(idx) + " outside vocabulary");
            }
        }
    }
    for (std::size_t i = 0; i < spec_.vocabulary_size; ++i) {
        static const CodeCategory kCycle[3] = {CodeCategory::Diagnosis, CodeCategory::Procedure,
                                               CodeCategory::Medication};
        static const char kPrefix[3] = {'D', 'P', 'M'};
        std::ostringstream id;
        id << kPrefix[i % 3] << std::setw(4) << std::setfill('0') << i;
        vocab_.add(id.str(), kCycle[i % 3]);
    }
}

PatientRecord SyntheticGenerator::sample_record(Rng& rng, std::string id) const {
    PatientRecord record;
    record.id = std::move(id);
    record.demographics.age_group = static_cast<int>(rng.uniform_index(Demographics::kAgeGroups));
    record.demographics.region = static_cast<int>(rng.uniform_index(Demographics::kRegions));
    const std::size_t visit_count = static_cast<std::size_t>(
        rng.uniform_int(static_cast<long>(spec_.visit_count_range.first),
                        static_cast<long>(spec_.visit_count_range.second)));
    long day = 0;
    record.visits.reserve(visit_count);
    for (std::size_t j = 0; j < visit_count; ++j) {
        Visit visit;
        visit.timestamp_days = day;
        day += rng.uniform_int(1, 30);
        const std::size_t codes = static_cast<std::size_t>(
            rng.uniform_int(static_cast<long>(spec_.codes_per_visit_range.first),
                            static_cast<long>(spec_.codes_per_visit_range.second)));
        visit.code_indices = rng.sample_without_replacement(spec_.vocabulary_size, codes);
        record.visits.push_back(std::move(visit));
    }
    return record;
}

double SyntheticGenerator::raw_score(const PatientRecord& record, std::size_t task) const {
    const auto& planted = spec_.planted_risk_codes.at(task);
    double count = 0.0;
    bool recent = false;
    bool consecutive = false;
    bool previous_hit = false;
    const std::size_t first_recent = record.visits.size() > 2 ? record.visits.size() - 2 : 0;
    for (std::size_t j = 0; j < record.visits.size(); ++j) {
        bool hit = false;
        for (std::size_t idx : record.visits[j].code_indices) {
            if (std::find(planted.begin(), planted.end(), idx) != planted.end()) {
                count += 1.0;
                hit = true;
                if (j >= first_recent) recent = true;
            }
        }
        if (hit && previous_hit) consecutive = true;
        previous_hit = hit;
    }
    return spec_.signal_strength * count + (recent ? spec_.recency_weight : 0.0) +
           (consecutive ? spec_.consecutive_weight : 0.0);
}

double SyntheticGenerator::label_probability(const PatientRecord& record, std::size_t task,
                                             double bias) const {
    return 1.0 / (1.0 + std::exp(-(raw_score(record, task) + bias)));
}

double SyntheticGenerator::calibrate_bias(std::size_t task) const {
    // fixed probe sample; bisection on the mean predicted rate over cached scores
    const std::size_t probe_size =
        std::clamp<std::size_t>(10 * spec_.num_patients_per_task, 500, 4000);
    Rng rng = Rng::derive(spec_.seed, 900000 + task);
    std::vector<double> scores;
    scores.reserve(probe_size);
    for (std::size_t i = 0; i < probe_size; ++i) {
        scores.push_back(raw_score(sample_record(rng, "probe"), task));
    }
    auto mean_rate = [&](double bias) {
        double total = 0.0;
        for (double s : scores) total += 1.0 / (1.0 + std::exp(-(s + bias)));
        return total / static_cast<double>(probe_size);
    };
    double lo = -30.0, hi = 30.0;
    for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mean_rate(mid) < spec_.positive_rate) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

TaskBundle SyntheticGenerator::generate() const {
    TaskBundle bundle;
    bundle.vocabulary = vocab_;
    const auto& defaults = default_complications();
    std::size_t unlabeled_counter = 0;
    for (std::size_t task = 0; task < task_count(); ++task) {
        ComplicationInfo info;
        if (task < defaults.size()) {
            info = defaults[task];
        } else {
            info.name = "task_" + std::to_string(task + 1);
            info.icd_codes = "synthetic";
        }
        bundle.metadata.push_back(info);

        const double bias = calibrate_bias(task);
        const double ratio = spec_.negative_to_positive_ratio;
        const std::size_t want_pos = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(spec_.num_patients_per_task) / (1.0 + ratio))));
        const std::size_t want_neg = spec_.num_patients_per_task - want_pos;

        LabeledDataset dataset;
        dataset.task_name = info.name;
        Rng rng = Rng::derive(spec_.seed, task);
        std::size_t have_pos = 0, have_neg = 0, attempts = 0;
        const std::size_t max_attempts = 400 * spec_.num_patients_per_task + 4000;
        std::size_t patient_counter = 0;
        while (have_pos < want_pos || have_neg < want_neg) {
            if (++attempts > max_attempts) {
                raise(ErrorKind::Spec, "synthetic spec infeasible: could not reach the requested "
                                       "positive/negative quotas for task " + info.name);
            }
            std::ostringstream id;
            id << "t" << task << "-p" << std::setw(6) << std::setfill('0') << patient_counter++;
            PatientRecord record = sample_record(rng, id.str());
            const int label = rng.bernoulli(label_probability(record, task, bias)) ? 1 : 0;
            if (label == 1 && have_pos < want_pos) {
                dataset.records.push_back(std::move(record));
                dataset.labels.push_back(1);
                ++have_pos;
            } else if (label == 0 && have_neg < want_neg) {
                dataset.records.push_back(std::move(record));
                dataset.labels.push_back(0);
                ++have_neg;
            }
        }
        bundle.labeled.push_back(std::move(dataset));
    }
    // unlabeled pool: an unfiltered sample from the same visit-structure
    // distribution, one task's worth of patients per labeled task
    Rng pool_rng = Rng::derive(spec_.seed, 500000);
    const std::size_t pool_size = spec_.num_patients_per_task * task_count();
    for (std::size_t i = 0; i < pool_size; ++i) {
        std::ostringstream uid;
        uid << "u-p" << std::setw(6) << std::setfill('0') << unlabeled_counter++;
        bundle.unlabeled.push_back(sample_record(pool_rng, uid.str()));
    }
    validate_bundle(bundle);
    return bundle;
}

TaskBundle generate_synthetic_bundle(const SyntheticSpec& spec) {
    return SyntheticGenerator(spec).generate();
}

// --- bundle files ------------------------------------------------------------

namespace {

json record_to_json(const PatientRecord& record) {
    json visits = json::array();
    for (const Visit& visit : record.visits) {
        visits.push_back({{"t", visit.timestamp_days}, {"codes", visit.code_indices}});
    }
    return json{{"id", record.id},
                {"demo", {{"age_group", record.demographics.age_group}, {"region", record.demographics.region}}},
                {"visits", visits}};
}

PatientRecord record_from_json(const json& j, const std::string& where) {
    PatientRecord record;
    try {
        record.id = j.at("id").get<std::string>();
        const json& demo = j.at("demo");
        record.demographics.age_group = demo.at("age_group").get<int>();
        record.demographics.region = demo.at("region").get<int>();
        for (const json& jv : j.at("visits")) {
            Visit visit;
            visit.timestamp_days = jv.at("t").get<long>();
            for (const json& code : jv.at("codes")) visit.code_indices.push_back(code.get<std::size_t>());
            record.visits.push_back(std::move(visit));
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, where + ": " + e.what());
    }
    return record;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

} // namespace

void save_bundle(const TaskBundle& bundle, const std::filesystem::path& dir) {
    validate_bundle(bundle);
    std::filesystem::create_directories(dir);

    json vocab = json::array();
    for (std::size_t i = 0; i < bundle.vocabulary.size(); ++i) {
        const auto& code = bundle.vocabulary.code(i);
        vocab.push_back({{"id", code.id}, {"category", category_name(code.category)}, {"label", code.label}});
    }
    write_text(dir / "vocab.json", json{{"codes", vocab}}.dump(2) + "\n");

    json tasks = json::array();
    for (std::size_t t = 0; t < bundle.labeled.size(); ++t) {
        const ComplicationInfo& info =
            t < bundle.metadata.size() ? bundle.metadata[t] : ComplicationInfo{bundle.labeled[t].task_name, ""};
        tasks.push_back({{"name", bundle.labeled[t].task_name}, {"icd_codes", info.icd_codes}});
    }
    write_text(dir / "meta.json", json{{"tasks", tasks}}.dump(2) + "\n");

    for (const LabeledDataset& dataset : bundle.labeled) {
        std::ostringstream lines;
        for (std::size_t i = 0; i < dataset.records.size(); ++i) {
            json j = record_to_json(dataset.records[i]);
            j["label"] = dataset.labels[i];
            lines << j.dump() << "\n";
        }
        write_text(dir / ("task_" + dataset.task_name + ".jsonl"), lines.str());
    }

    std::ostringstream lines;
    for (const PatientRecord& record : bundle.unlabeled) lines << record_to_json(record).dump() << "\n";
    write_text(dir / "unlabeled.jsonl", lines.str());
}

TaskBundle load_bundle(const std::filesystem::path& dir) {
    TaskBundle bundle;
    json vocab = parse_json_file(dir / "vocab.json");
    try {
        for (const json& entry : vocab.at("codes")) {
            bundle.vocabulary.add(entry.at("id").get<std::string>(),
                                  category_from_name(entry.at("category").get<std::string>()),
                                  entry.value("label", ""));
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, (dir / "vocab.json").string() + ": " + e.what());
    }

    json meta = parse_json_file(dir / "meta.json");
    std::vector<std::string> task_names;
    try {
        for (const json& entry : meta.at("tasks")) {
            ComplicationInfo info;
            info.name = entry.at("name").get<std::string>();
            info.icd_codes = entry.value("icd_codes", "");
            task_names.push_back(info.name);
            bundle.metadata.push_back(std::move(info));
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, (dir / "meta.json").string() + ": " + e.what());
    }

    auto read_jsonl = [&](const std::filesystem::path& path, auto&& per_line) {
        std::ifstream in(path, std::ios::binary);
        if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::string where = path.filename().string() + ":" + std::to_string(line_no);
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                raise(ErrorKind::Parse, where + ": " + e.what());
            }
            per_line(j, where);
        }
    };

    for (const std::string& name : task_names) {
        LabeledDataset dataset;
        dataset.task_name = name;
        read_jsonl(dir / ("task_" + name + ".jsonl"), [&](const json& j, const std::string& where) {
            dataset.records.push_back(record_from_json(j, where));
            if (!j.contains("label")) raise(ErrorKind::Parse, where + ": missing label");
            const int label = j.at("label").get<int>();
            dataset.labels.push_back(label);
        });
        bundle.labeled.push_back(std::move(dataset));
    }
    read_jsonl(dir / "unlabeled.jsonl", [&](const json& j, const std::string& where) {
        bundle.unlabeled.push_back(record_from_json(j, where));
    });
    validate_bundle(bundle);
    return bundle;
}

// --- splits -------------------------------------------------------------------

namespace {

LabeledDataset subset(const LabeledDataset& dataset, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.task_name = dataset.task_name;
    out.records.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.records.push_back(dataset.records[i]);
        out.labels.push_back(dataset.labels[i]);
    }
    return out;
}

struct StratifiedIndices {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
};

StratifiedIndices shuffled_by_label(const LabeledDataset& dataset, Rng& rng) {
    StratifiedIndices out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        (dataset.labels[i] == 1 ? out.positives : out.negatives).push_back(i);
    }
    rng.shuffle(out.positives);
    rng.shuffle(out.negatives);
    return out;
}

/// Carve `fraction` of the pool (at least one positive and one negative) for
/// validation; the remainder trains.
void carve_validation(const LabeledDataset& dataset, std::vector<std::size_t> pool_pos,
                      std::vector<std::size_t> pool_neg, double fraction, LabeledDataset& train,
                      LabeledDataset& validation) {
    const std::size_t val_pos = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool_pos.size()))));
    const std::size_t val_neg = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool_neg.size()))));
    if (val_pos >= pool_pos.size() || val_neg >= pool_neg.size()) {
        raise(ErrorKind::Stratification, "task " + dataset.task_name +
                                             ": not enough examples to carve a stratified validation set");
    }
    std::vector<std::size_t> val_idx(pool_pos.begin(), pool_pos.begin() + static_cast<long>(val_pos));
    val_idx.insert(val_idx.end(), pool_neg.begin(), pool_neg.begin() + static_cast<long>(val_neg));
    std::vector<std::size_t> train_idx(pool_pos.begin() + static_cast<long>(val_pos), pool_pos.end());
    train_idx.insert(train_idx.end(), pool_neg.begin() + static_cast<long>(val_neg), pool_neg.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    train = subset(dataset, train_idx);
    validation = subset(dataset, val_idx);
}

} // namespace

std::vector<FoldSplit> kfold_split(const LabeledDataset& dataset, std::size_t folds,
                                   double validation_fraction, std::uint64_t seed) {
    if (folds < 2) raise(ErrorKind::Domain, "k-fold split requires folds >= 2");
    if (dataset.size() < folds) raise(ErrorKind::Domain, "dataset smaller than fold count");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        raise(ErrorKind::Domain, "validation fraction must lie in (0, 1)");
    }
    Rng rng = Rng::derive(seed, 0x5f01d);
    StratifiedIndices strata = shuffled_by_label(dataset, rng);
    if (strata.positives.size() < folds || strata.negatives.size() < folds) {
        raise(ErrorKind::Stratification, "task " + dataset.task_name +
                                             ": too few positives or negatives to stratify into " +
                                             std::to_string(folds) + " folds");
    }
    std::vector<FoldSplit> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> test_idx, pool_pos, pool_neg;
        for (std::size_t i = 0; i < strata.positives.size(); ++i) {
            (i % folds == f ? test_idx : pool_pos).push_back(strata.positives[i]);
        }
        for (std::size_t i = 0; i < strata.negatives.size(); ++i) {
            (i % folds == f ? test_idx : pool_neg).push_back(strata.negatives[i]);
        }
        std::sort(test_idx.begin(), test_idx.end());
        out[f].test = subset(dataset, test_idx);
        carve_validation(dataset, std::move(pool_pos), std::move(pool_neg), validation_fraction,
                         out[f].train, out[f].validation);
    }
    return out;
}

FoldSplit single_split(const LabeledDataset& dataset, double test_fraction, double validation_fraction,
                       std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        raise(ErrorKind::Domain, "test fraction must lie in (0, 1)");
    }
    Rng rng = Rng::derive(seed, 0x51e91);
    StratifiedIndices strata = shuffled_by_label(dataset, rng);
    const std::size_t test_pos = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(strata.positives.size()))));
    const std::size_t test_neg = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(strata.negatives.size()))));
    if (test_pos >= strata.positives.size() || test_neg >= strata.negatives.size()) {
        raise(ErrorKind::Stratification, "task " + dataset.task_name + ": too few examples for a holdout split");
    }
    FoldSplit split;
    std::vector<std::size_t> test_idx(strata.positives.begin(), strata.positives.begin() + static_cast<long>(test_pos));
    test_idx.insert(test_idx.end(), strata.negatives.begin(), strata.negatives.begin() + static_cast<long>(test_neg));
    std::sort(test_idx.begin(), test_idx.end());
    split.test = subset(dataset, test_idx);
    std::vector<std::size_t> pool_pos(strata.positives.begin() + static_cast<long>(test_pos), strata.positives.end());
    std::vector<std::size_t> pool_neg(strata.negatives.begin() + static_cast<long>(test_neg), strata.negatives.end());
    carve_validation(dataset, std::move(pool_pos), std::move(pool_neg), validation_fraction, split.train,
                     split.validation);
    return split;
}

} // namespace mvmt

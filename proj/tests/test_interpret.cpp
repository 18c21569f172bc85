#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvmt/errors.hpp"
#include "mvmt/interpret.hpp"

using namespace mvmt;

namespace {

struct Fixture {
    SyntheticSpec spec;
    TaskBundle bundle;
    TrainedModel model;

    explicit Fixture(std::uint64_t seed)
        : spec(make_spec(seed)), bundle(generate_synthetic_bundle(spec)), model(make_model(seed)) {}

    static SyntheticSpec make_spec(std::uint64_t seed) {
        SyntheticSpec s;
        s.vocabulary_size = 10;
        s.num_patients_per_task = 32;
        s.positive_rate = 0.25;
        s.visit_count_range = {2, 5};
        s.codes_per_visit_range = {1, 3};
        s.planted_risk_codes = {{2, 3}};
        s.seed = seed;
        return s;
    }

    TrainedModel make_model(std::uint64_t seed) {
        ModelConfig config;
        config.encoder.hidden_dim = 4;
        config.encoder.vocab_size = 10;
        config.num_tasks = 1;
        TrainedModel m(config, {"atrial_fibrillation"});
        Rng rng(seed + 5);
        m.init_params(rng);
        return m;
    }
};

} // namespace

TEST_CASE("uniform attention over present codes rescales to one") {
    CodeVocabulary vocab;
    for (int i = 0; i < 6; ++i) vocab.add("C" + std::to_string(i), CodeCategory::Diagnosis);
    Tensor beta({6});
    const std::vector<std::size_t> present = {1, 3, 4};
    for (std::size_t c : present) beta[c] = 1.0 / 3.0;
    FeatureImportanceTable table = aggregate_feature_importance({{beta, present}}, vocab, 0);
    REQUIRE(table.rows.size() == 3);
    for (const auto& row : table.rows) CHECK(row.weight == doctest::Approx(1.0));
    // absent codes do not appear
    for (const auto& row : table.rows) {
        CHECK(row.code_index != 0);
        CHECK(row.code_index != 2);
        CHECK(row.code_index != 5);
    }
}

TEST_CASE("importance aggregation averages per containing patient and ranks stably") {
    CodeVocabulary vocab;
    for (int i = 0; i < 4; ++i) vocab.add("C" + std::to_string(i), CodeCategory::Diagnosis);
    Tensor beta_a = Tensor::vector({0.5, 0.5, 0.0, 0.0});
    Tensor beta_b = Tensor::vector({0.1, 0.0, 0.9, 0.0});
    std::vector<std::pair<Tensor, std::vector<std::size_t>>> patients = {
        {beta_a, {0, 1}}, // rescale x2: code0 -> 1.0, code1 -> 1.0
        {beta_b, {0, 2}}, // rescale x2: code0 -> 0.2, code2 -> 1.8
    };
    FeatureImportanceTable table = aggregate_feature_importance(patients, vocab, 0);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].code_index == 2); // 1.8 / 1 patient
    CHECK(table.rows[0].weight == doctest::Approx(1.8));
    CHECK(table.rows[1].code_index == 1); // 1.0 beats 0.6 average of code0
    CHECK(table.rows[1].weight == doctest::Approx(1.0));
    CHECK(table.rows[2].code_index == 0); // (1.0 + 0.2) / 2
    CHECK(table.rows[2].weight == doctest::Approx(0.6));

    // permuting patient order changes nothing
    FeatureImportanceTable swapped =
        aggregate_feature_importance({patients[1], patients[0]}, vocab, 0);
    REQUIRE(swapped.rows.size() == table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(swapped.rows[i].code_index == table.rows[i].code_index);
        CHECK(swapped.rows[i].weight == doctest::Approx(table.rows[i].weight));
    }
}

TEST_CASE("rank_features on a dataset without positives warns") {
    Fixture fx(1);
    LabeledDataset negatives = fx.bundle.labeled[0];
    for (int& label : negatives.labels) label = 0;
    FeatureImportanceTable table = rank_features(fx.model, negatives, fx.bundle.vocabulary, 0);
    CHECK(table.empty_warning);
    CHECK(table.rows.empty());
}

TEST_CASE("rank_features is invariant to record order") {
    Fixture fx(2);
    LabeledDataset data = fx.bundle.labeled[0];
    FeatureImportanceTable a = rank_features(fx.model, data, fx.bundle.vocabulary, 0, true, 0);

    LabeledDataset reversed = data;
    std::reverse(reversed.records.begin(), reversed.records.end());
    std::reverse(reversed.labels.begin(), reversed.labels.end());
    FeatureImportanceTable b = rank_features(fx.model, reversed, fx.bundle.vocabulary, 0, true, 0);

    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].code_index == b.rows[i].code_index);
        CHECK(a.rows[i].weight == doctest::Approx(b.rows[i].weight).epsilon(1e-12));
    }
}

TEST_CASE("explain_patient reports recorded weights") {
    Fixture fx(3);
    const PatientRecord& record = fx.bundle.labeled[0].records[0];

    // model parameters untouched by explanation
    std::vector<double> before;
    fx.model.store(0).for_each([&](const std::string&, const ParamStore::Entry& e) {
        before.insert(before.end(), e.value.data().begin(), e.value.data().end());
    });
    CaseStudyReport report = explain_patient(fx.model, record, fx.bundle.vocabulary, 0, 5);
    std::vector<double> after;
    fx.model.store(0).for_each([&](const std::string&, const ParamStore::Entry& e) {
        after.insert(after.end(), e.value.data().begin(), e.value.data().end());
    });
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

    CHECK(report.baseline_prediction > 0.0);
    CHECK(report.baseline_prediction < 1.0);
    CHECK(report.top_visits.size() == std::min<std::size_t>(5, record.visits.size()));
    double visit_total = 0.0;
    for (const auto& v : report.top_visits) visit_total += v.weight;
    CHECK(visit_total <= 1.0 + 1e-9);
    double feature_total = 0.0;
    for (const auto& f : report.top_features) feature_total += f.weight;
    CHECK(feature_total <= 1.0 + 1e-9);

    // topK larger than T returns every visit
    CaseStudyReport all = explain_patient(fx.model, record, fx.bundle.vocabulary, 0, 100);
    CHECK(all.top_visits.size() == record.visits.size());
}

TEST_CASE("single-visit patient concentrates visit attention") {
    Fixture fx(4);
    PatientRecord record;
    record.id = "solo";
    record.visits.push_back({{1, 2}, 0});
    CaseStudyReport report = explain_patient(fx.model, record, fx.bundle.vocabulary, 0, 3);
    REQUIRE(report.top_visits.size() == 1);
    CHECK(report.top_visits[0].weight == doctest::Approx(1.0));
}

TEST_CASE("apply_removal semantics") {
    Fixture fx(5);
    PatientRecord record;
    record.id = "r";
    record.visits.push_back({{1, 2}, 0});
    record.visits.push_back({{2}, 5});
    record.visits.push_back({{3, 4}, 9});

    SUBCASE("dropping a visit keeps other timestamps") {
        PatientRecord out = apply_removal(record, fx.bundle.vocabulary, {{1}, {}});
        REQUIRE(out.visits.size() == 2);
        CHECK(out.visits[0].timestamp_days == 0);
        CHECK(out.visits[1].timestamp_days == 9);
    }

    SUBCASE("removing a code empties and drops its visit") {
        RemovalSpec removal;
        removal.code_ids = {fx.bundle.vocabulary.code(2).id};
        PatientRecord out = apply_removal(record, fx.bundle.vocabulary, removal);
        REQUIRE(out.visits.size() == 2);
        CHECK(out.visits[0].code_indices == std::vector<std::size_t>{1});
        CHECK(out.visits[1].code_indices == std::vector<std::size_t>{3, 4});
    }

    SUBCASE("removing everything is a degenerate record") {
        RemovalSpec removal;
        removal.visit_indices = {0, 1, 2};
        CHECK_THROWS_AS(apply_removal(record, fx.bundle.vocabulary, removal), Error);
        try {
            apply_removal(record, fx.bundle.vocabulary, removal);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateRecord);
        }
    }

    SUBCASE("unknown code identifiers are vocabulary errors") {
        RemovalSpec removal;
        removal.code_ids = {"NOPE"};
        CHECK_THROWS_AS(apply_removal(record, fx.bundle.vocabulary, removal), Error);
    }
}

TEST_CASE("ablate_and_repredict baseline and no-op removals") {
    Fixture fx(6);
    const PatientRecord& record = fx.bundle.labeled[0].records[1];
    const double baseline = fx.model.predict_value(record, fx.bundle.vocabulary, 0);

    RemovalSpec empty;
    RemovalSpec absent;
    // pick a code id that is in the vocabulary but not in this record
    std::set<std::size_t> present;
    for (const Visit& v : record.visits) present.insert(v.code_indices.begin(), v.code_indices.end());
    for (std::size_t c = 0; c < fx.bundle.vocabulary.size(); ++c) {
        if (!present.count(c)) {
            absent.code_ids = {fx.bundle.vocabulary.code(c).id};
            break;
        }
    }
    REQUIRE(!absent.code_ids.empty());

    std::vector<double> out =
        ablate_and_repredict(fx.model, record, fx.bundle.vocabulary, 0, {empty, absent});
    CHECK(out[0] == baseline); // exact
    CHECK(out[1] == baseline); // removal of an absent code cannot change the input
}

TEST_CASE("report emitters produce parseable output") {
    Fixture fx(7);
    FeatureImportanceTable table = rank_features(fx.model, fx.bundle.labeled[0], fx.bundle.vocabulary, 0);
    const std::string csv = importance_to_csv(table);
    CHECK(csv.rfind("task,rank,code,label,weight\n", 0) == 0);
    nlohmann::json j = importance_to_json(table);
    CHECK(j.contains("rows"));
    CHECK(j.at("metadata").contains("averaging"));

    CaseStudyReport report = explain_patient(fx.model, fx.bundle.labeled[0].records[2],
                                             fx.bundle.vocabulary, 0, 5);
    report.ablations.push_back({"codes=C2", 0.4});
    nlohmann::json cj = case_study_to_json(report);
    CHECK(cj.at("top_visits").is_array());
    CHECK(case_study_to_text(report).find("Visits") != std::string::npos);
}

#include "mvmt/heads.hpp"

#include "mvmt/errors.hpp"

namespace mvmt {

std::string variant_name(Variant variant) {
    switch (variant) {
        case Variant::Full: return "full";
        case Variant::NoFeatureView: return "-feature-view";
        case Variant::NoVisitView: return "-visit-view";
        case Variant::NoTaskSpecific: return "-task-specific";
        case Variant::NoUnlabeled: return "-unlabeled";
    }
    return "full";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "-feature-view") return Variant::NoFeatureView;
    if (name == "-visit-view") return Variant::NoVisitView;
    if (name == "-task-specific") return Variant::NoTaskSpecific;
    if (name == "-unlabeled") return Variant::NoUnlabeled;
    raise(ErrorKind::Config, "unknown variant: " + name +
                                 " (expected full, -feature-view, -visit-view, -task-specific, -unlabeled)");
}

std::size_t ModelConfig::rep_dim() const {
    const std::size_t d = encoder.hidden_dim;
    std::size_t total = 0;
    if (has_feature_view()) total += 4 * d;
    if (has_visit_view()) total += 2 * d + 2 * d; // g^v and h*
    return total;
}

void ModelConfig::validate() const {
    encoder.validate();
    if (num_tasks == 0) raise(ErrorKind::Config, "model needs at least one task");
    if (shared_attention() && num_tasks != 1) {
        raise(ErrorKind::Config, "the -task-specific variant trains one single-task model per task");
    }
    if (contrastive_temperature <= 0.0) raise(ErrorKind::Config, "contrastive temperature must be positive");
}

std::string head_prefix(const ModelConfig& config, std::size_t task) {
    if (config.shared_attention()) return "head.shared.";
    if (task >= config.num_tasks) raise(ErrorKind::Lookup, "task index " + std::to_string(task) + " out of range");
    return "head." + std::to_string(task) + ".";
}

std::string unlabeled_head_prefix() { return "head.unlabeled."; }

namespace {

void register_attention_scorers(ParamStore& store, const ModelConfig& config, const std::string& prefix,
                                Rng& rng) {
    const std::size_t d = config.encoder.hidden_dim;
    if (config.has_feature_view()) {
        store.add_glorot(prefix + "feat.w1", {4 * d, 4 * d}, 4 * d, 4 * d, rng);
        store.add(prefix + "feat.b1", {4 * d});
        store.add_glorot(prefix + "feat.w2", {1, 4 * d}, 4 * d, 1, rng);
        store.add(prefix + "feat.b2", {1});
    }
    if (config.has_visit_view()) {
        store.add_glorot(prefix + "visit.w1", {2 * d, 2 * d}, 2 * d, 2 * d, rng);
        store.add(prefix + "visit.b1", {2 * d});
        store.add_glorot(prefix + "visit.w2", {1, 2 * d}, 2 * d, 1, rng);
        store.add(prefix + "visit.b2", {1});
    }
}

} // namespace

void register_head_params(ParamStore& store, const ModelConfig& config, Rng& rng) {
    const std::size_t d = config.encoder.hidden_dim;
    const std::size_t rep = config.rep_dim();
    const std::size_t task_heads = config.shared_attention() ? 1 : config.num_tasks;
    for (std::size_t k = 0; k < task_heads; ++k) {
        const std::string prefix = config.shared_attention() ? "head.shared." : head_prefix(config, k);
        register_attention_scorers(store, config, prefix, rng);
        if (config.shared_attention()) {
            store.add_glorot(prefix + "dec.w", {1, rep}, rep, 1, rng);
            store.add(prefix + "dec.b", {1});
        } else {
            store.add_glorot(prefix + "dec.w1", {2 * d, rep}, rep, 2 * d, rng);
            store.add(prefix + "dec.b1", {2 * d});
            store.add_glorot(prefix + "dec.w2", {1, 2 * d}, 2 * d, 1, rng);
            store.add(prefix + "dec.b2", {1});
        }
    }
    if (config.has_unlabeled_head()) {
        const std::string prefix = unlabeled_head_prefix();
        register_attention_scorers(store, config, prefix, rng);
        const std::size_t proj = config.proj_dim();
        for (const char* side : {"proj_f", "proj_v"}) {
            const std::string p = prefix + side + ".";
            store.add_glorot(p + "w1", {4 * d, 4 * d}, 4 * d, 4 * d, rng);
            store.add(p + "b1", {4 * d});
            store.add_glorot(p + "w2", {proj, 4 * d}, 4 * d, proj, rng);
            store.add(p + "b2", {proj});
        }
    }
}

namespace {

ag::Var scorer(const ag::Var& rows, const std::string& prefix, const std::string& side, ParamStore& store) {
    ag::Var hidden =
        ag::tanh_op(ag::linear_rows(rows, store.bind(prefix + side + ".w1"), store.bind(prefix + side + ".b1")));
    return ag::softmax(
        ag::flatten(ag::linear_rows(hidden, store.bind(prefix + side + ".w2"), store.bind(prefix + side + ".b2"))));
}

} // namespace

TaskOutput task_attention(const SharedRepresentation& shared, const std::string& prefix,
                          ParamStore& store, const ModelConfig& config) {
    TaskOutput out;
    std::vector<ag::Var> parts;
    if (config.has_feature_view()) {
        if (!shared.feature_view) raise(ErrorKind::State, "shared representation is missing the feature view");
        out.feature_attention = scorer(shared.feature_view, prefix, "feat", store);
        out.feature_rep = ag::weighted_sum_rows(out.feature_attention, shared.feature_view);
        parts.push_back(out.feature_rep);
    }
    if (config.has_visit_view()) {
        if (!shared.visit_view || !shared.patient_vector) {
            raise(ErrorKind::State, "shared representation is missing the visit view");
        }
        out.visit_attention = scorer(shared.visit_view, prefix, "visit", store);
        out.visit_rep = ag::weighted_sum_rows(out.visit_attention, shared.visit_view);
        out.patient_vector = shared.patient_vector;
        parts.push_back(out.visit_rep);
        parts.push_back(shared.patient_vector);
    }
    out.task_rep = parts.size() == 1 ? parts.front() : ag::concat(parts);
    return out;
}

ag::Var decode_labeled(const TaskOutput& output, const std::string& prefix, ParamStore& store,
                       const ModelConfig& config) {
    if (prefix == unlabeled_head_prefix()) {
        raise(ErrorKind::TaskKind, "decode_labeled called on the unlabeled head");
    }
    if (config.shared_attention()) {
        return ag::sigmoid(ag::affine(output.task_rep, store.bind(prefix + "dec.w"), store.bind(prefix + "dec.b")));
    }
    ag::Var hidden =
        ag::relu(ag::affine(output.task_rep, store.bind(prefix + "dec.w1"), store.bind(prefix + "dec.b1")));
    return ag::sigmoid(ag::affine(hidden, store.bind(prefix + "dec.w2"), store.bind(prefix + "dec.b2")));
}

std::pair<ag::Var, ag::Var> project_unlabeled(const TaskOutput& output, ParamStore& store,
                                              const ModelConfig& config) {
    if (!config.has_unlabeled_head()) {
        raise(ErrorKind::TaskKind, "this variant has no unlabeled projection head");
    }
    if (!output.feature_rep || !output.visit_rep || !output.patient_vector) {
        raise(ErrorKind::State, "projections need both view representations");
    }
    auto project = [&](const ag::Var& input, const std::string& side) {
        const std::string p = unlabeled_head_prefix() + side + ".";
        ag::Var hidden = ag::relu(ag::affine(input, store.bind(p + "w1"), store.bind(p + "b1")));
        ag::Var raw = ag::affine(hidden, store.bind(p + "w2"), store.bind(p + "b2"));
        return ag::normalize_to_unit_sphere(raw);
    };
    // the visit-view projection input is Concat(g^v, h*): both arms are 4d wide
    ag::Var zf = project(output.feature_rep, "proj_f");
    ag::Var zv = project(ag::concat({output.visit_rep, output.patient_vector}), "proj_v");
    return {zf, zv};
}

} // namespace mvmt

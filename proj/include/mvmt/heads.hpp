#pragma once

#include <string>
#include <utility>

#include "mvmt/encoders.hpp"

namespace mvmt {

/// Ablation variants: the full model, the two single-view reductions, the
/// single-task reduction (shared attention + linear decoders, trained per
/// task), and the variant trained without the unlabeled contrastive task.
/// Single-view variants also drop the contrastive task: it pairs the two
/// view projections, so it needs both views.
enum class Variant { Full, NoFeatureView, NoVisitView, NoTaskSpecific, NoUnlabeled };

std::string variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    EncoderConfig encoder;
    std::size_t num_tasks = 1; // labeled tasks served by this model instance
    Variant variant = Variant::Full;
    std::size_t projection_dim = 0; // 0 -> 2d
    double contrastive_temperature = 1.0;

    bool has_feature_view() const { return variant != Variant::NoFeatureView; }
    bool has_visit_view() const { return variant != Variant::NoVisitView; }
    bool has_unlabeled_head() const { return variant == Variant::Full; }
    bool shared_attention() const { return variant == Variant::NoTaskSpecific; }

    /// Length of the task-specific representation o_k: 4d + 2d + 2d for both
    /// views, 4d when either view is dropped.
    std::size_t rep_dim() const;
    std::size_t proj_dim() const { return projection_dim ? projection_dim : 2 * encoder.hidden_dim; }
    void validate() const;
};

/// Per-prediction output of one task head, as graph handles.
struct TaskOutput {
    ag::Var feature_attention; // beta-hat over |C| (null without feature view)
    ag::Var visit_attention;   // gamma-hat over T (null without visit view)
    ag::Var feature_rep;       // g^f, 4d
    ag::Var visit_rep;         // g^v, 2d
    ag::Var patient_vector;    // h* carried through from the shared encoder
    ag::Var task_rep;          // o_k
};

std::string head_prefix(const ModelConfig& config, std::size_t task);
std::string unlabeled_head_prefix();

void register_head_params(ParamStore& store, const ModelConfig& config, Rng& rng);

/// Task-specific attention over the shared representation: row-wise scorers
/// with softmax normalization, attention-pooled view summaries, and the
/// concatenated task representation.
TaskOutput task_attention(const SharedRepresentation& shared, const std::string& prefix,
                          ParamStore& store, const ModelConfig& config);

/// Labeled decoder with terminal sigmoid; rejects the unlabeled head.
ag::Var decode_labeled(const TaskOutput& output, const std::string& prefix, ParamStore& store,
                       const ModelConfig& config);

/// Unit-norm projections of the two view representations (feature view from
/// g^f; visit view from Concat(g^v, h*)).
std::pair<ag::Var, ag::Var> project_unlabeled(const TaskOutput& output, ParamStore& store,
                                              const ModelConfig& config);

} // namespace mvmt

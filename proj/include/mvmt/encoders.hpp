#pragma once

#include <utility>
#include <vector>

#include "mvmt/autograd.hpp"
#include "mvmt/clinical_data.hpp"
#include "mvmt/param_store.hpp"

namespace mvmt {

struct EncoderConfig {
    std::size_t hidden_dim = 16; // d; even, >= 2
    std::size_t vocab_size = 0;  // |C|
    std::size_t kernel_width = 3;
    std::size_t demo_dim = Demographics::kDim;

    std::size_t feature_filters() const { return 4 * hidden_dim; }
    std::size_t visit_state_dim() const { return 2 * hidden_dim; }
    void validate() const;
};

/// Shared multi-view representation of one record. Handles into the live
/// computation graph; entries are null when the active variant drops a view.
struct SharedRepresentation {
    ag::Var feature_view;                // |C| x 4d
    ag::Var visit_view;                  // T x 2d
    ag::Var patient_vector;              // 2d
    std::vector<ag::Var> code_attention; // per-visit alpha-hat over that visit's codes
};

/// Registers the shared encoder parameters ("enc.*"). Views can be omitted to
/// match ablation variants.
void register_encoder_params(ParamStore& store, const EncoderConfig& config, Rng& rng,
                             bool feature_view, bool visit_view);

/// Per-code Conv1d over the code's presence series followed by max-over-time;
/// convolution weights are not shared between codes. Output is |C| x 4d.
/// Composed from the conv/maxpool primitives; the fused path used by the
/// model must produce identical values (see tests).
ag::Var encode_feature_view(const Tensor& visit_matrix, ParamStore& store,
                            const EncoderConfig& config);
ag::Var encode_feature_view_fast(const Tensor& visit_matrix, ParamStore& store,
                                 const EncoderConfig& config);

/// Dense visit-code embeddings: row i = ReLU(W1[:, code_i] + b1).
ag::Var embed_codes(const Visit& visit, ParamStore& store, const EncoderConfig& config);

/// Location attention over one visit's code embeddings; returns the
/// normalized weights and the attention-pooled visit vector.
std::pair<ag::Var, ag::Var> visit_code_attention(const ag::Var& code_embeddings, ParamStore& store,
                                                 const EncoderConfig& config);

/// Linear fusion of the visit vector with the demographics one-hot (no bias,
/// no activation).
ag::Var fuse_demographics(const ag::Var& visit_vector, const Tensor& demo_one_hot,
                          ParamStore& store, const EncoderConfig& config);

/// Trigonometric encoding of the interval to the final visit: entry 2t is
/// sin((tT - tj) / 10000^(2t/d)) and entry 2t+1 the matching cosine.
Tensor temporal_encoding(double t_j, double t_T, std::size_t d);

struct VisitViewOutput {
    ag::Var visit_states;                // T x 2d
    ag::Var patient_vector;              // 2d
    std::vector<ag::Var> code_attention; // alpha-hat per visit
};

/// Hierarchical visit-view encoder: code attention per visit, demographic
/// fusion, temporal encoding, bidirectional GRU, and the patient-vector head
/// applied to the final state.
VisitViewOutput encode_visit_view(const PatientRecord& record, ParamStore& store,
                                  const EncoderConfig& config);

} // namespace mvmt

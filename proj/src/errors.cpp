#include "mvmt/errors.hpp"

namespace mvmt {

const char* error_kind_slug(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension-error";
        case ErrorKind::Domain: return "domain-error";
        case ErrorKind::Vocabulary: return "vocabulary-error";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Spec: return "spec-error";
        case ErrorKind::Config: return "config-error";
        case ErrorKind::State: return "state-error";
        case ErrorKind::Stratification: return "stratification-error";
        case ErrorKind::Divergence: return "training-divergence";
        case ErrorKind::DegenerateVector: return "degenerate-vector-error";
        case ErrorKind::DegenerateRecord: return "degenerate-record-error";
        case ErrorKind::TaskKind: return "task-kind-error";
        case ErrorKind::Lookup: return "lookup-error";
        case ErrorKind::Compatibility: return "compatibility-error";
        case ErrorKind::UndefinedMetric: return "undefined-metric-error";
        case ErrorKind::Ordering: return "ordering-error";
        case ErrorKind::Evaluation: return "evaluation-error";
        case ErrorKind::Io: return "io-error";
    }
    return "error";
}

} // namespace mvmt

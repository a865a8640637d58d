#pragma once

#include "taskemb/records.hpp"
#include "taskemb/rng.hpp"

#include <string>
#include <vector>

namespace taskemb {

/// F1 misleading syntactic similarity, F2 named-entity confusion, F3 polar
/// questions, F4 low-quality answers.
enum class FailureKind { F1, F2, F3, F4 };

std::string to_string(FailureKind kind);
/// Accepts "f1".."f4" (any case).
FailureKind parse_failure_kind(std::string_view name);

/// Template-generated evaluation records: one gold passage and seven
/// distractors per query. Only F1-F3 are generated; F4 records come from
/// converted quality threads.
std::vector<FailureRecord> gen_failure_case(FailureKind kind, std::size_t n, Rng& rng);

/// Reads converted tuples (q, p, 7 negatives) as failure records.
std::vector<FailureRecord> failure_records_from_tuples(const std::vector<TupleRecord>& tuples, FailureKind kind);

/// Failure records as retrieval training tuples.
std::vector<TupleRecord> failure_records_to_tuples(const std::vector<FailureRecord>& records, const std::string& dataset);

}  // namespace taskemb

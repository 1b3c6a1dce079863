#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neurosense {

enum class Errc {
  negative_entry,
  sum_out_of_tolerance,
  too_few_classes,
  dimension_mismatch,
  empty_result,
  class_too_small,
  class_smaller_than_k,
  not_converged,
  parse_error,
  invalid_vector,
  duplicate_sample_id,
  class_mismatch,
  class_count_mismatch,
  empty_member_set,
  missing_class_threshold,
  empty_input,
  length_mismatch,
  index_out_of_range,
  unknown_class,
  invalid_argument,
  bundle_not_loaded,
  unsupported_version,
  not_found,
  already_resolved,
  insufficient_data,
  io_error,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::negative_entry: return "NEGATIVE_ENTRY";
    case Errc::sum_out_of_tolerance: return "SUM_OUT_OF_TOLERANCE";
    case Errc::too_few_classes: return "TOO_FEW_CLASSES";
    case Errc::dimension_mismatch: return "DIMENSION_MISMATCH";
    case Errc::empty_result: return "EMPTY_RESULT";
    case Errc::class_too_small: return "CLASS_TOO_SMALL";
    case Errc::class_smaller_than_k: return "CLASS_SMALLER_THAN_K";
    case Errc::not_converged: return "NOT_CONVERGED";
    case Errc::parse_error: return "PARSE_ERROR";
    case Errc::invalid_vector: return "INVALID_VECTOR";
    case Errc::duplicate_sample_id: return "DUPLICATE_SAMPLE_ID";
    case Errc::class_mismatch: return "CLASS_MISMATCH";
    case Errc::class_count_mismatch: return "CLASS_COUNT_MISMATCH";
    case Errc::empty_member_set: return "EMPTY_MEMBER_SET";
    case Errc::missing_class_threshold: return "MISSING_CLASS_THRESHOLD";
    case Errc::empty_input: return "EMPTY_INPUT";
    case Errc::length_mismatch: return "LENGTH_MISMATCH";
    case Errc::index_out_of_range: return "INDEX_OUT_OF_RANGE";
    case Errc::unknown_class: return "UNKNOWN_CLASS";
    case Errc::invalid_argument: return "INVALID_ARGUMENT";
    case Errc::bundle_not_loaded: return "BUNDLE_NOT_LOADED";
    case Errc::unsupported_version: return "UNSUPPORTED_VERSION";
    case Errc::not_found: return "NOT_FOUND";
    case Errc::already_resolved: return "ALREADY_RESOLVED";
    case Errc::insufficient_data: return "INSUFFICIENT_DATA";
    case Errc::io_error: return "IO_ERROR";
  }
  return "UNKNOWN";
}

// All library failures are reported as Error; code() is the stable identifier.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace neurosense

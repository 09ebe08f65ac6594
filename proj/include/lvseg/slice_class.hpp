#ifndef LVSEG_SLICE_CLASS_HPP
#define LVSEG_SLICE_CLASS_HPP

#include <string>

#include "lvseg/errors.hpp"

namespace lvseg {

/// Anatomical level of a short-axis slice. The enum order is the documented
/// tie-break order for classifier votes.
enum class SliceClass : int { Basal = 0, MidVentricle = 1, Apical = 2 };

inline constexpr int kNumClasses = 3;

inline std::string to_string(SliceClass c) {
  switch (c) {
    case SliceClass::Basal:
      return "basal";
    case SliceClass::MidVentricle:
      return "mid";
    case SliceClass::Apical:
      return "apical";
  }
  return "?";
}

inline SliceClass slice_class_from_string(const std::string& s) {
  if (s == "basal") return SliceClass::Basal;
  if (s == "mid") return SliceClass::MidVentricle;
  if (s == "apical") return SliceClass::Apical;
  throw UsageError("unknown slice class '" + s + "'");
}

}  // namespace lvseg

#endif

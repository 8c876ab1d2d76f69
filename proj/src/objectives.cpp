#include "mpcite/objectives.hpp"

namespace mpcite {

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::triplet:
      return "triplet";
    case Objective::mpt_tgt:
      return "mpt-tgt";
    case Objective::mpt_src:
      return "mpt-src";
    case Objective::mpt_src_tgt:
      return "mpt-src-tgt";
  }
  throw Error("objective: unknown objective");
}

Objective objective_from_name(const std::string& name) {
  if (name == "triplet") return Objective::triplet;
  if (name == "mpt-tgt") return Objective::mpt_tgt;
  if (name == "mpt-src") return Objective::mpt_src;
  if (name == "mpt-src-tgt") return Objective::mpt_src_tgt;
  throw Error("objective: unknown objective '" + name +
              "' (expected triplet, mpt-tgt, mpt-src, or mpt-src-tgt)");
}

}  // namespace mpcite

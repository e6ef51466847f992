#include "holmes/likelihood.hpp"

#include <string>

namespace holmes {

void require_binary(const ObservationRef& obs) {
  for (Eigen::Index f = 0; f < obs.size(); ++f) {
    if (obs(f) > 1) {
      throw std::invalid_argument("observation feature " + std::to_string(f) +
                                  " is not binary (value " + std::to_string(int(obs(f))) + ")");
    }
  }
}

}  // namespace holmes

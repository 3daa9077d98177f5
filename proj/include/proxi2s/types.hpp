#pragma once

#include <Eigen/Dense>

namespace proxi2s {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexVector = Eigen::VectorXi;

enum class Link { identity, log, logit };

// Link choice for a model stage; multinomial generalizes logit to K+1 levels.
enum class LinkKind { identity, log, logit, multinomial };

inline const char* to_string(Link link) {
  switch (link) {
    case Link::identity: return "identity";
    case Link::log: return "log";
    case Link::logit: return "logit";
  }
  return "?";
}

inline const char* to_string(LinkKind link) {
  switch (link) {
    case LinkKind::identity: return "identity";
    case LinkKind::log: return "log";
    case LinkKind::logit: return "logit";
    case LinkKind::multinomial: return "multinomial";
  }
  return "?";
}

}  // namespace proxi2s

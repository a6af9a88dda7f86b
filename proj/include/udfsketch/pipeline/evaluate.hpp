#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "udfsketch/metrics.hpp"
#include "udfsketch/pipeline/session.hpp"

namespace udfsketch::pipeline {

struct SessionMetrics {
  std::string id;
  double containment = 0.0;       // detailed ink inside the instance mask dilated by 1 px
  double ink_fraction = 0.0;      // detailed sketch
  double rough_ink_fraction = 0.0;
  double nearest_chamfer = 0.0;   // to the closest reference sketch; NaN without references
};

struct EvaluationReport {
  std::vector<SessionMetrics> rows;
  SessionMetrics mean;
};

inline SessionMetrics evaluate_session(const GenerationSession& s, const std::vector<SketchBitmap>& references) {
  require(s.state == SessionState::detailed_generated, ErrorCode::state_error,
          "evaluation needs sessions in DetailedGenerated");
  SessionMetrics m;
  m.id = s.id;
  const SketchBitmap& detailed = *s.detailed_sketch;
  m.containment = ink_containment(detailed, dilate(*s.instance_mask, 1));
  m.ink_fraction = ink_fraction(detailed);
  m.rough_ink_fraction = ink_fraction(s.edited_sketch ? *s.edited_sketch : *s.rough_sketch);
  m.nearest_chamfer = std::numeric_limits<double>::quiet_NaN();
  for (const auto& ref : references) {
    if (!ref.same_shape(detailed) || is_blank(ref)) continue;
    const double c = chamfer_distance(detailed, ref);
    if (std::isnan(m.nearest_chamfer) || c < m.nearest_chamfer) m.nearest_chamfer = c;
  }
  return m;
}

inline EvaluationReport evaluate(const std::vector<GenerationSession>& sessions,
                                 const std::vector<SketchBitmap>& references = {}) {
  EvaluationReport r;
  r.mean.id = "mean";
  for (const auto& s : sessions) r.rows.push_back(evaluate_session(s, references));
  const double n = static_cast<double>(r.rows.size());
  for (const auto& row : r.rows) {
    r.mean.containment += row.containment / n;
    r.mean.ink_fraction += row.ink_fraction / n;
    r.mean.rough_ink_fraction += row.rough_ink_fraction / n;
    r.mean.nearest_chamfer += row.nearest_chamfer / n;
  }
  if (r.rows.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.mean.containment = r.mean.ink_fraction = r.mean.rough_ink_fraction = r.mean.nearest_chamfer = nan;
  }
  return r;
}

inline std::string evaluation_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out.precision(9);
  out << "id,containment,ink_fraction,rough_ink_fraction,nearest_chamfer\n";
  auto row = [&](const SessionMetrics& m) {
    out << m.id << ',' << m.containment << ',' << m.ink_fraction << ',' << m.rough_ink_fraction << ','
        << m.nearest_chamfer << '\n';
  };
  for (const auto& m : report.rows) row(m);
  row(report.mean);
  return out.str();
}

}  // namespace udfsketch::pipeline

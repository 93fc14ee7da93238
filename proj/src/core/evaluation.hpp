#pragma once

#include <string>
#include <vector>

#include "core/topology.hpp"

namespace rhombot {

struct MeasurementRow {
  std::string label;
  std::vector<double> theta;  ///< rad, one per chain module
  double x = 0.0;             ///< m
  double y = 0.0;             ///< m
};

using MeasurementSeries = std::vector<MeasurementRow>;

/// CSV with header `label,theta_0,...,theta_{n-1},x_mm,y_mm`; angles in
/// degrees and positions in millimeters on disk.
MeasurementSeries parse_measurements(const std::string& csv);
std::string serialize_measurements(const MeasurementSeries& series);

/// Serial chain from the root to `end` along the tree, measured in the root
/// E0 frame. Predicts vertex C (the E1/E2 corner) of the end module.
class ChainModel {
 public:
  ChainModel(const KTree& tree, ModuleId end);

  std::size_t size() const { return links_.size() + 1; }
  const std::vector<ModuleId>& modules() const { return ids_; }
  /// Throws Error(Validation) on arity mismatch or a folding angle out of limits.
  Vec2 predict(const std::vector<double>& theta) const;

 private:
  std::vector<ModuleId> ids_;
  std::vector<ChainLink> links_;
  ModuleState end_;
};

struct RmseResult {
  double x = 0.0;
  double y = 0.0;
};

RmseResult evaluate_rmse(const MeasurementSeries& series, const ChainModel& model);

}  // namespace rhombot

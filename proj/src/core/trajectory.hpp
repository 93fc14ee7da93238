#pragma once

#include <string>
#include <vector>

#include "core/engine.hpp"

namespace rhombot {

/// One JSON object per line: time, root, event, modules, connections.
std::string trajectory_line(const SimFrame& frame);
std::string export_trajectory(const std::vector<SimFrame>& frames);
std::vector<SimFrame> parse_trajectory(const std::string& text);

struct ViewBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

inline constexpr double kSvgPixelsPerMeter = 500.0;

/// Bounding box of every footprint in every frame, padded by `margin` meters.
ViewBox frames_view(const std::vector<SimFrame>& frames, double margin = 0.05);

/// Footprint of a snapshot module in the world.
ConvexPoly snapshot_footprint(const ModuleSnapshot& m);

/// SVG of one frame, 500 px per meter, y up, origin at the lower-left of `view`.
std::string render_svg(const SimFrame& frame, const ViewBox& view);

/// Writes frame_0000.svg ... into dir (which must exist); returns the file names.
std::vector<std::string> export_svgs(const std::vector<SimFrame>& frames, const std::string& dir);

}  // namespace rhombot

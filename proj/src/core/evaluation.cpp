#include "core/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"

namespace rhombot {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double to_number(const std::string& s, int line, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " + column + ": not a number: '" + s + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MeasurementSeries parse_measurements(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_csv(line);
  }
  if (header.size() < 3 || header.front() != "label" || header[header.size() - 2] != "x_mm" ||
      header.back() != "y_mm") {
    throw Error(ErrorCode::Parse, "measurement header must be label,theta_0..theta_{n-1},x_mm,y_mm");
  }
  const std::size_t n = header.size() - 3;
  for (std::size_t i = 0; i < n; ++i) {
    if (header[i + 1] != "theta_" + std::to_string(i)) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected column theta_" + std::to_string(i) +
                                        ", found '" + header[i + 1] + "'");
    }
  }
  MeasurementSeries series;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                                        " columns, found " + std::to_string(cells.size()));
    }
    MeasurementRow row;
    row.label = cells[0];
    for (std::size_t i = 0; i < n; ++i) row.theta.push_back(deg2rad(to_number(cells[i + 1], lineno, header[i + 1])));
    row.x = to_number(cells[n + 1], lineno, "x_mm") / 1000.0;
    row.y = to_number(cells[n + 2], lineno, "y_mm") / 1000.0;
    series.push_back(std::move(row));
  }
  return series;
}

std::string serialize_measurements(const MeasurementSeries& series) {
  const std::size_t n = series.empty() ? 0 : series.front().theta.size();
  std::string out = "label";
  for (std::size_t i = 0; i < n; ++i) out += ",theta_" + std::to_string(i);
  out += ",x_mm,y_mm\n";
  for (const MeasurementRow& r : series) {
    if (r.theta.size() != n) throw Error(ErrorCode::Validation, "rows have different numbers of angles");
    if (r.label.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::Validation, "label '" + r.label + "' contains a separator");
    }
    out += r.label;
    for (double t : r.theta) out += "," + fmt(rad2deg(t));
    out += "," + fmt(r.x * 1000.0) + "," + fmt(r.y * 1000.0) + "\n";
  }
  return out;
}

ChainModel::ChainModel(const KTree& tree, ModuleId end) {
  if (tree.pending()) throw Error(ErrorCode::Pending, "chain model needs a settled tree");
  ModuleId m = tree.module(end).id;
  ids_.push_back(m);
  while (m != tree.root) {
    m = tree.parent.at(m).parent;
    ids_.push_back(m);
  }
  std::reverse(ids_.begin(), ids_.end());
  for (std::size_t i = 0; i + 1 < ids_.size(); ++i) {
    const ModuleState& s = tree.modules.at(ids_[i]);
    links_.push_back({s, s.label_of_port(tree.parent.at(ids_[i + 1]).parent_port)});
  }
  end_ = tree.modules.at(end);
}

Vec2 ChainModel::predict(const std::vector<double>& theta) const {
  if (theta.size() != size()) {
    throw Error(ErrorCode::Validation, "row has " + std::to_string(theta.size()) + " angles, chain has " +
                                           std::to_string(size()) + " modules");
  }
  auto checked = [&](ModuleState s, double t) {
    if (t < s.params.theta_min - 1e-12 || t > s.params.theta_max + 1e-12) {
      throw Error(ErrorCode::Validation, "M" + std::to_string(s.id) + ": folding angle " + std::to_string(rad2deg(t)) +
                                             " deg outside limits");
    }
    s.set_theta(t);
    return s;
  };
  Pose2 frame;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    frame = compose(frame, mating_transform(checked(links_[i].state, theta[i]), links_[i].edge));
  }
  return frame.apply(rhombus_vertices(checked(end_, theta.back()))[2]);
}

RmseResult evaluate_rmse(const MeasurementSeries& series, const ChainModel& model) {
  if (series.empty()) throw Error(ErrorCode::Validation, "empty measurement series");
  double sx = 0.0;
  double sy = 0.0;
  for (const MeasurementRow& r : series) {
    const Vec2 p = model.predict(r.theta);
    sx += (r.x - p.x) * (r.x - p.x);
    sy += (r.y - p.y) * (r.y - p.y);
  }
  const auto n = static_cast<double>(series.size());
  return {std::sqrt(sx / n), std::sqrt(sy / n)};
}

}  // namespace rhombot

#include "interprior/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "interprior/parallel.hpp"

namespace interprior {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::unordered_map<std::string, const PredictionRecord*> index_predictions(const std::vector<PredictionRecord>& preds,
                                                                          const std::vector<SceneRecord>& gts) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second) throw Error(ErrorCode::IdMismatch, "duplicate prediction id " + p.id);
  }
  if (by_id.size() != gts.size()) {
    throw Error(ErrorCode::IdMismatch, std::to_string(preds.size()) + " predictions for " +
                                           std::to_string(gts.size()) + " scenes");
  }
  for (const auto& g : gts) {
    if (!by_id.count(g.id)) throw Error(ErrorCode::IdMismatch, "no prediction for scene " + g.id);
  }
  return by_id;
}

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  if (static_cast<std::size_t>(f.tellg()) != count * sizeof(float)) {
    throw Error(ErrorCode::Format, path.string() + " has an unexpected size");
  }
  f.seekg(0);
  std::vector<float> v(count);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(float)));
  return v;
}

template <typename Derived>
void append_rows(std::vector<float>& out, const Eigen::MatrixBase<Derived>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

MetricsSummary summarize_group(const std::string& name, const std::vector<const MetricRow*>& rows) {
  MetricsSummary s;
  s.category = name;
  // rows arrive sorted, so each scene's rows are contiguous
  std::vector<double> acc, iou, rerr, terr, mpjpe, mpvpe;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    std::vector<double> hit, ious, rs, ts;
    while (j < rows.size() && rows[j]->category == rows[i]->category && rows[j]->scene == rows[i]->scene) {
      const MetricRow& r = *rows[j];
      if (r.kind == RowKind::Hand) {
        mpjpe.push_back(r.mpjpe_mm);
        mpvpe.push_back(r.mpvpe_mm);
      } else {
        ++s.parts;
        if (!r.valid) ++s.invalid;
        hit.push_back(r.valid && r.r_err_deg < 5.0 && r.t_err_cm < 5.0 ? 1.0 : 0.0);
        ious.push_back(r.valid ? r.iou : 0.0);
        if (r.valid) {
          rs.push_back(r.r_err_deg);
          ts.push_back(r.t_err_cm);
        }
      }
      ++j;
    }
    if (!hit.empty()) {
      ++s.scenes;
      acc.push_back(mean(hit));
      iou.push_back(mean(ious));
      if (!rs.empty()) {
        rerr.push_back(mean(rs));
        terr.push_back(mean(ts));
      }
    }
    i = j;
  }
  s.acc_5deg5cm = acc.empty() ? kNaN : 100.0 * mean(acc);
  s.miou = iou.empty() ? kNaN : 100.0 * mean(iou);
  s.r_err = mean(rerr);
  s.t_err = mean(terr);
  s.hand_scenes = static_cast<int>(mpjpe.size());
  s.mpjpe = mean(mpjpe);
  s.mpvpe = mean(mpvpe);
  return s;
}

}  // namespace

const MetricsSummary& MetricsReport::summary(const std::string& category) const {
  for (const auto& s : summaries) {
    if (s.category == category) return s;
  }
  throw Error(ErrorCode::IdMismatch, "no summary for " + category);
}

std::uint64_t iou_seed(const std::string& scene_id, int part) {
  std::uint64_t h = fnv1a64(scene_id);
  h ^= static_cast<std::uint64_t>(part);
  h *= 0x100000001b3ull;
  return h;
}

PredictionRecord gt_as_prediction(const SceneRecord& rec, bool with_hand) {
  PredictionRecord p;
  p.id = rec.id;
  for (int k = 0; k < rec.num_parts(); ++k) {
    PartPrediction pp;
    pp.valid = true;
    pp.pose = rec.part_poses[static_cast<std::size_t>(k)];
    pp.box = rec.posed_boxes[static_cast<std::size_t>(k)];
    p.parts.push_back(pp);
  }
  if (with_hand) {
    p.hand_joints = rec.hand_joints;
    p.hand_surface = rec.hand_surface;
  }
  return p;
}

std::vector<MetricRow> object_rows(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts) {
  const auto by_id = index_predictions(preds, gts);
  std::vector<std::vector<MetricRow>> per_scene(gts.size());
  parallel_for(gts.size(), [&](std::size_t s) {
    const SceneRecord& gt = gts[s];
    const PredictionRecord& pred = *by_id.at(gt.id);
    if (static_cast<int>(pred.parts.size()) != gt.num_parts()) {
      throw Error(ErrorCode::PartCountMismatch, "prediction for " + gt.id + " has the wrong part count");
    }
    for (int k = 0; k < gt.num_parts(); ++k) {
      const auto& pp = pred.parts[static_cast<std::size_t>(k)];
      const auto& gp = gt.part_poses[static_cast<std::size_t>(k)];
      MetricRow row;
      row.kind = RowKind::Part;
      row.category = category_name(gt.category);
      row.scene = gt.id;
      row.part = k;
      row.valid = pp.valid;
      row.mpjpe_mm = row.mpvpe_mm = kNaN;
      if (pp.valid) {
        row.r_err_deg = rotation_error<double>(pp.pose.R, gp.R);
        row.t_err_cm = 100.0 * (pp.pose.t - gp.t).norm();
        row.iou = box_iou<double>(pp.box, gt.posed_boxes[static_cast<std::size_t>(k)], 100000, iou_seed(gt.id, k));
      } else {
        row.r_err_deg = row.t_err_cm = kNaN;
        row.iou = 0.0;
      }
      per_scene[s].push_back(row);
    }
  });
  std::vector<MetricRow> rows;
  for (auto& v : per_scene) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<MetricRow> hand_rows(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts) {
  const auto by_id = index_predictions(preds, gts);
  std::vector<MetricRow> rows;
  for (const auto& gt : gts) {
    const PredictionRecord& pred = *by_id.at(gt.id);
    if (!pred.hand_joints || !pred.hand_surface) continue;
    const HandMetrics m = eval_hand({*pred.hand_joints}, {*pred.hand_surface}, {gt.hand_joints}, {gt.hand_surface});
    MetricRow row;
    row.kind = RowKind::Hand;
    row.category = category_name(gt.category);
    row.scene = gt.id;
    row.r_err_deg = row.t_err_cm = row.iou = kNaN;
    row.mpjpe_mm = m.mpjpe;
    row.mpvpe_mm = m.mpvpe;
    rows.push_back(row);
  }
  return rows;
}

MetricsReport summarize(std::vector<MetricRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.category, a.scene, a.kind, a.part) < std::tie(b.category, b.scene, b.kind, b.part);
  });
  MetricsReport report;
  std::map<std::string, std::vector<const MetricRow*>> groups;
  std::vector<const MetricRow*> all;
  for (const auto& r : rows) {
    groups[r.category].push_back(&r);
    all.push_back(&r);
  }
  for (const auto& [name, g] : groups) report.summaries.push_back(summarize_group(name, g));
  report.summaries.push_back(summarize_group("all", all));
  report.rows = std::move(rows);
  return report;
}

MetricsReport eval_object(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts) {
  return summarize(object_rows(preds, gts));
}

HandMetrics eval_hand(const std::vector<HandJoints<double>>& pred_joints, const std::vector<Points<double>>& pred_surface,
                      const std::vector<HandJoints<double>>& gt_joints, const std::vector<Points<double>>& gt_surface) {
  if (pred_joints.size() != gt_joints.size() || pred_surface.size() != gt_surface.size() ||
      pred_joints.size() != pred_surface.size()) {
    throw Error(ErrorCode::CountMismatch, "hand prediction and ground-truth counts differ");
  }
  HandMetrics m;
  if (pred_joints.empty()) return m;
  for (std::size_t i = 0; i < pred_joints.size(); ++i) {
    if (pred_surface[i].rows() != gt_surface[i].rows()) {
      throw Error(ErrorCode::CountMismatch, "hand surface sizes differ");
    }
    m.mpjpe += 1000.0 * (pred_joints[i] - gt_joints[i]).rowwise().norm().mean();
    m.mpvpe += 1000.0 * (pred_surface[i] - gt_surface[i]).rowwise().norm().mean();
  }
  m.mpjpe /= static_cast<double>(pred_joints.size());
  m.mpvpe /= static_cast<double>(pred_joints.size());
  return m;
}

MetricsReport evaluate(const std::vector<PredictionRecord>& preds, const std::vector<SceneRecord>& gts) {
  auto rows = object_rows(preds, gts);
  auto hands = hand_rows(preds, gts);
  rows.insert(rows.end(), hands.begin(), hands.end());
  return summarize(std::move(rows));
}

void write_report_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << "kind,category,scene,part,valid,r_err_deg,t_err_cm,iou,mpjpe_mm,mpvpe_mm\n";
  for (const auto& r : report.rows) {
    f << (r.kind == RowKind::Part ? "part" : "hand") << ',' << r.category << ',' << r.scene << ',' << r.part << ','
      << (r.valid ? 1 : 0) << ',' << fmt(r.r_err_deg) << ',' << fmt(r.t_err_cm) << ',' << fmt(r.iou) << ','
      << fmt(r.mpjpe_mm) << ',' << fmt(r.mpvpe_mm) << '\n';
  }
}

MetricsReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  std::getline(f, line);
  if (line.rfind("kind,category,scene", 0) != 0) throw Error(ErrorCode::Format, "unexpected report header");
  std::vector<MetricRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw Error(ErrorCode::Format, "report row has " + std::to_string(cells.size()) + " cells");
    MetricRow r;
    if (cells[0] == "part") {
      r.kind = RowKind::Part;
    } else if (cells[0] == "hand") {
      r.kind = RowKind::Hand;
    } else {
      throw Error(ErrorCode::Format, "unknown row kind " + cells[0]);
    }
    r.category = cells[1];
    r.scene = cells[2];
    r.part = std::stoi(cells[3]);
    r.valid = cells[4] == "1";
    r.r_err_deg = std::strtod(cells[5].c_str(), nullptr);
    r.t_err_cm = std::strtod(cells[6].c_str(), nullptr);
    r.iou = std::strtod(cells[7].c_str(), nullptr);
    r.mpjpe_mm = std::strtod(cells[8].c_str(), nullptr);
    r.mpvpe_mm = std::strtod(cells[9].c_str(), nullptr);
    rows.push_back(r);
  }
  return summarize(std::move(rows));
}

void write_summary_json(const std::filesystem::path& path, const MetricsReport& report) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    j.push_back({{"category", s.category},
                 {"scenes", s.scenes},
                 {"parts", s.parts},
                 {"invalid_parts", s.invalid},
                 {"acc_5deg5cm", num(s.acc_5deg5cm)},
                 {"mIoU", num(s.miou)},
                 {"R_err_deg", num(s.r_err)},
                 {"T_err_cm", num(s.t_err)},
                 {"hand_scenes", s.hand_scenes},
                 {"MPJPE_mm", num(s.mpjpe)},
                 {"MPVPE_mm", num(s.mpvpe)}});
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f << nlohmann::json{{"summaries", j},
                      {"note", "hand surface is a proxy-hand sample set; MPVPE is not comparable to MANO vertices"}}
           .dump(2)
    << "\n";
}

void write_predictions(const std::filesystem::path& dir, const std::vector<PredictionRecord>& preds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& p : preds) {
    const fs::path sdir = dir / p.id;
    fs::create_directories(sdir);
    std::vector<float> poses, boxes;
    std::vector<int> valid;
    for (const auto& part : p.parts) {
      append_rows(poses, part.pose.R);
      append_rows(poses, part.pose.t.transpose());
      poses.push_back(static_cast<float>(part.pose.s));
      append_rows(boxes, part.box.vertices);
      valid.push_back(part.valid ? 1 : 0);
    }
    write_raw(sdir / "poses.f32", poses);
    write_raw(sdir / "boxes.f32", boxes);
    nlohmann::json entry = {{"id", p.id}, {"num_parts", p.parts.size()}, {"valid", valid}};
    if (p.hand_joints && p.hand_surface) {
      std::vector<float> buf;
      append_rows(buf, *p.hand_joints);
      write_raw(sdir / "hand_joints.f32", buf);
      buf.clear();
      append_rows(buf, *p.hand_surface);
      write_raw(sdir / "hand_surface.f32", buf);
      entry["hand_surface_points"] = p.hand_surface->rows();
    }
    if (p.contact_confidence) {
      std::vector<float> buf;
      append_rows(buf, *p.contact_confidence);
      write_raw(sdir / "contact_conf.f32", buf);
      entry["contact_points"] = p.contact_confidence->size();
    }
    scenes.push_back(entry);
  }
  std::ofstream f(dir / "predictions.json");
  if (!f) throw Error(ErrorCode::Io, "cannot write predictions.json");
  f << nlohmann::json{{"format", "interprior-predictions"}, {"version", 1}, {"scenes", scenes}}.dump(2) << "\n";
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& dir) {
  std::ifstream f(dir / "predictions.json");
  if (!f) throw Error(ErrorCode::Io, "no predictions.json in " + dir.string());
  const auto j = nlohmann::json::parse(f);
  if (j.value("format", "") != "interprior-predictions") throw Error(ErrorCode::Format, "not a predictions file");
  std::vector<PredictionRecord> out;
  for (const auto& e : j.at("scenes")) {
    PredictionRecord p;
    p.id = e.at("id").get<std::string>();
    const auto sdir = dir / p.id;
    const std::size_t P = e.at("num_parts").get<std::size_t>();
    const auto valid = e.at("valid").get<std::vector<int>>();
    const auto poses = read_f32(sdir / "poses.f32", P * 13);
    const auto boxes = read_f32(sdir / "boxes.f32", P * 24);
    for (std::size_t k = 0; k < P; ++k) {
      PartPrediction pp;
      pp.valid = valid.at(k) != 0;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pp.pose.R(r, c) = poses[k * 13 + static_cast<std::size_t>(r * 3 + c)];
      }
      pp.pose.t = Eigen::Vector3d(poses[k * 13 + 9], poses[k * 13 + 10], poses[k * 13 + 11]);
      pp.pose.s = poses[k * 13 + 12];
      for (int v = 0; v < 8; ++v) {
        for (int c = 0; c < 3; ++c) pp.box.vertices(v, c) = boxes[k * 24 + static_cast<std::size_t>(v * 3 + c)];
      }
      p.parts.push_back(pp);
    }
    if (e.contains("hand_surface_points")) {
      const auto m = e.at("hand_surface_points").get<Index>();
      const auto hj = read_f32(sdir / "hand_joints.f32", kHandJoints * 3);
      const auto hs = read_f32(sdir / "hand_surface.f32", static_cast<std::size_t>(m) * 3);
      HandJoints<double> joints;
      Points<double> surface(m, 3);
      for (int r = 0; r < kHandJoints; ++r) {
        for (int c = 0; c < 3; ++c) joints(r, c) = hj[static_cast<std::size_t>(r * 3 + c)];
      }
      for (Index r = 0; r < m; ++r) {
        for (int c = 0; c < 3; ++c) surface(r, c) = hs[static_cast<std::size_t>(r * 3 + c)];
      }
      p.hand_joints = joints;
      p.hand_surface = surface;
    }
    if (e.contains("contact_points")) {
      const auto n = e.at("contact_points").get<Index>();
      const auto cc = read_f32(sdir / "contact_conf.f32", static_cast<std::size_t>(n));
      Eigen::VectorXd conf(n);
      for (Index i = 0; i < n; ++i) conf(i) = cc[static_cast<std::size_t>(i)];
      p.contact_confidence = conf;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace interprior

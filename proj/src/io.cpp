#include "affstereo/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace affstereo {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "cannot rename " + tmp.string() + " to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------- CSV

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && cell[0] == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || cell.empty())
    fail(ErrorKind::ParseError, where + ": '" + cell + "' is not a number");
  return v;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require(const std::string& name) const {
  const int c = column(name);
  if (c < 0) fail(ErrorKind::ParseError, "csv: missing column '" + name + "'");
  return c;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (t.header.empty()) {
      t.header = split(line, ',');
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      fail(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(t.header.size()) + " fields");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_number(c, source + ":" + std::to_string(line_no)));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) fail(ErrorKind::ParseError, source + ": empty file");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path), path.string()); }

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

int as_index(double v, const char* what) {
  if (v != std::floor(v) || v < 1.0 || v > 1e9)
    fail(ErrorKind::ParseError, std::string("csv: ") + what + " must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace

CorrespondenceSet read_correspondences(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int ct = t.require("t"), ck = t.require("k"), cx = t.require("x_um"), cy = t.require("y_um"),
            cz = t.require("z_um"), cul = t.require("ul_px"), cvl = t.require("vl_px"),
            cur = t.require("ur_px"), cvr = t.require("vr_px");
  CorrespondenceSet set;
  for (const auto& r : t.rows) {
    Correspondence c;
    c.frame_index = as_index(r[ct], "t");
    c.keypoint_index = as_index(r[ck], "k");
    c.x = {r[cx], r[cy], r[cz]};
    c.u_left = {r[cul], r[cvl]};
    c.u_right = {r[cur], r[cvr]};
    set.n_t = std::max(set.n_t, c.frame_index);
    set.n_k = std::max(set.n_k, c.keypoint_index);
    set.items.push_back(c);
  }
  if (set.items.empty()) fail(ErrorKind::ParseError, path.string() + ": no correspondences");
  try {
    set.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, e.what());
  }
  return set;
}

std::string correspondences_csv(const CorrespondenceSet& c) {
  std::vector<std::vector<double>> rows;
  for (const auto& i : c.items)
    rows.push_back({double(i.frame_index), double(i.keypoint_index), i.x.x, i.x.y, i.x.z, i.u_left.u,
                    i.u_left.v, i.u_right.u, i.u_right.v});
  return to_csv({"t", "k", "x_um", "y_um", "z_um", "ul_px", "vl_px", "ur_px", "vr_px"}, rows);
}

std::vector<StereoMatch> read_matches(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int a = t.require("ul_px"), b = t.require("vl_px"), c = t.require("ur_px"), d = t.require("vr_px");
  std::vector<StereoMatch> out;
  for (const auto& r : t.rows) out.push_back({{r[a], r[b]}, {r[c], r[d]}});
  return out;
}

std::string matches_csv(std::span<const StereoMatch> matches) {
  std::vector<std::vector<double>> rows;
  for (const auto& m : matches) rows.push_back({m.left.u, m.left.v, m.right.u, m.right.v});
  return to_csv({"ul_px", "vl_px", "ur_px", "vr_px"}, rows);
}

std::vector<Point2> read_pixels(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int a = t.require("u_px"), b = t.require("v_px");
  std::vector<Point2> out;
  for (const auto& r : t.rows) out.push_back({r[a], r[b]});
  return out;
}

std::string pixels_csv(std::span<const Point2> pixels) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : pixels) rows.push_back({p.u, p.v});
  return to_csv({"u_px", "v_px"}, rows);
}

FramedPoints read_points(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int cx = t.require("x"), cy = t.require("y"), cz = t.require("z");
  const int cf = t.column("frame");
  FramedPoints out;
  for (const auto& r : t.rows) {
    out.points.push_back({r[cx], r[cy], r[cz]});
    if (cf >= 0) out.frame.push_back(as_index(r[cf], "frame"));
  }
  return out;
}

std::string points_csv(std::span<const Point3> points, std::span<const int> frames) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (frames.empty())
      rows.push_back({points[i].x, points[i].y, points[i].z});
    else
      rows.push_back({double(frames[i]), points[i].x, points[i].y, points[i].z});
  }
  if (frames.empty()) return to_csv({"x", "y", "z"}, rows);
  return to_csv({"frame", "x", "y", "z"}, rows);
}

std::vector<RegistrationFrame> read_registration_pairs(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int cf = t.require("frame"), rx = t.require("rx_um"), ry = t.require("ry_um"),
            rz = t.require("rz_um"), mx = t.require("mx_um"), my = t.require("my_um"),
            mz = t.require("mz_um");
  std::map<int, RegistrationFrame> by_frame;
  for (const auto& r : t.rows) {
    auto& f = by_frame[as_index(r[cf], "frame")];
    f.reconstructed.push_back({r[rx], r[ry], r[rz]});
    f.measured.push_back({r[mx], r[my], r[mz]});
  }
  std::vector<RegistrationFrame> out;
  for (auto& [k, f] : by_frame) out.push_back(std::move(f));
  return out;
}

std::string registration_pairs_csv(std::span<const RegistrationFrame> frames) {
  std::vector<std::vector<double>> rows;
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (std::size_t i = 0; i < frames[f].reconstructed.size(); ++i) {
      const auto& r = frames[f].reconstructed[i];
      const auto& m = frames[f].measured[i];
      rows.push_back({double(f + 1), r.x, r.y, r.z, m.x, m.y, m.z});
    }
  return to_csv({"frame", "rx_um", "ry_um", "rz_um", "mx_um", "my_um", "mz_um"}, rows);
}

std::vector<RegistrationFrame> group_by_frame(const FramedPoints& reconstructed, const FramedPoints& measured) {
  if (reconstructed.points.size() != measured.points.size())
    fail(ErrorKind::CountMismatch, "registration: reconstructed and measured files differ in length");
  if (reconstructed.frame.empty() && measured.frame.empty())
    return {RegistrationFrame{reconstructed.points, measured.points}};
  const auto& frames = reconstructed.frame.empty() ? measured.frame : reconstructed.frame;
  if (!reconstructed.frame.empty() && !measured.frame.empty() && reconstructed.frame != measured.frame)
    fail(ErrorKind::CountMismatch, "registration: frame columns disagree");
  std::map<int, RegistrationFrame> by_frame;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    by_frame[frames[i]].reconstructed.push_back(reconstructed.points[i]);
    by_frame[frames[i]].measured.push_back(measured.points[i]);
  }
  std::vector<RegistrationFrame> out;
  for (auto& [k, f] : by_frame) out.push_back(std::move(f));
  return out;
}

std::string detections_csv(std::span<const KeypointDetection> detections) {
  std::vector<std::vector<double>> rows;
  for (const auto& d : detections)
    rows.push_back({double(d.channel_index), d.location.u, d.location.v, d.peak_value});
  return to_csv({"k", "u_px", "v_px", "peak"}, rows);
}

// ---------------------------------------------------------------------- PLY

std::string to_ply(const PlyMesh& mesh) {
  std::string out = "ply\nformat ascii 1.0\n";
  for (const auto& c : mesh.comments) out += "comment " + c + "\n";
  out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (!mesh.faces.empty()) {
    out += "element face " + std::to_string(mesh.faces.size()) + "\n";
    out += "property list uchar int vertex_indices\n";
  }
  out += "end_header\n";
  for (const auto& v : mesh.vertices)
    out += format_double(v.x) + " " + format_double(v.y) + " " + format_double(v.z) + "\n";
  for (const auto& f : mesh.faces)
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
  return out;
}

PlyMesh read_ply(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  const std::string where = path.string();
  if (!std::getline(in, line) || trim(line) != "ply") fail(ErrorKind::ParseError, where + ": not a PLY file");

  PlyMesh mesh;
  std::size_t n_vertices = 0, n_faces = 0;
  std::vector<std::string> vertex_props;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(trim(line));
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "comment") {
      std::string rest;
      std::getline(ls, rest);
      mesh.comments.push_back(trim(rest));
    } else if (key == "element") {
      std::size_t count = 0;
      ls >> current >> count;
      if (current == "vertex") n_vertices = count;
      else if (current == "face") n_faces = count;
    } else if (key == "property") {
      if (current == "vertex") {
        std::string type, name;
        ls >> type >> name;
        vertex_props.push_back(name);
      }
    } else if (key == "end_header") {
      break;
    }
  }
  if (!ascii) fail(ErrorKind::ParseError, where + ": only ASCII PLY is supported");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i] == "x") ix = static_cast<int>(i);
    if (vertex_props[i] == "y") iy = static_cast<int>(i);
    if (vertex_props[i] == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorKind::ParseError, where + ": vertex element lacks x/y/z");
  for (std::size_t v = 0; v < n_vertices; ++v) {
    if (!std::getline(in, line)) fail(ErrorKind::ParseError, where + ": truncated vertex list");
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) vals.push_back(parse_number(tok, where));
    if (vals.size() < vertex_props.size()) fail(ErrorKind::ParseError, where + ": short vertex line");
    mesh.vertices.push_back({vals[ix], vals[iy], vals[iz]});
  }
  for (std::size_t f = 0; f < n_faces; ++f) {
    if (!std::getline(in, line)) fail(ErrorKind::ParseError, where + ": truncated face list");
    std::istringstream ls(line);
    int n = 0;
    ls >> n;
    if (n != 3) fail(ErrorKind::ParseError, where + ": only triangle faces are supported");
    std::array<int, 3> tri{};
    ls >> tri[0] >> tri[1] >> tri[2];
    mesh.faces.push_back(tri);
  }
  return mesh;
}

PlyMesh surface_mesh(const BBSurface& s, int resolution) {
  if (resolution < 2) fail(ErrorKind::InvalidArgument, "mesh resolution must be >= 2");
  const Domain& d = s.domain();
  PlyMesh mesh;
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i) {
      const double u = d.u_min + (d.u_max - d.u_min) * i / (resolution - 1);
      const double v = d.v_min + (d.v_max - d.v_min) * j / (resolution - 1);
      mesh.vertices.push_back(evaluate_surface(s, {u, v}));
    }
  for (int j = 0; j + 1 < resolution; ++j)
    for (int i = 0; i + 1 < resolution; ++i) {
      const int a = j * resolution + i, b = a + 1, c = a + resolution, e = c + 1;
      mesh.faces.push_back({a, b, e});
      mesh.faces.push_back({a, e, c});
    }
  mesh.comments = {"units um", "source bicubic b-spline surface sampled on a " + std::to_string(resolution) +
                                   "x" + std::to_string(resolution) + " image-domain grid"};
  return mesh;
}

// ---------------------------------------------------------------------- JSON

namespace {

json row_major(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Eigen::MatrixXd from_row_major(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols))
    fail(ErrorKind::ParseError, std::string("json: '") + what + "' must hold " + std::to_string(rows * cols) + " numbers");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr.at(static_cast<std::size_t>(r * cols + c)).get<double>();
  return m;
}

json camera_json(const AffineCamera& cam) {
  return json{{"projection", row_major(cam.projection.m)},
              {"intrinsics",
               {{"alpha_x", cam.intrinsics.alpha_x}, {"alpha_y", cam.intrinsics.alpha_y}, {"s", cam.intrinsics.s}}},
              {"pose", {{"rotation", row_major(cam.pose.rotation)}, {"t1", cam.pose.t1}, {"t2", cam.pose.t2}}}};
}

json energies_json(const BundleEnergies& e) {
  return json{{"reprojection", e.reprojection},
              {"pixel_prior", e.pixel_prior},
              {"point_prior", e.point_prior},
              {"total", e.total}};
}

json fundamental_json(const AffineFundamental& f) { return row_major(f.f); }

}  // namespace

json to_json(const AffineProjection& m) { return row_major(m.m); }

AffineProjection projection_from_json(const json& j) {
  return AffineProjection{from_row_major(j, 2, 4, "projection")};
}

json calibration_json(const CalibrationReport& r) {
  const auto& c = r.calibration;
  json out;
  out["units"] = {{"length", "um"}, {"pixel", "px"}, {"angle", "rad"},
                  {"convention", "u = M [x; 1], matrices row-major"}};
  out["left"] = camera_json(c.left);
  out["right"] = camera_json(c.right);
  out["dlt"] = {{"left", to_json(r.dlt_left)},
                {"right", to_json(r.dlt_right)},
                {"ransac_inliers_left", r.ransac_inliers_left},
                {"ransac_inliers_right", r.ransac_inliers_right}};
  out["fundamental"] = fundamental_json(fundamental_from_cameras(c.left.projection, c.right.projection));
  out["bundle_adjustment"] = {{"initial", energies_json(c.initial)},
                              {"final", energies_json(c.final)},
                              {"converged", c.converged},
                              {"iterations", c.iterations},
                              {"final_gradient_norm", c.final_gradient_norm}};
  out["correspondences"] = r.correspondences;
  return out;
}

StereoRig rig_from_calibration_json(const json& j, const std::string& stage) {
  try {
    AffineProjection left, right;
    if (stage == "ba") {
      left = projection_from_json(j.at("left").at("projection"));
      right = projection_from_json(j.at("right").at("projection"));
    } else if (stage == "dlt") {
      left = projection_from_json(j.at("dlt").at("left"));
      right = projection_from_json(j.at("dlt").at("right"));
    } else {
      fail(ErrorKind::InvalidArgument, "calibration stage must be 'ba' or 'dlt'");
    }
    return make_stereo_rig(left, right);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("calibration json: ") + e.what());
  }
}

json surface_json(const SurfaceFit& fit, const SplineFitConfig& cfg) {
  const BBSurface& s = fit.surface;
  json knots_u = json::array(), knots_v = json::array();
  for (int j = 0; j < s.grid_u() + 4; ++j) knots_u.push_back(s.basis_u().knot(j));
  for (int j = 0; j < s.grid_v() + 4; ++j) knots_v.push_back(s.basis_v().knot(j));
  json coef = json::array();
  for (Eigen::Index i = 0; i < s.coefficients().rows(); ++i)
    coef.push_back({s.coefficients()(i, 0), s.coefficients()(i, 1), s.coefficients()(i, 2)});
  std::size_t rejected = 0;
  for (bool r : fit.rejected) rejected += r ? 1 : 0;
  return json{{"units", {{"domain", "px"}, {"coefficients", "um"}}},
              {"domain",
               {{"u_min", s.domain().u_min}, {"u_max", s.domain().u_max},
                {"v_min", s.domain().v_min}, {"v_max", s.domain().v_max}}},
              {"grid", {s.grid_u(), s.grid_v()}},
              {"degree", 3},
              {"knots_u", knots_u},
              {"knots_v", knots_v},
              {"coefficient_layout", "row iu*grid_v+iv, columns x,y,z"},
              {"coefficients", coef},
              {"fit",
               {{"mu", cfg.mu}, {"epsilon_um", cfg.epsilon}, {"irls_iterations", cfg.irls_iterations},
                {"irls_delta_um", cfg.irls_delta}, {"points", fit.rejected.size()}, {"rejected", rejected}}},
              {"bending_energy", bending_energy(s)}};
}

BBSurface surface_from_json(const json& j) {
  try {
    const auto& d = j.at("domain");
    const Domain dom{d.at("u_min").get<double>(), d.at("u_max").get<double>(), d.at("v_min").get<double>(),
                     d.at("v_max").get<double>()};
    const int gu = j.at("grid").at(0).get<int>(), gv = j.at("grid").at(1).get<int>();
    const auto& coef = j.at("coefficients");
    if (coef.size() != static_cast<std::size_t>(gu) * gv) fail(ErrorKind::ParseError, "surface json: coefficient count");
    Eigen::MatrixXd c(static_cast<Eigen::Index>(coef.size()), 3);
    for (std::size_t i = 0; i < coef.size(); ++i)
      for (int k = 0; k < 3; ++k) c(static_cast<Eigen::Index>(i), k) = coef.at(i).at(k).get<double>();
    return BBSurface(dom, gu, gv, std::move(c));
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("surface json: ") + e.what());
  }
}

json transform_json(const AccumulatedRegistration& r) {
  json curve = json::array();
  for (const auto& p : r.error_curve) {
    json e{{"frames", p.frames_used}, {"rmse_um", p.rmse}};
    if (p.rotation_error_rad) e["rotation_error_rad"] = *p.rotation_error_rad;
    if (p.translation_error_um) e["translation_error_um"] = *p.translation_error_um;
    if (p.alignment_error_um) e["alignment_error_um"] = *p.alignment_error_um;
    curve.push_back(e);
  }
  return json{{"units", {{"translation", "um"}, {"rotation", "row-major 3x3"}}},
              {"convention", "x_robot = R * x_camera + t"},
              {"rotation", row_major(r.transform.rotation)},
              {"translation", {r.transform.translation.x(), r.transform.translation.y(), r.transform.translation.z()}},
              {"frames_used", r.frames_used},
              {"residuals",
               {{"rmse_um", r.residuals.rmse}, {"max_um", r.residuals.max}, {"norms_um", r.residuals.norms}}},
              {"error_curve", curve}};
}

namespace {

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

json scene_json(const SimScene& s) {
  return json{
      {"rig",
       {{"magnification_px_per_um", s.rig.magnification},
        {"vergence_deg", s.rig.vergence_deg},
        {"roll_deg", {s.rig.roll_left_deg, s.rig.roll_right_deg}},
        {"target_um", point_json(s.rig.target)},
        {"image_size_px", {s.rig.image_width, s.rig.image_height}}}},
      {"frames", s.n_t},
      {"keypoints", s.n_k},
      {"volume",
       {{"centre_um", point_json(s.volume_centre)},
        {"half_x_um", s.volume_half_x},
        {"half_y_um", s.volume_half_y},
        {"depth_span_um", s.depth_span}}},
      {"tool", {{"length_um", s.tool.length}, {"tip_gap_um", s.tool.tip_gap}}},
      {"surface",
       {{"kind", to_string(s.surface.kind)},
        {"centre_um", point_json(s.surface.centre)},
        {"half_extent_um", s.surface.half_extent},
        {"slope", {s.surface.slope_x, s.surface.slope_y}},
        {"radius_um", s.surface.radius},
        {"amplitude_um", s.surface.amplitude},
        {"wavelength_um", s.surface.wavelength}}},
      {"noise",
       {{"sigma_u_px", s.noise.sigma_u},
        {"sigma_x_um", s.noise.sigma_x},
        {"outlier_fraction", s.noise.outlier_fraction}}},
      {"registration",
       {{"frames", s.registration_frames},
        {"motion_rotation_deg", s.motion_rotation_deg},
        {"motion_translation_um", s.motion_translation_um}}},
      {"seed", s.seed.value}};
}

SimScene scene_from_json(const json& j) {
  SimScene s;
  try {
    if (j.contains("rig")) {
      const auto& r = j.at("rig");
      s.rig.magnification = r.value("magnification_px_per_um", s.rig.magnification);
      s.rig.vergence_deg = r.value("vergence_deg", s.rig.vergence_deg);
      if (r.contains("roll_deg")) {
        s.rig.roll_left_deg = r.at("roll_deg").at(0).get<double>();
        s.rig.roll_right_deg = r.at("roll_deg").at(1).get<double>();
      }
      if (r.contains("target_um")) s.rig.target = point_from(r.at("target_um"));
      if (r.contains("image_size_px")) {
        s.rig.image_width = r.at("image_size_px").at(0).get<double>();
        s.rig.image_height = r.at("image_size_px").at(1).get<double>();
      }
    }
    s.n_t = j.value("frames", s.n_t);
    s.n_k = j.value("keypoints", s.n_k);
    if (j.contains("volume")) {
      const auto& v = j.at("volume");
      if (v.contains("centre_um")) s.volume_centre = point_from(v.at("centre_um"));
      s.volume_half_x = v.value("half_x_um", s.volume_half_x);
      s.volume_half_y = v.value("half_y_um", s.volume_half_y);
      s.depth_span = v.value("depth_span_um", s.depth_span);
    }
    if (j.contains("tool")) {
      s.tool.length = j.at("tool").value("length_um", s.tool.length);
      s.tool.tip_gap = j.at("tool").value("tip_gap_um", s.tool.tip_gap);
    }
    if (j.contains("surface")) {
      const auto& f = j.at("surface");
      if (f.contains("kind")) s.surface.kind = surface_kind_from_string(f.at("kind").get<std::string>());
      if (f.contains("centre_um")) s.surface.centre = point_from(f.at("centre_um"));
      s.surface.half_extent = f.value("half_extent_um", s.surface.half_extent);
      if (f.contains("slope")) {
        s.surface.slope_x = f.at("slope").at(0).get<double>();
        s.surface.slope_y = f.at("slope").at(1).get<double>();
      }
      s.surface.radius = f.value("radius_um", s.surface.radius);
      s.surface.amplitude = f.value("amplitude_um", s.surface.amplitude);
      s.surface.wavelength = f.value("wavelength_um", s.surface.wavelength);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.noise.sigma_u = n.value("sigma_u_px", s.noise.sigma_u);
      s.noise.sigma_x = n.value("sigma_x_um", s.noise.sigma_x);
      s.noise.outlier_fraction = n.value("outlier_fraction", s.noise.outlier_fraction);
    }
    if (j.contains("registration")) {
      const auto& g = j.at("registration");
      s.registration_frames = g.value("frames", s.registration_frames);
      s.motion_rotation_deg = g.value("motion_rotation_deg", s.motion_rotation_deg);
      s.motion_translation_um = g.value("motion_translation_um", s.motion_translation_um);
    }
    if (j.contains("seed")) s.seed.value = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("scene json: ") + e.what());
  }
  return s;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace affstereo

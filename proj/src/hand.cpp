#include "egobridge/hand.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/QR>

#include "egobridge/errors.hpp"

namespace egobridge {

namespace {

constexpr const char* kFingerNames[kNumFingers] = {"thumb", "index", "middle", "ring", "pinky"};

std::string idx(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const io::Json& require_array(const io::Json& obj, std::string_view key,
                              const std::string& path) {
  const io::Json& v = io::require(obj, key, path);
  if (!v.is_array()) throw SchemaError(path + "." + std::string(key) + ": expected an array");
  return v;
}

Vec3 unit_axis(const Vec3& a, const std::string& path) {
  const double n = a.norm();
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw InvalidModel(path + ": axis must have unit norm");
  }
  return a / n;
}

io::Json vec_json(const Vec3& v) { return io::Json{v.x(), v.y(), v.z()}; }

Point3 mirror(const Point3& p, bool flip) { return flip ? Point3(-p.x(), p.y(), p.z()) : p; }

}  // namespace

Handedness parse_handedness(const std::string& s) {
  if (s == "left") return Handedness::kLeft;
  if (s == "right") return Handedness::kRight;
  throw SchemaError("handedness: expected \"left\" or \"right\", got \"" + s + "\"");
}

std::string to_string(Handedness h) { return h == Handedness::kLeft ? "left" : "right"; }

// ---------------------------------------------------------------------------
// Human hand

HumanHandModel human_hand_model_from_json(const io::Json& j) {
  io::check_schema(j, "ehm-1", "");
  HumanHandModel m;
  m.handedness = parse_handedness(io::require_string(j, "handedness", ""));

  const io::Json& fingers = require_array(j, "fingers", "");
  if (fingers.size() != kNumFingers) {
    throw InvalidModel("fingers: expected 5 fingers, got " + std::to_string(fingers.size()));
  }
  for (std::size_t f = 0; f < kNumFingers; ++f) {
    const std::string path = idx("fingers", f);
    m.palm_offsets[f] = io::as_vec3(io::require(fingers[f], "palm_offset", path),
                                    path + ".palm_offset");
    const Vec3 dir = io::as_vec3(io::require(fingers[f], "direction", path), path + ".direction");
    m.finger_directions[f] = unit_axis(dir, path + ".direction");
    const auto lengths = io::require_numbers(fingers[f], "segment_lengths", path, kJointsPerFinger);
    for (int s = 0; s < kJointsPerFinger; ++s) m.segment_lengths[f][s] = lengths[s];
  }

  const auto mean = io::require_numbers(j, "mean_pose", "", kHumanPoseDof);
  for (int i = 0; i < kHumanPoseDof; ++i) m.mean_pose[i] = mean[i];

  const io::Json& basis = require_array(j, "pca_basis", "");
  if (basis.size() != kHumanPoseDof) {
    throw SchemaError("pca_basis: expected 45 rows, got " + std::to_string(basis.size()));
  }
  for (int r = 0; r < kHumanPoseDof; ++r) {
    const auto row = io::as_numbers(basis[r], idx("pca_basis", r), kPcaDim);
    for (int c = 0; c < kPcaDim; ++c) m.pca_basis(r, c) = row[c];
  }
  validate(m);
  return m;
}

void validate(const HumanHandModel& m) {
  for (int f = 0; f < kNumFingers; ++f) {
    if (!m.palm_offsets[f].allFinite()) throw InvalidModel("palm offset is not finite");
    for (double len : m.segment_lengths[f]) {
      if (!(len > 0.0) || !std::isfinite(len)) {
        throw InvalidModel(std::string("segment length of ") + kFingerNames[f] +
                           " must be positive");
      }
    }
  }
  if (!m.mean_pose.allFinite() || !m.pca_basis.allFinite()) {
    throw InvalidModel("mean pose or PCA basis is not finite");
  }
  Eigen::ColPivHouseholderQR<PcaBasis> qr(m.pca_basis);
  if (qr.rank() != kPcaDim) {
    throw InvalidModel("pca_basis must have rank 15, got " + std::to_string(qr.rank()));
  }
}

io::Json to_json(const HumanHandModel& m) {
  io::Json fingers = io::Json::array();
  for (int f = 0; f < kNumFingers; ++f) {
    fingers.push_back({{"name", kFingerNames[f]},
                       {"palm_offset", vec_json(m.palm_offsets[f])},
                       {"direction", vec_json(m.finger_directions[f])},
                       {"segment_lengths", m.segment_lengths[f]}});
  }
  io::Json basis = io::Json::array();
  for (int r = 0; r < kHumanPoseDof; ++r) {
    io::Json row = io::Json::array();
    for (int c = 0; c < kPcaDim; ++c) row.push_back(m.pca_basis(r, c));
    basis.push_back(row);
  }
  return {{"schema", "ehm-1"},
          {"handedness", to_string(m.handedness)},
          {"fingers", fingers},
          {"mean_pose", std::vector<double>(m.mean_pose.data(), m.mean_pose.data() + kHumanPoseDof)},
          {"pca_basis", basis}};
}

HumanHandModel load_hand_model(const std::filesystem::path& path) {
  return human_hand_model_from_json(io::read_json_file(path));
}

void check_pca(const PcaCoeffs& c) {
  if (!c.allFinite()) throw InvalidModel("PCA coefficients must be finite");
  if (c.cwiseAbs().maxCoeff() > kPcaSanityBound) {
    throw InvalidModel("PCA coefficient magnitude exceeds 10");
  }
}

HandPose45 pose_from_pca(const HumanHandModel& model, const PcaCoeffs& c) {
  return model.mean_pose + model.pca_basis * c;
}

HandKeypoints human_hand_fk(const HumanHandModel& model, const PcaCoeffs& c) {
  return human_hand_fk(model, c, model.handedness);
}

HandKeypoints human_hand_fk(const HumanHandModel& model, const PcaCoeffs& c,
                            Handedness side) {
  const HandPose45 theta = pose_from_pca(model, c);
  const bool flip = side != model.handedness;
  HandKeypoints k;
  k[0] = Point3::Zero();
  for (int f = 0; f < kNumFingers; ++f) {
    Mat3 r = Mat3::Identity();
    Point3 p = model.palm_offsets[f];
    k[1 + 4 * f] = mirror(p, flip);
    for (int s = 0; s < kJointsPerFinger; ++s) {
      const int j = 3 * (kJointsPerFinger * f + s);
      r = r * exp_so3(theta.segment<3>(j));
      p += r * (model.segment_lengths[f][s] * model.finger_directions[f]);
      k[2 + 4 * f + s] = mirror(p, flip);
    }
  }
  return k;
}

Fingertips fingertips(const HandKeypoints& k) {
  Fingertips tips;
  for (int f = 0; f < kNumFingers; ++f) tips[f] = k[fingertip_index(f)];
  return tips;
}

Eigen::Matrix<double, 3 * kNumFingers, kPcaDim> fingertip_jacobian(
    const HumanHandModel& model, const PcaCoeffs& c, Handedness side, double step) {
  Eigen::Matrix<double, 3 * kNumFingers, kPcaDim> jac;
  for (int i = 0; i < kPcaDim; ++i) {
    PcaCoeffs plus = c, minus = c;
    plus[i] += step;
    minus[i] -= step;
    const Fingertips a = fingertips(human_hand_fk(model, plus, side));
    const Fingertips b = fingertips(human_hand_fk(model, minus, side));
    for (int f = 0; f < kNumFingers; ++f) {
      jac.block<3, 1>(3 * f, i) = (a[f] - b[f]) / (2.0 * step);
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Robot hand

const RobotJoint& RobotHandModel::joint(int expanded_index) const {
  if (expanded_index < kRobotActive) return active[expanded_index];
  return mimic[expanded_index - kRobotActive].joint;
}

namespace {

RobotJoint parse_joint(const io::Json& j, const std::string& path) {
  RobotJoint joint;
  joint.name = io::require_string(j, "name", path);
  joint.axis = unit_axis(io::as_vec3(io::require(j, "axis", path), path + ".axis"), path + ".axis");
  joint.origin = io::as_vec3(io::require(j, "origin", path), path + ".origin");
  joint.lo = io::require_number(j, "lo", path);
  joint.hi = io::require_number(j, "hi", path);
  return joint;
}

io::Json joint_json(const RobotJoint& j) {
  return {{"name", j.name}, {"axis", vec_json(j.axis)}, {"origin", vec_json(j.origin)},
          {"lo", j.lo}, {"hi", j.hi}};
}

}  // namespace

RobotHandModel robot_hand_model_from_json(const io::Json& j) {
  io::check_schema(j, "erh-1", "");
  RobotHandModel m;
  m.handedness = parse_handedness(io::require_string(j, "handedness", ""));

  const io::Json& active = require_array(j, "active", "");
  const io::Json& mimic = require_array(j, "mimic", "");
  if (active.size() != kRobotActive || mimic.size() != kRobotMimic) {
    throw InvalidModel("robot hand must have exactly 6 active and 6 mimic joints, got " +
                       std::to_string(active.size()) + " active and " +
                       std::to_string(mimic.size()) + " mimic");
  }

  std::map<std::string, int> by_name;
  for (std::size_t i = 0; i < kRobotActive; ++i) {
    m.active[i] = parse_joint(active[i], idx("active", i));
    if (!by_name.emplace(m.active[i].name, static_cast<int>(i)).second) {
      throw InvalidModel("duplicate joint name " + m.active[i].name);
    }
  }
  for (std::size_t i = 0; i < kRobotMimic; ++i) {
    const std::string path = idx("mimic", i);
    MimicJoint& mj = m.mimic[i];
    mj.joint = parse_joint(mimic[i], path);
    const std::string source = io::require_string(mimic[i], "source", path);
    auto it = by_name.find(source);
    if (it == by_name.end() || it->second >= kRobotActive) {
      throw InvalidModel(path + ".source: \"" + source + "\" is not an active joint");
    }
    mj.source = it->second;
    mj.multiplier = io::require_number(mimic[i], "multiplier", path);
    mj.offset = io::require_number(mimic[i], "offset", path);
    if (!by_name.emplace(mj.joint.name, kRobotActive + static_cast<int>(i)).second) {
      throw InvalidModel("duplicate joint name " + mj.joint.name);
    }
  }

  const io::Json& fingers = require_array(j, "fingers", "");
  if (fingers.size() != kNumFingers) {
    throw InvalidModel("fingers: expected 5 fingers, got " + std::to_string(fingers.size()));
  }
  for (std::size_t f = 0; f < kNumFingers; ++f) {
    const std::string path = idx("fingers", f);
    const io::Json& chain = require_array(fingers[f], "chain", path);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      if (!chain[k].is_string()) throw SchemaError(idx(path + ".chain", k) + ": expected a name");
      auto it = by_name.find(chain[k].get<std::string>());
      if (it == by_name.end()) {
        throw InvalidModel(idx(path + ".chain", k) + ": unknown joint " +
                           chain[k].get<std::string>());
      }
      m.chains[f].push_back(it->second);
    }
    m.fingertip_offsets[f] = io::as_vec3(io::require(fingers[f], "tip_offset", path),
                                         path + ".tip_offset");
  }
  validate(m);
  return m;
}

void validate(const RobotHandModel& m) {
  for (int i = 0; i < kRobotDof; ++i) {
    const RobotJoint& jt = m.joint(i);
    if (!(jt.lo < jt.hi)) throw InvalidModel("joint " + jt.name + ": limits require lo < hi");
  }
  for (const MimicJoint& mj : m.mimic) {
    if (mj.source < 0 || mj.source >= kRobotActive) {
      throw InvalidModel("mimic joint " + mj.joint.name + " does not reference an active joint");
    }
  }
  std::set<int> used;
  for (const auto& chain : m.chains) {
    for (int j : chain) {
      if (!used.insert(j).second) {
        throw InvalidModel("joint " + m.joint(j).name + " appears in more than one chain");
      }
    }
  }
}

io::Json to_json(const RobotHandModel& m) {
  io::Json active = io::Json::array();
  for (const auto& j : m.active) active.push_back(joint_json(j));
  io::Json mimic = io::Json::array();
  for (const auto& mj : m.mimic) {
    io::Json j = joint_json(mj.joint);
    j["source"] = m.active[mj.source].name;
    j["multiplier"] = mj.multiplier;
    j["offset"] = mj.offset;
    mimic.push_back(j);
  }
  io::Json fingers = io::Json::array();
  for (int f = 0; f < kNumFingers; ++f) {
    io::Json chain = io::Json::array();
    for (int j : m.chains[f]) chain.push_back(m.joint(j).name);
    fingers.push_back({{"name", kFingerNames[f]},
                       {"chain", chain},
                       {"tip_offset", vec_json(m.fingertip_offsets[f])}});
  }
  return {{"schema", "erh-1"}, {"handedness", to_string(m.handedness)},
          {"active", active},  {"mimic", mimic},
          {"fingers", fingers}};
}

RobotHandModel load_robot_hand(const std::filesystem::path& path) {
  return robot_hand_model_from_json(io::read_json_file(path));
}

RobotHandCommand clamp_command(const RobotHandModel& model, const RobotHandCommand& q) {
  RobotHandCommand out;
  for (int i = 0; i < kRobotActive; ++i) {
    out[i] = std::clamp(q[i], model.active[i].lo, model.active[i].hi);
  }
  return out;
}

RobotJointVector expand_mimic(const RobotHandModel& model, const RobotHandCommand& q) {
  RobotJointVector out;
  const RobotHandCommand active = clamp_command(model, q);
  out.head<kRobotActive>() = active;
  for (int i = 0; i < kRobotMimic; ++i) {
    const MimicJoint& mj = model.mimic[i];
    const double v = mj.multiplier * active[mj.source] + mj.offset;
    out[kRobotActive + i] = std::clamp(v, mj.joint.lo, mj.joint.hi);
  }
  return out;
}

Fingertips robot_hand_fk(const RobotHandModel& model, const RobotHandCommand& q) {
  return robot_hand_fk(model, q, model.handedness);
}

Fingertips robot_hand_fk(const RobotHandModel& model, const RobotHandCommand& q,
                         Handedness side) {
  const RobotJointVector full = expand_mimic(model, q);
  const bool flip = side != model.handedness;
  Fingertips tips;
  for (int f = 0; f < kNumFingers; ++f) {
    Mat3 r = Mat3::Identity();
    Point3 p = Point3::Zero();
    for (int j : model.chains[f]) {
      const RobotJoint& jt = model.joint(j);
      p += r * jt.origin;
      r = r * rotation_about(jt.axis, full[j]);
    }
    tips[f] = mirror(p + r * model.fingertip_offsets[f], flip);
  }
  return tips;
}

}  // namespace egobridge

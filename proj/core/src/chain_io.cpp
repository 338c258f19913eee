#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "xrteleop/error.hpp"
#include "xrteleop/kinematics.hpp"

namespace xrt {
namespace {

namespace pt = boost::property_tree;

constexpr const char* kAttr = "<xmlattr>";

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

bool is_markup_node(const std::string& key) {
  return key == kAttr || key == "<xmlcomment>" || key == "<xmltext>";
}

std::optional<std::string> attribute(const pt::ptree& node, const char* name) {
  if (auto attrs = node.get_child_optional(kAttr)) {
    if (auto v = attrs->get_optional<std::string>(name)) return *v;
  }
  return std::nullopt;
}

double parse_number(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedDocument, "bad number '" + std::string(text) + "' in " + std::string(what));
  }
  return value;
}

Eigen::Vector3d parse_triple(const std::string& text, std::string_view what) {
  std::istringstream in(text);
  std::string token;
  std::vector<double> values;
  while (in >> token) values.push_back(parse_number(token, what));
  if (values.size() != 3) {
    throw Error(ErrorCode::MalformedDocument, std::string(what) + " needs three numbers, got '" + text + "'");
  }
  return {values[0], values[1], values[2]};
}

JointKind parse_kind(const std::string& type, const std::string& joint) {
  if (type == "revolute") return JointKind::Revolute;
  if (type == "prismatic") return JointKind::Prismatic;
  if (type == "fixed") return JointKind::Fixed;
  throw Error(ErrorCode::UnsupportedJointType, "joint '" + joint + "' has unsupported type '" + type + "'");
}

JointSpec parse_joint(const pt::ptree& node, std::vector<std::string>* warnings) {
  JointSpec js;
  const auto name = attribute(node, "name");
  if (!name) throw Error(ErrorCode::MalformedDocument, "joint without a name");
  js.name = *name;
  const auto type = attribute(node, "type");
  if (!type) throw Error(ErrorCode::MalformedDocument, "joint '" + js.name + "' without a type");
  js.kind = parse_kind(*type, js.name);

  bool have_parent = false;
  bool have_child = false;
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  for (const auto& [key, child] : node) {
    if (is_markup_node(key)) continue;
    if (key == "parent" || key == "child") {
      const auto link = attribute(child, "link");
      if (!link) throw Error(ErrorCode::MalformedDocument, "joint '" + js.name + "' <" + key + "> lacks link");
      (key == "parent" ? js.parent_link : js.child_link) = *link;
      (key == "parent" ? have_parent : have_child) = true;
    } else if (key == "origin") {
      if (auto v = attribute(child, "xyz")) xyz = parse_triple(*v, "origin xyz");
      if (auto v = attribute(child, "rpy")) rpy = parse_triple(*v, "origin rpy");
    } else if (key == "axis") {
      if (auto v = attribute(child, "xyz")) js.axis = parse_triple(*v, "axis xyz");
    } else if (key == "limit") {
      if (auto v = attribute(child, "lower")) js.lower = parse_number(*v, "limit lower");
      if (auto v = attribute(child, "upper")) js.upper = parse_number(*v, "limit upper");
      if (auto v = attribute(child, "velocity")) js.velocity_limit = parse_number(*v, "limit velocity");
    } else {
      warn(warnings, "joint '" + js.name + "': ignoring <" + key + ">");
    }
  }
  if (!have_parent || !have_child) {
    throw Error(ErrorCode::MalformedDocument, "joint '" + js.name + "' needs both <parent> and <child>");
  }
  js.origin = Pose(xyz, quaternion_from_rpy(rpy.x(), rpy.y(), rpy.z()));
  js.origin_rpy = rpy;
  if (js.kind == JointKind::Fixed) {
    js.lower = 0.0;
    js.upper = 0.0;
    js.velocity_limit = 0.0;
  }
  return js;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_triple(const Eigen::Vector3d& v) {
  return format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z());
}

}  // namespace

KinematicChain parse_chain(std::string_view text, std::vector<std::string>* warnings) {
  pt::ptree doc;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }

  const auto robot = doc.get_child_optional("robot");
  if (!robot) throw Error(ErrorCode::MalformedDocument, "missing <robot> root element");

  std::string name = attribute(*robot, "name").value_or("robot");
  std::vector<std::string> links;
  std::vector<JointSpec> joints;
  for (const auto& [key, node] : *robot) {
    if (is_markup_node(key)) continue;
    if (key == "link") {
      const auto link = attribute(node, "name");
      if (!link) throw Error(ErrorCode::MalformedDocument, "link without a name");
      links.push_back(*link);
      for (const auto& [sub, _] : node) {
        if (!is_markup_node(sub)) warn(warnings, "link '" + *link + "': ignoring <" + sub + ">");
      }
    } else if (key == "joint") {
      joints.push_back(parse_joint(node, warnings));
    } else {
      warn(warnings, "ignoring <" + key + ">");
    }
  }
  return KinematicChain(std::move(name), std::move(links), std::move(joints));
}

KinematicChain load_chain(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedDocument, "cannot open chain file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_chain(text.str(), warnings);
}

std::string serialize_chain(const KinematicChain& chain) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n";
  out << "<robot name=\"" << chain.name() << "\">\n";
  for (const auto& link : chain.links()) out << "  <link name=\"" << link << "\"/>\n";
  for (const auto& js : chain.joints()) {
    out << "  <joint name=\"" << js.name << "\" type=\"" << to_string(js.kind) << "\">\n";
    out << "    <parent link=\"" << js.parent_link << "\"/>\n";
    out << "    <child link=\"" << js.child_link << "\"/>\n";
    out << "    <origin xyz=\"" << format_triple(js.origin.position) << "\" rpy=\""
        << format_triple(js.origin_rpy.value_or(rpy_from_quaternion(js.origin.orientation))) << "\"/>\n";
    if (js.kind != JointKind::Fixed) {
      out << "    <axis xyz=\"" << format_triple(js.axis) << "\"/>\n";
      out << "    <limit";
      if (std::isfinite(js.lower)) out << " lower=\"" << format_number(js.lower) << "\"";
      if (std::isfinite(js.upper)) out << " upper=\"" << format_number(js.upper) << "\"";
      if (std::isfinite(js.velocity_limit)) out << " velocity=\"" << format_number(js.velocity_limit) << "\"";
      out << "/>\n";
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

}  // namespace xrt

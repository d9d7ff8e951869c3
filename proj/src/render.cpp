#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "geogen/plotter.hpp"

#ifdef GEOGEN_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#endif

namespace geogen {

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  return s == "-0.00" ? "0.00" : s;
}

// Abstract coordinates (y up) to pixels (y down), fitted and centered.
class Viewport {
 public:
  Viewport(const Diagram& d, const RenderSettings& s) : s_(s) {
    double minx = std::numeric_limits<double>::infinity(), miny = minx;
    double maxx = -minx, maxy = -minx;
    for (const auto& [p, v] : d.points) {
      minx = std::min(minx, v.x), maxx = std::max(maxx, v.x);
      miny = std::min(miny, v.y), maxy = std::max(maxy, v.y);
    }
    if (d.points.empty()) minx = miny = 0, maxx = maxy = 1;
    double bw = std::max(maxx - minx, 1e-9), bh = std::max(maxy - miny, 1e-9);
    double aw = s.width_px - 2.0 * s.margin_px, ah = s.height_px - 2.0 * s.margin_px;
    k_ = std::min(aw / bw, ah / bh);
    ox_ = s.margin_px + (aw - bw * k_) / 2 - minx * k_;
    oy_ = s.margin_px + (ah - bh * k_) / 2 + maxy * k_;
  }
  Vec2 map(Vec2 v) const { return {ox_ + v.x * k_, oy_ - v.y * k_}; }
  double scale() const { return k_; }

 private:
  const RenderSettings& s_;
  double k_ = 1, ox_ = 0, oy_ = 0;
};

Vec2 label_position(const Diagram& d, const PointRef& p, const Viewport& vp, const RenderSettings& s) {
  Vec2 at = vp.map(d.points.at(p));
  auto it = d.label_offsets.find(p);
  Vec2 dir = it == d.label_offsets.end() ? Vec2{0, 1} : it->second;
  return {at.x + dir.x * s.label_distance, at.y - dir.y * s.label_distance};
}

// Lengths sit beside the segment midpoint on the side away from the
// figure's centroid; angles sit inside the angle along its bisector.
Vec2 annotation_position(const Diagram& d, const Annotation& a, const Viewport& vp, const RenderSettings& s) {
  const auto& pts = a.symbol.entity().points();
  Vec2 c{0, 0};
  for (const auto& p : d.order) c = {c.x + d.points.at(p).x, c.y + d.points.at(p).y};
  c = {c.x / static_cast<double>(d.order.size()), c.y / static_cast<double>(d.order.size())};
  Vec2 at, dir;
  if (a.symbol.kind() == MeasureKind::MeasureOfAngle && pts.size() == 3) {
    Vec2 v = d.points.at(pts[1]), p = d.points.at(pts[0]), q = d.points.at(pts[2]);
    Vec2 u1{p.x - v.x, p.y - v.y}, u2{q.x - v.x, q.y - v.y};
    double n1 = std::hypot(u1.x, u1.y), n2 = std::hypot(u2.x, u2.y);
    dir = {u1.x / n1 + u2.x / n2, u1.y / n1 + u2.y / n2};
    at = v;
  } else {
    Vec2 p = d.points.at(pts[0]), q = d.points.at(pts[1]);
    at = {(p.x + q.x) / 2, (p.y + q.y) / 2};
    dir = {-(q.y - p.y), q.x - p.x};
    if (dir.x * (at.x - c.x) + dir.y * (at.y - c.y) < 0) dir = {-dir.x, -dir.y};
  }
  double n = std::hypot(dir.x, dir.y);
  if (n < 1e-12) dir = {0, 1}, n = 1;
  Vec2 px = vp.map(at);
  double k = 1.6 * s.label_distance / n;
  return {px.x + dir.x * k, px.y - dir.y * k};
}

}  // namespace

std::string render_svg(const Diagram& d, const RenderSettings& s) {
  Viewport vp(d, s);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(s.width_px) +
         "\" height=\"" + std::to_string(s.height_px) + "\" viewBox=\"0 0 " + std::to_string(s.width_px) + " " +
         std::to_string(s.height_px) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<g stroke=\"black\" stroke-width=\"2\" stroke-linecap=\"round\">\n";
  for (const auto& seg : d.segments) {
    Vec2 a = vp.map(d.points.at(seg.points()[0])), b = vp.map(d.points.at(seg.points()[1]));
    out += "<line x1=\"" + fixed2(a.x) + "\" y1=\"" + fixed2(a.y) + "\" x2=\"" + fixed2(b.x) + "\" y2=\"" +
           fixed2(b.y) + "\"/>\n";
  }
  out += "</g>\n";
  if (!d.circles.empty()) {
    out += "<g fill=\"none\" stroke=\"black\" stroke-width=\"2\">\n";
    for (const auto& c : d.circles) {
      Vec2 at = vp.map(d.points.at(c.center));
      out += "<circle cx=\"" + fixed2(at.x) + "\" cy=\"" + fixed2(at.y) + "\" r=\"" + fixed2(c.radius * vp.scale()) +
             "\"/>\n";
    }
    out += "</g>\n";
  }
  out += "<g fill=\"black\">\n";
  for (const auto& p : d.order) {
    Vec2 at = vp.map(d.points.at(p));
    out += "<circle cx=\"" + fixed2(at.x) + "\" cy=\"" + fixed2(at.y) + "\" r=\"" + fixed2(s.point_radius) + "\"/>\n";
  }
  out += "</g>\n";
  out += "<g font-family=\"Helvetica, Arial, sans-serif\" font-size=\"" + std::to_string(s.font_size) +
         "\" text-anchor=\"middle\" dominant-baseline=\"central\">\n";
  for (const auto& p : d.order) {
    Vec2 at = label_position(d, p, vp, s);
    out += "<text x=\"" + fixed2(at.x) + "\" y=\"" + fixed2(at.y) + "\">" + p + "</text>\n";
  }
  for (const auto& a : d.annotations) {
    Vec2 at = annotation_position(d, a, vp, s);
    out += "<text x=\"" + fixed2(at.x) + "\" y=\"" + fixed2(at.y) + "\" font-size=\"" +
           std::to_string(s.font_size - 3) + "\">" + a.text + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

bool png_supported() {
#ifdef GEOGEN_HAVE_OPENCV
  return true;
#else
  return false;
#endif
}

bool render_png(const Diagram& d, const std::string& path, const RenderSettings& s) {
#ifdef GEOGEN_HAVE_OPENCV
  Viewport vp(d, s);
  cv::Mat img(s.height_px, s.width_px, CV_8UC3, cv::Scalar(255, 255, 255));
  auto px = [](Vec2 v) { return cv::Point(static_cast<int>(std::lround(v.x)), static_cast<int>(std::lround(v.y))); };
  for (const auto& seg : d.segments) {
    cv::line(img, px(vp.map(d.points.at(seg.points()[0]))), px(vp.map(d.points.at(seg.points()[1]))),
             cv::Scalar(0, 0, 0), 2, cv::LINE_AA);
  }
  for (const auto& c : d.circles) {
    cv::circle(img, px(vp.map(d.points.at(c.center))), static_cast<int>(std::lround(c.radius * vp.scale())),
               cv::Scalar(0, 0, 0), 2, cv::LINE_AA);
  }
  double font_scale = s.font_size / 30.0;
  for (const auto& p : d.order) {
    cv::circle(img, px(vp.map(d.points.at(p))), static_cast<int>(std::lround(s.point_radius)), cv::Scalar(0, 0, 0),
               cv::FILLED, cv::LINE_AA);
    int baseline = 0;
    cv::Size size = cv::getTextSize(p, cv::FONT_HERSHEY_SIMPLEX, font_scale, 1, &baseline);
    Vec2 at = label_position(d, p, vp, s);
    cv::putText(img, p, cv::Point(static_cast<int>(at.x - size.width / 2.0), static_cast<int>(at.y + size.height / 2.0)),
                cv::FONT_HERSHEY_SIMPLEX, font_scale, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  for (const auto& a : d.annotations) {
    // Hershey fonts are ASCII only, so the degree sign is dropped.
    std::string text = a.text;
    if (auto deg = text.find("\xC2\xB0"); deg != std::string::npos) text.erase(deg, 2);
    int baseline = 0;
    double scale = font_scale * 0.8;
    cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, scale, 1, &baseline);
    Vec2 at = annotation_position(d, a, vp, s);
    cv::putText(img, text, cv::Point(static_cast<int>(at.x - size.width / 2.0), static_cast<int>(at.y + size.height / 2.0)),
                cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  if (!cv::imwrite(path, img)) throw Error(ErrorCode::IoError, "cannot write " + path);
  return true;
#else
  (void)d, (void)path, (void)s;
  return false;
#endif
}

nlohmann::json diagram_to_json(const Diagram& d) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : d.order) {
    const auto& v = d.points.at(p);
    points.push_back({{"name", p}, {"x", v.x}, {"y", v.y}});
  }
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : d.segments) segments.push_back(s.text());
  nlohmann::json extra = nlohmann::json::array();
  for (const auto& s : d.extra_segments) extra.push_back(s.text());
  nlohmann::json literals = nlohmann::json::array();
  for (const auto& p : d.literals) {
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [var, pt] : p.binding) b[var] = pt;
    literals.push_back({{"literal", p.literal.text()}, {"binding", b}});
  }
  nlohmann::json annotations = nlohmann::json::array();
  for (const auto& a : d.annotations) annotations.push_back({{"measure", a.symbol.text()}, {"text", a.text}});
  nlohmann::json circles = nlohmann::json::array();
  for (const auto& c : d.circles) circles.push_back({{"center", c.center}, {"radius", c.radius}});
  return {{"seed", d.seed},       {"width", d.width},         {"height", d.height},   {"points", points},
          {"segments", segments}, {"extra_segments", extra}, {"circles", circles}, {"literals", literals},
          {"annotations", annotations}};
}

Diagram diagram_from_json(const nlohmann::json& j, const Registry& registry) {
  Diagram d;
  try {
    d.seed = j.value("seed", std::uint64_t{0});
    d.width = j.value("width", 100.0);
    d.height = j.value("height", 100.0);
    for (const auto& p : j.at("points")) {
      auto name = p.at("name").get<std::string>();
      d.order.push_back(name);
      d.points[name] = {p.at("x").get<double>(), p.at("y").get<double>()};
    }
    for (const auto& s : j.at("segments")) d.segments.push_back(Entity::parse(EntityKind::Segment, s.get<std::string>()));
    std::sort(d.segments.begin(), d.segments.end());
    const auto none = nlohmann::json::array();
    for (const auto& s : j.value("extra_segments", none)) {
      d.extra_segments.push_back(Entity::parse(EntityKind::Segment, s.get<std::string>()));
    }
    for (const auto& c : j.value("circles", none)) {
      d.circles.push_back({c.at("center").get<std::string>(), c.at("radius").get<double>()});
    }
    for (const auto& l : j.value("literals", none)) {
      PlacedLiteral p{parse_literal(l.at("literal").get<std::string>(), registry), {}};
      // Named so the range below does not outlive a temporary.
      const auto binding = l.value("binding", nlohmann::json::object());
      for (const auto& [var, pt] : binding.items()) p.binding[var] = pt.get<std::string>();
      d.literals.push_back(std::move(p));
    }
    for (const auto& a : j.value("annotations", none)) {
      auto symbols = parse_equation(a.at("measure").get<std::string>() + "=0").symbols();
      if (symbols.size() != 1) throw Error(ErrorCode::SyntaxError, "annotation is not a single measure");
      d.annotations.push_back({*symbols.begin(), a.at("text").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SyntaxError, std::string("diagram json: ") + e.what());
  }
  for (const auto& s : d.segments) {
    for (const auto& p : s.points()) {
      if (!d.has_point(p)) throw Error(ErrorCode::DanglingReference, "segment " + s.text() + " names unknown point " + p);
    }
  }
  return d;
}

}  // namespace geogen

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmdopt/errors.hpp"
#include "mmdopt/harness.hpp"

namespace mmdopt {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::FILE* open_out(const std::string& out_dir, const char* name) {
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / name).string();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("emit_outputs: cannot open " + path);
  return f;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

const char* estimator_color(Estimator e) {
  switch (e) {
    case Estimator::mmd: return "#1f77b4";
    case Estimator::osmmd: return "#2ca02c";
    case Estimator::mle: return "#d62728";
  }
  return "#7f7f7f";
}

// 800x600 SVG of success rate against the sweep axis, one polyline per
// estimator, binomial error bars, log-scale x when the axis spans at least
// two decades.
void write_sweep_svg(const SweepReport& report, const std::string& out_dir) {
  std::FILE* f = open_out(out_dir, "plot.svg");
  const double width = 800, height = 600;
  const double left = 80, right = 640, top = 50, bottom = 540;

  std::vector<double> xs;
  for (const auto& p : report.points) xs.push_back(p.axis_value);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const double xmin = xs.front(), xmax = xs.back();
  const bool log_x = xmin > 0.0 && xmax / xmin >= 100.0;

  auto x_of = [&](double v) {
    if (xs.size() == 1) return (left + right) / 2.0;
    const double a = log_x ? std::log10(v) : v;
    const double lo = log_x ? std::log10(xmin) : xmin;
    const double hi = log_x ? std::log10(xmax) : xmax;
    return left + (a - lo) / (hi - lo) * (right - left);
  };
  auto y_of = [&](double rate) { return bottom - rate * (bottom - top); };

  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
               "width=\"%g\" height=\"%g\" viewBox=\"0 0 %g %g\">\n",
               width, height, width, height);
  std::fprintf(f, "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", width,
               height);
  std::fprintf(f,
               "<text x=\"%g\" y=\"28\" font-family=\"sans-serif\" "
               "font-size=\"18\" text-anchor=\"middle\">success rate vs "
               "%s</text>\n",
               (left + right) / 2.0, report.axis_name.c_str());

  // axes
  std::fprintf(f,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
               "stroke=\"black\"/>\n",
               left, bottom, right, bottom);
  std::fprintf(f,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
               "stroke=\"black\"/>\n",
               left, top, left, bottom);
  for (int i = 0; i <= 4; ++i) {
    const double rate = 0.25 * i;
    const double y = y_of(rate);
    std::fprintf(f,
                 "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
                 "stroke=\"#cccccc\" stroke-dasharray=\"3,3\"/>\n",
                 left, y, right, y);
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                 "font-size=\"12\" text-anchor=\"end\">%.2f</text>\n",
                 left - 8, y + 4, rate);
  }
  for (double v : xs) {
    const double x = x_of(v);
    std::fprintf(f,
                 "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
                 "stroke=\"black\"/>\n",
                 x, bottom, x, bottom + 5);
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                 "font-size=\"12\" text-anchor=\"middle\">%g</text>\n",
                 x, bottom + 20, v);
  }
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"14\" text-anchor=\"middle\">%s%s</text>\n",
               (left + right) / 2.0, bottom + 45, report.axis_name.c_str(),
               log_x ? " (log scale)" : "");
  std::fprintf(f,
               "<text x=\"22\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"14\" text-anchor=\"middle\" "
               "transform=\"rotate(-90 22 %g)\">success rate</text>\n",
               (top + bottom) / 2.0, (top + bottom) / 2.0);

  // group points per estimator, sorted along the axis
  std::map<Estimator, std::vector<const SweepPoint*>> series;
  for (const auto& p : report.points) series[p.estimator].push_back(&p);
  double legend_y = top + 10;
  for (auto& [est, pts] : series) {
    std::sort(pts.begin(), pts.end(),
              [](const SweepPoint* a, const SweepPoint* b) {
                return a->axis_value < b->axis_value;
              });
    const char* color = estimator_color(est);
    std::string path;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      path += i == 0 ? "M" : " L";
      path += num(x_of(pts[i]->axis_value)) + " " + num(y_of(pts[i]->rate));
    }
    std::fprintf(f,
                 "<path d=\"%s\" fill=\"none\" stroke=\"%s\" "
                 "stroke-width=\"2\"/>\n",
                 path.c_str(), color);
    for (const auto* p : pts) {
      const double x = x_of(p->axis_value);
      const double y0 = y_of(std::min(1.0, p->rate + p->half_width));
      const double y1 = y_of(std::max(0.0, p->rate - p->half_width));
      std::fprintf(f,
                   "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
                   "stroke=\"%s\" stroke-width=\"1\"/>\n",
                   x, y0, x, y1, color);
      std::fprintf(f,
                   "<circle cx=\"%g\" cy=\"%g\" r=\"4\" fill=\"%s\"/>\n", x,
                   y_of(p->rate), color);
    }
    std::fprintf(f,
                 "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" "
                 "stroke-width=\"2\"/>\n",
                 right + 20, legend_y, right + 50, legend_y, color);
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                 "font-size=\"13\">%s</text>\n",
                 right + 56, legend_y + 4, to_string(est).c_str());
    legend_y += 22;
  }
  std::fprintf(f, "</svg>\n");
  std::fclose(f);
}

}  // namespace

void emit_outputs(const SweepReport& report, const std::string& out_dir) {
  std::FILE* f = open_out(out_dir, "results.csv");
  std::fprintf(f,
               "axis_name,axis_value,estimator,repeats,successes,rate,"
               "half_width\n");
  for (const auto& p : report.points) {
    std::fprintf(f, "%s,%s,%s,%d,%d,%s,%s\n", report.axis_name.c_str(),
                 num(p.axis_value).c_str(), to_string(p.estimator).c_str(),
                 p.repeats, p.successes, num(p.rate).c_str(),
                 num(p.half_width).c_str());
  }
  std::fclose(f);
  if (report.points.empty()) {
    std::fprintf(stderr, "warning: sweep report is empty, wrote header only\n");
    return;
  }
  write_sweep_svg(report, out_dir);
}

void emit_outputs(const std::vector<TrialReport>& trials,
                  const std::string& out_dir) {
  std::FILE* f = open_out(out_dir, "trials.csv");
  std::fprintf(f, "trial,estimator,error_metric,success,seconds\n");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::fprintf(f, "%zu,%s,%s,%d,%s\n", i,
                 to_string(trials[i].estimator).c_str(),
                 num(trials[i].error_metric).c_str(),
                 trials[i].success ? 1 : 0, num(trials[i].seconds).c_str());
  }
  std::fclose(f);
  if (trials.empty())
    std::fprintf(stderr, "warning: trial list is empty, wrote header only\n");
}

void emit_outputs(const UnmixingReport& report, const std::string& out_dir) {
  std::FILE* f = open_out(out_dir, "unmix.csv");
  std::fprintf(f, "noise_var,method,mean_dist,std_dist,trials\n");
  for (const auto& m : report.methods) {
    std::fprintf(f, "%s,%s,%s,%s,%d\n", num(report.noise_var).c_str(),
                 m.method.c_str(), num(m.mean_dist).c_str(),
                 num(m.std_dist).c_str(), m.trials);
  }
  std::fclose(f);
  if (report.methods.empty())
    std::fprintf(stderr, "warning: unmixing report is empty, wrote header only\n");
}

SweepReport read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sweep_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_sweep_csv: empty file");
  const auto header = split_csv(line);
  const std::vector<std::string> expected = {
      "axis_name", "axis_value", "estimator", "repeats",
      "successes", "rate",       "half_width"};
  if (header != expected)
    throw std::runtime_error("read_sweep_csv: unexpected header in " + path);

  SweepReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected.size())
      throw std::runtime_error("read_sweep_csv: malformed row in " + path);
    report.axis_name = cells[0];
    SweepPoint p;
    p.axis_value = std::stod(cells[1]);
    p.estimator = estimator_from_string(cells[2]);
    p.repeats = std::stoi(cells[3]);
    p.successes = std::stoi(cells[4]);
    p.rate = std::stod(cells[5]);
    p.half_width = std::stod(cells[6]);
    report.points.push_back(p);
  }
  return report;
}

}  // namespace mmdopt

#include "mim/harness/svg.hpp"

#include <iomanip>
#include <sstream>

namespace mim::harness {
namespace {

void plot(std::ostringstream& os, double ox, const std::vector<double>& ys, double x_max,
          const std::string& xlabel, const std::string& caption) {
  const double w = 300, h = 220, left = ox + 50, top = 40;
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = top + h - h * i / 4.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"10\" text-anchor=\"end\">" << i / 4.0 << "</text>\n";
    const double x = left + w * i / 4.0;
    os << "<text x=\"" << x << "\" y=\"" << top + h + 14
       << "\" font-size=\"10\" text-anchor=\"middle\">" << x_max * i / 4.0 << "</text>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = left + w * static_cast<double>(i) / static_cast<double>(ys.size() - 1);
    os << x << ',' << top + h - h * ys[i] << ' ';
  }
  os << "\"/>\n";
  os << "<text x=\"" << left + w / 2 << "\" y=\"" << top + h + 32
     << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  os << "<text x=\"" << left + w / 2 << "\" y=\"" << top - 10
     << "\" font-size=\"13\" text-anchor=\"middle\">" << caption << "</text>\n";
}

}  // namespace

std::string curves_svg(const MetricReport& r, const std::string& title) {
  std::ostringstream os;
  os << std::setprecision(4);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"320\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"380\" y=\"16\" font-size=\"14\" text-anchor=\"middle\">" << title << "</text>\n";
  std::ostringstream pc, sc;
  pc << std::setprecision(3) << "Precision (P@20 " << r.precision_at_20 << ")";
  sc << std::setprecision(3) << "Success (AUC " << r.success_auc << ")";
  plot(os, 0, r.precision, 50, "center error threshold (px)", pc.str());
  plot(os, 380, r.success, 1, "IoU threshold", sc.str());
  os << "</svg>\n";
  return os.str();
}

std::string metrics_csv(const MetricReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "threshold_px,precision,threshold_iou,success\n";
  for (std::size_t i = 0; i < r.success.size(); ++i) {
    if (i < r.precision.size()) os << precision_threshold(i) << ',' << r.precision[i];
    else os << ',';
    os << ',' << success_threshold(i) << ',' << r.success[i] << '\n';
  }
  return os.str();
}

}  // namespace mim::harness

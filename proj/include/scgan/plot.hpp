// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scgan/errors.hpp"

namespace scgan {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal static SVG line plot, enough for the per-round validation curve.
inline void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                                const std::string& x_label, const std::string& y_label,
                                const std::vector<PlotSeries>& series) {
    const int W = 720, H = 480, ml = 70, mr = 20, mt = 50, mb = 55;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("plot: cannot write " + path.string());
    char buf[512];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"28\" font-size=\"18\" text-anchor=\"middle\">%s</text>\n",
                  W / 2, title.c_str());
    out << buf;
    // axes
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n"
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                  ml, H - mb, W - mr, H - mb, ml, mt, ml, H - mb);
    out << buf;
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%d\" font-size=\"12\" text-anchor=\"middle\">%.3g"
                      "</text>\n",
                      px(xv), H - mb + 18, xv);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\">%.4g"
                      "</text>\n",
                      ml - 6, py(yv) + 4, yv);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-size=\"14\" text-anchor=\"middle\">%s</text>\n",
                  (ml + W - mr) / 2, H - 14, x_label.c_str());
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%d\" font-size=\"14\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 16 %d)\">%s</text>\n",
                  (mt + H - mb) / 2, (mt + H - mb) / 2, y_label.c_str());
    out << buf;

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = colors[si % 4];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
            pts += buf;
        }
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
            << pts << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf),
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                          px(s.x[i]), py(s.y[i]), color);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%d\" font-size=\"13\" fill=\"%s\">%s</text>\n",
                      W - mr - 160, mt + 18 * static_cast<int>(si) + 4, color,
                      s.label.c_str());
        out << buf;
    }
    out << "</svg>\n";
}

}  // namespace scgan

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "dlfuzz/conflict_feedback.hpp"
#include "dlfuzz/deadlock_oracle.hpp"
#include "dlfuzz/road_network.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

/// Static SVG of one run: lanes in gray, AV trajectories colored, NPC
/// trajectories dashed, conflict regions as circles, and the wait-for cycle
/// (if any) as labeled links between final positions.
inline std::string render_svg(const LaneGraph& graph, const Observation& obs,
                              const std::vector<ConflictRegion>& regions, const OracleVerdict& verdict) {
    double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
    const auto grow = [&](Vec2 p) {
        min_x = std::fmin(min_x, p.x);
        max_x = std::fmax(max_x, p.x);
        min_y = std::fmin(min_y, p.y);
        max_y = std::fmax(max_y, p.y);
    };
    for (const Lane& lane : graph.lanes)
        for (const Vec2& p : lane.centerline.points()) grow(p);
    if (min_x > max_x) {
        min_x = min_y = -1.0;
        max_x = max_y = 1.0;
    }
    const double pad = 8.0;
    min_x -= pad, min_y -= pad, max_x += pad, max_y += pad;
    const double size = 900.0;
    const double scale = size / std::fmax(max_x - min_x, max_y - min_y);
    const auto X = [&](double x) { return (x - min_x) * scale; };
    const auto Y = [&](double y) { return size - (y - min_y) * scale; };  // y up

    std::string svg;
    char buf[256];
    const auto add = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof buf, fmt, args...);
        svg += buf;
    };
    add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
        size, size, size, size);
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";

    const auto polyline = [&](const std::vector<Vec2>& pts, const std::string& style) {
        svg += "<polyline fill=\"none\" " + style + " points=\"";
        for (const Vec2& p : pts) add("%.1f,%.1f ", X(p.x), Y(p.y));
        svg += "\"/>\n";
    };

    for (const Lane& lane : graph.lanes)
        polyline(lane.centerline.points(), "stroke=\"#c8c8c8\" stroke-width=\"5\"");

    static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::size_t color_idx = 0;
    std::map<AgentId, std::string> av_color;
    for (AgentId id : obs.av_ids) av_color[id] = kColors[color_idx++ % 6];

    if (!obs.scenes.empty()) {
        for (const auto& [id, st] : obs.scenes.front()) {
            std::vector<Vec2> pts;
            for (const Scene& scene : obs.scenes) pts.push_back(scene.at(id).p);
            const bool is_av = av_color.count(id) > 0;
            const std::string color = is_av ? av_color[id] : "#7f7f7f";
            const std::string dash = is_av ? "" : " stroke-dasharray=\"6 4\"";
            polyline(pts, "stroke=\"" + color + "\" stroke-width=\"2\"" + dash);
            const Vec2 end = pts.back();
            add("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\"/>\n", X(end.x), Y(end.y), color.c_str());
            add("<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" fill=\"%s\">%u</text>\n", X(end.x) + 7,
                Y(end.y) - 7, color.c_str(), id);
            (void)st;
        }
    }

    for (const ConflictRegion& r : regions) {
        add("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"%.1f\" fill=\"none\" stroke=\"#e6a817\" stroke-width=\"2\"/>\n",
            X(r.point.x), Y(r.point.y), 4.0 * scale);
    }

    if (verdict.outcome == Outcome::Fail && verdict.cycle && !obs.scenes.empty()) {
        const auto& cycle = *verdict.cycle;
        const Scene& last = obs.scenes.back();
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            const Vec2 a = last.at(cycle[k]).p;
            const Vec2 b = last.at(cycle[(k + 1) % cycle.size()]).p;
            add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#d62728\" "
                "stroke-width=\"2.5\" stroke-dasharray=\"3 3\"/>\n",
                X(a.x), Y(a.y), X(b.x), Y(b.y));
        }
        std::string label = "deadlock cycle:";
        for (AgentId id : cycle) label += " " + std::to_string(id);
        add("<text x=\"14\" y=\"24\" font-size=\"18\" fill=\"#d62728\">%s</text>\n", label.c_str());
    }

    svg += "</svg>\n";
    return svg;
}

}  // namespace dlfuzz

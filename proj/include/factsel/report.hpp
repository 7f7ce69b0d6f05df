#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"
#include "factsel/metrics.hpp"

namespace factsel {

/// One row of the per-fact attribution table. shapley is the raw value; the
/// x16 column carries the scaled view used in reporting.
struct FactAttribution {
    FactKind fact;
    double gain = 0;
    double shapley = 0;
    int exclusive_fixes = 0;
    double delta_drop = 0;
};

/// Sparse sweeps cannot support every column: gain needs entries on both
/// sides of a fact and Shapley needs all 128 subsets. Uncomputable cells
/// come back as NaN and render as empty CSV fields.
inline std::vector<FactAttribution> fact_attribution_table(const Dataset& dataset, int k = 1) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::optional<ShapleyResult> sh;
    try {
        sh = shapley_values(dataset, k);
    } catch (const Error&) {
    }
    std::vector<FactAttribution> rows;
    for (FactKind f : all_facts()) {
        FactAttribution row;
        row.fact = f;
        try {
            row.gain = fact_gain(dataset, f, k);
        } catch (const Error&) {
            row.gain = nan;
        }
        row.shapley = sh ? sh->values.at(f) : nan;
        ExclusivityReport ex = exclusivity_and_delta(dataset, f);
        row.exclusive_fixes = ex.exclusive_fixes;
        row.delta_drop = ex.delta;
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV emitters, one per analysis

/// columns: fact, gain, shapley, shapley_x16, exclusive_fixes, delta_drop
inline std::string gain_report_csv(const std::vector<FactAttribution>& rows) {
    std::string out = "fact,gain,shapley,shapley_x16,exclusive_fixes,delta_drop\n";
    for (const auto& r : rows) {
        out += std::string(fact_name(r.fact)) + "," + detail::fmt(r.gain) + "," +
               detail::fmt(r.shapley) + "," + detail::fmt(16.0 * r.shapley) + "," +
               std::to_string(r.exclusive_fixes) + "," + detail::fmt(r.delta_drop) + "\n";
    }
    return out;
}

/// columns: fact, shapley, shapley_x16
inline std::string shapley_report_csv(const ShapleyResult& sh) {
    std::string out = "fact,shapley,shapley_x16\n";
    for (FactKind f : all_facts())
        out += std::string(fact_name(f)) + "," + detail::fmt(sh.values.at(f)) + "," +
               detail::fmt(16.0 * sh.values.at(f)) + "\n";
    return out;
}

/// columns: bitvector, coverage, coverage_ratio
inline std::string coverage_report_csv(const std::map<FactSet, std::set<std::string>>& fixed_by) {
    std::string out = "bitvector,coverage,coverage_ratio\n";
    for (const auto& [set, bugs] : fixed_by)
        out += set.to_string() + "," + std::to_string(bugs.size()) + "," +
               detail::fmt(coverage_ratio(fixed_by, set)) + "\n";
    return out;
}

/// columns: cardinality, max_pass1, avg_pass1, populated
inline std::string curve_report_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "cardinality,max_pass1,avg_pass1,populated\n";
    for (const auto& p : curve)
        out += std::to_string(p.cardinality) + "," +
               (p.populated ? detail::fmt(p.max_pass1) : "") + "," +
               (p.populated ? detail::fmt(p.avg_pass1) : "") + "," +
               (p.populated ? "1" : "0") + "\n";
    return out;
}

/// columns: region (set names joined by '+'), count
inline std::string upset_report_csv(const std::vector<UpsetRegion>& regions) {
    std::string out = "region,count\n";
    for (const auto& r : regions) {
        std::string name;
        for (FactSet s : r.members) {
            if (!name.empty()) name += "+";
            name += s.to_string();
        }
        out += detail::csv_escape(name) + "," + std::to_string(r.count) + "\n";
    }
    return out;
}

/// columns: bug_id, epsilon; first row carries the universal set in bug_id
/// position "best_universal".
inline std::string universality_report_csv(const UniversalityGap& u) {
    std::string out = "bug_id,epsilon\n";
    out += "best_universal," + u.best_universal.to_string() + "\n";
    for (const auto& [bug, eps] : u.per_bug_epsilon)
        out += detail::csv_escape(bug) + "," + detail::fmt(eps) + "\n";
    return out;
}

/// Mean pass@1 per prompt ordering index. columns: order_index, jobs, mean_pass1
inline std::string order_histogram_csv(const std::vector<ResponseSet>& response_sets) {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& rs : response_sets) {
        if (rs.responses.empty()) continue;
        double p = double(rs.successes()) / double(rs.responses.size());
        acc[rs.order_index].first += p;
        acc[rs.order_index].second += 1;
    }
    std::string out = "order_index,jobs,mean_pass1\n";
    for (const auto& [order, sums] : acc)
        out += std::to_string(order) + "," + std::to_string(sums.second) + "," +
               detail::fmt(sums.first / sums.second) + "\n";
    return out;
}

inline nlohmann::json gain_report_json(const std::vector<FactAttribution>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"fact", std::string(fact_name(r.fact))},
                     {"gain", r.gain},
                     {"shapley", r.shapley},
                     {"shapley_x16", 16.0 * r.shapley},
                     {"exclusive_fixes", r.exclusive_fixes},
                     {"delta_drop", r.delta_drop}});
    return j;
}

// ---------------------------------------------------------------------------
// SVG emitters

namespace detail {

inline std::string svg_header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string svg_text(double x, double y, const std::string& s, int size = 12,
                            const std::string& anchor = "middle") {
    std::string esc;
    for (char c : s) {
        if (c == '<') esc += "&lt;";
        else if (c == '>') esc += "&gt;";
        else if (c == '&') esc += "&amp;";
        else esc += c;
    }
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + esc + "</text>\n";
}

} // namespace detail

/// Cardinality curve: solid line for the max curve, dashed for the average,
/// one x tick per cardinality 0..7.
inline std::string curve_svg(const std::vector<CurvePoint>& curve) {
    const int w = 560, h = 360, ml = 60, mr = 20, mt = 30, mb = 50;
    auto sx = [&](double c) { return ml + c / 7.0 * (w - ml - mr); };
    auto sy = [&](double p) { return h - mb - p * (h - mt - mb); };
    std::string out = detail::svg_header(w, h);
    out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(h - mb) + "\" x2=\"" +
           detail::fmt(w - mr) + "\" y2=\"" + detail::fmt(h - mb) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(mt) + "\" x2=\"" +
           detail::fmt(ml) + "\" y2=\"" + detail::fmt(h - mb) + "\" stroke=\"black\"/>\n";
    for (int c = 0; c <= 7; ++c)
        out += detail::svg_text(sx(c), h - mb + 18, std::to_string(c));
    for (int i = 0; i <= 4; ++i) {
        double p = i / 4.0;
        out += detail::svg_text(ml - 8, sy(p) + 4, detail::fmt(p), 11, "end");
    }
    out += detail::svg_text((ml + w - mr) / 2.0, h - 12, "facts in prompt");
    out += detail::svg_text((ml + w - mr) / 2.0, 18, "pass@1 by fact-set size");
    auto polyline = [&](bool use_max, const char* dash) {
        std::string pts;
        for (const auto& p : curve) {
            if (!p.populated) continue;
            pts += detail::fmt(sx(p.cardinality)) + "," +
                   detail::fmt(sy(use_max ? p.max_pass1 : p.avg_pass1)) + " ";
        }
        return "<polyline fill=\"none\" stroke=\"#1f4e96\" stroke-width=\"2\"" +
               std::string(dash) + " points=\"" + pts + "\"/>\n";
    };
    out += polyline(true, "");
    out += polyline(false, " stroke-dasharray=\"6,4\"");
    for (const auto& p : curve) {
        if (!p.populated) continue;
        out += "<circle cx=\"" + detail::fmt(sx(p.cardinality)) + "\" cy=\"" +
               detail::fmt(sy(p.max_pass1)) + "\" r=\"3\" fill=\"#1f4e96\"/>\n";
    }
    return out + "</svg>\n";
}

/// Upset layout: intersection-size bars on top, membership dot matrix below.
inline std::string upset_svg(const std::vector<UpsetRegion>& regions,
                             const std::vector<FactSet>& chosen) {
    const int bar_w = 34, ml = 110, mt = 30;
    const int bar_h = 160;
    const int matrix_h = static_cast<int>(chosen.size()) * 22 + 10;
    const int w = ml + bar_w * std::max<int>(1, static_cast<int>(regions.size())) + 30;
    const int h = mt + bar_h + matrix_h + 30;
    int max_count = 1;
    for (const auto& r : regions) max_count = std::max(max_count, r.count);
    std::string out = detail::svg_header(w, h);
    out += detail::svg_text(w / 2.0, 18, "bugs fixed per coverage region");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        double x = ml + double(i) * bar_w + 4;
        double bh = double(regions[i].count) / double(max_count) * bar_h;
        out += "<rect x=\"" + detail::fmt(x) + "\" y=\"" + detail::fmt(mt + bar_h - bh) +
               "\" width=\"" + std::to_string(bar_w - 8) + "\" height=\"" + detail::fmt(bh) +
               "\" fill=\"#333\"/>\n";
        out += detail::svg_text(x + (bar_w - 8) / 2.0, mt + bar_h - bh - 4,
                                std::to_string(regions[i].count), 11);
    }
    for (std::size_t s = 0; s < chosen.size(); ++s) {
        double y = mt + bar_h + 20 + double(s) * 22;
        out += detail::svg_text(ml - 8, y + 4, chosen[s].to_string(), 11, "end");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            double x = ml + double(i) * bar_w + bar_w / 2.0;
            bool in = std::find(regions[i].members.begin(), regions[i].members.end(),
                                chosen[s]) != regions[i].members.end();
            out += "<circle cx=\"" + detail::fmt(x) + "\" cy=\"" + detail::fmt(y) +
                   "\" r=\"5\" fill=\"" + (in ? "#333" : "#ddd") + "\"/>\n";
        }
    }
    return out + "</svg>\n";
}

} // namespace factsel
